"""Pydantic request/response models for the HTTP service.

Field names and value semantics mirror the CLI's JSONL schemas, so a
service response body for one record is interchangeable with the
corresponding CLI output line.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field


class RolePairModel(BaseModel):
    open: str
    close: str


class RoleMarkersModel(BaseModel):
    user: RolePairModel
    assistant: RolePairModel
    system: RolePairModel


class ProfileDocument(BaseModel):
    name: str
    think_open: str
    think_close: str
    implicit_open: bool
    role_markers: RoleMarkersModel
    generation_suffix: str
    missing_reasoning_default: Literal["empty-think", "no-think"]
    tolerate_unopened_close: bool

    model_config = {"extra": "forbid"}


ProfileRef = Union[str, ProfileDocument]


class ViolationModel(BaseModel):
    field_path: str
    message: str


class ValidateProfileResponse(BaseModel):
    violations: list[ViolationModel]


class MessageModel(BaseModel):
    role: Literal["user", "assistant", "system"]
    content: str
    reasoning: Optional[str] = None


class ConversationModel(BaseModel):
    messages: list[MessageModel]


class ParseRequest(BaseModel):
    texts: list[str]
    profile: ProfileRef


class ParsedRecord(BaseModel):
    status: Literal["valid", "empty", "missing", "truncated"]
    reasoning: Optional[str]
    answer: Optional[str]
    raw_length: int


class ParseResponse(BaseModel):
    results: list[ParsedRecord]


class RenderRequest(BaseModel):
    conversation: ConversationModel
    profile: ProfileRef
    think_prefix: Optional[str] = None
    response_prefix: Optional[str] = None


class RenderTrainingRequest(BaseModel):
    conversation: ConversationModel
    profile: ProfileRef
    missing_policy: Literal["empty-think", "no-think", "profile-default"] = (
        "profile-default"
    )


class SegmentModel(BaseModel):
    kind: Literal[
        "prompt", "template_glue", "think_open", "think_body", "think_close",
        "response",
    ]
    start: int
    end: int
    masked: bool = False


class RenderResponse(BaseModel):
    text: str
    segments: list[SegmentModel]


class MaskRequest(BaseModel):
    conversations: list[ConversationModel]
    profile: ProfileRef
    mask: list[Literal["prompt", "think"]] = Field(default_factory=list)
    token_spans: Optional[list[list[tuple[int, int]]]] = None


class MaskedRecord(BaseModel):
    text: str
    segments: list[SegmentModel]
    strategy: str
    token_labels: Optional[list[int]] = None


class MaskResponse(BaseModel):
    results: list[MaskedRecord]


class ScoreRecordIn(BaseModel):
    id: Optional[str] = None
    generation: str
    gold: Optional[str] = None
    external_result: Optional[bool] = None


class ScoreRequest(BaseModel):
    records: list[ScoreRecordIn]
    profile: ProfileRef


class ScoredRecord(ParsedRecord):
    id: Optional[str] = None
    answered: bool
    correct: bool
    extracted: Optional[str] = None


class ScoreResponse(BaseModel):
    results: list[ScoredRecord]


class StatsRequest(BaseModel):
    records: list[dict]
    eval: bool = False
    min_valid: int = 10
    resamples: int = 10_000
    seed: int = 42
    level: float = 0.95


class RunRecordModel(BaseModel):
    id: str
    task: str
    prompt: str = ""
    generation: str
    step: int
    gold: Optional[str] = None
    external_result: Optional[bool] = None


class ReportRequest(BaseModel):
    records: list[RunRecordModel]
    profile: ProfileRef
    min_valid: int = 10
    resamples: int = 10_000
    seed: int = 42
    level: float = 0.95
    subset_n: Optional[int] = 256
    collapse: bool = False
    delta_vr: float = 0.15
    delta_rp: float = 0.05


class AnswerPair(BaseModel):
    pred: str
    gold: str


class CheckAnswersRequest(BaseModel):
    pairs: list[AnswerPair]


class CheckedPair(BaseModel):
    pred: str
    gold: str
    equivalent: bool
    pred_canonical: str
    gold_canonical: str


class CheckAnswersResponse(BaseModel):
    results: list[CheckedPair]
