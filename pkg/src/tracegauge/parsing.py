"""Splitting raw generations into reasoning and answer.

parse_response is a total function: every input string classifies into
exactly one of four structural statuses.

* valid      — a think block opened and closed with non-whitespace content;
               the answer is everything after the close tag.
* empty      — the delimiters are present (or implied) but the body trims
               to nothing.
* missing    — no think block ever starts; the whole text is the answer.
* truncated  — a think block starts but never closes; there is no answer.

Only the first open tag and the first close tag after it delimit the
reasoning; any later delimiter text is ordinary answer content. For
implicit-open profiles the open tag is implied at position 0, so a
generation with no close tag is truncated, never missing.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .profiles import FormatProfile

TEACHER_TRACE_OPEN = "<reasoning_steps>"
TEACHER_TRACE_CLOSE = "</reasoning_steps>"
TEACHER_TRACE_PREFIX = "Okay, "


class TraceStatus(str, Enum):
    VALID = "valid"
    EMPTY = "empty"
    MISSING = "missing"
    TRUNCATED = "truncated"


@dataclass(frozen=True)
class ParsedResponse:
    reasoning: str | None
    answer: str | None
    status: TraceStatus
    raw_length: int

    @property
    def has_valid_reasoning(self) -> bool:
        return self.status is TraceStatus.VALID

    @property
    def has_empty_reasoning(self) -> bool:
        return self.status is TraceStatus.EMPTY

    @property
    def has_missing_reasoning(self) -> bool:
        return self.status is TraceStatus.MISSING

    @property
    def has_truncated_reasoning(self) -> bool:
        return self.status is TraceStatus.TRUNCATED


def parse_response(text: str, profile: FormatProfile) -> ParsedResponse:
    """Classify one generation. Total: never raises on any input text."""
    n = len(text)

    if profile.implicit_open:
        body_start = 0
    else:
        open_idx = text.find(profile.think_open)
        if open_idx == -1:
            if profile.tolerate_unopened_close and profile.think_close in text:
                # Treat the stray close as terminating a trace that the
                # template opened off-page.
                body_start = 0
            else:
                return ParsedResponse(
                    reasoning=None,
                    answer=text,
                    status=TraceStatus.MISSING,
                    raw_length=n,
                )
        else:
            body_start = open_idx + len(profile.think_open)

    close_idx = text.find(profile.think_close, body_start)
    if close_idx == -1:
        return ParsedResponse(
            reasoning=text[body_start:].strip(),
            answer=None,
            status=TraceStatus.TRUNCATED,
            raw_length=n,
        )

    reasoning = text[body_start:close_idx].strip()
    answer = text[close_idx + len(profile.think_close):].lstrip()
    status = TraceStatus.VALID if reasoning else TraceStatus.EMPTY
    return ParsedResponse(
        reasoning=reasoning, answer=answer, status=status, raw_length=n
    )


def parse_batch(
    texts: Iterable[str], profile: FormatProfile
) -> list[ParsedResponse]:
    """Element-wise parse_response, preserving input order."""
    return [parse_response(t, profile) for t in texts]


def extract_teacher_trace(teacher_text: str) -> str | None:
    """Pull a well-formed teacher reasoning trace out of raw teacher output.

    Returns the trimmed content of the first <reasoning_steps> block when
    that content starts with "Okay, "; otherwise None. Retrying a teacher
    that failed the format is the caller's job.
    """
    start = teacher_text.find(TEACHER_TRACE_OPEN)
    if start == -1:
        return None
    start += len(TEACHER_TRACE_OPEN)
    end = teacher_text.find(TEACHER_TRACE_CLOSE, start)
    if end == -1:
        return None
    content = teacher_text[start:end].strip()
    if not content.startswith(TEACHER_TRACE_PREFIX):
        return None
    return content


def parsed_to_dict(parsed: ParsedResponse, record_id=None) -> dict:
    out = {} if record_id is None else {"id": record_id}
    out.update(
        {
            "status": parsed.status.value,
            "reasoning": parsed.reasoning,
            "answer": parsed.answer,
            "raw_length": parsed.raw_length,
        }
    )
    return out


def parsed_from_dict(doc: dict) -> ParsedResponse:
    return ParsedResponse(
        reasoning=doc.get("reasoning"),
        answer=doc.get("answer"),
        status=TraceStatus(doc["status"]),
        raw_length=int(doc["raw_length"]),
    )
