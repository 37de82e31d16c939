"""HTTP service wrapping the core package.

Every endpoint is a stateless wrapper over the corresponding core
function; the service holds no mutable state, so it can run with any
number of workers.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..answers import ResponseScore, answers_equivalent, normalize_answer, score_response
from ..errors import TraceGaugeError, UnknownProfileError
from ..masking import (
    MaskFlag,
    TokenAlignment,
    build_masked_example,
    masked_to_dict,
    project_to_tokens,
)
from ..metrics import TraceStats, compute_eval, eval_to_dict, merge_stats, stats_to_dict
from ..parsing import TraceStatus, parse_batch, parse_response, parsed_to_dict
from ..profiles import (
    BUILTIN_PROFILE_NAMES,
    FormatProfile,
    builtin_profile,
    profile_from_dict,
    profile_to_dict,
    validate_profile,
)
from ..render import (
    Conversation,
    Message,
    MissingPolicy,
    render_prompt,
    render_training_example,
)
from ..report import (
    EvalConfig,
    detect_collapse,
    finding_to_dict,
    run_record_from_dict,
    run_report,
    series_to_dict,
)
from .models import (
    CheckAnswersRequest,
    CheckAnswersResponse,
    CheckedPair,
    ConversationModel,
    MaskRequest,
    MaskResponse,
    ParseRequest,
    ParseResponse,
    ProfileRef,
    RenderRequest,
    RenderResponse,
    RenderTrainingRequest,
    ReportRequest,
    ScoreRequest,
    ScoreResponse,
    StatsRequest,
    ValidateProfileResponse,
)

app = FastAPI(
    title="trace-gauge",
    version=__version__,
    description="Reasoning-trace parsing, reliability metrics, loss masking, "
                "and collapse detection over HTTP.",
)


def _profile(ref: ProfileRef) -> FormatProfile:
    try:
        if isinstance(ref, str):
            return builtin_profile(ref)
        return profile_from_dict(ref.model_dump())
    except TraceGaugeError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None


def _conversation(model: ConversationModel) -> Conversation:
    return Conversation(
        messages=tuple(
            Message(role=m.role, content=m.content, reasoning=m.reasoning)
            for m in model.messages
        )
    )


def _rendered_payload(rendered) -> dict:
    segments = []
    pos = 0
    for seg in rendered.segments:
        end = pos + len(seg.text)
        segments.append(
            {"kind": seg.kind.value, "start": pos, "end": end, "masked": seg.masked}
        )
        pos = end
    return {"text": rendered.text, "segments": segments}


@app.get("/v1/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/v1/profiles")
def list_profiles() -> dict:
    return {"builtin": list(BUILTIN_PROFILE_NAMES)}


@app.get("/v1/profiles/{name}")
def get_profile(name: str) -> dict:
    try:
        return profile_to_dict(builtin_profile(name))
    except UnknownProfileError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from None


@app.post("/v1/profiles/validate", response_model=ValidateProfileResponse)
def validate_profile_doc(doc: dict) -> ValidateProfileResponse:
    try:
        profile = profile_from_dict(doc)
        violations = validate_profile(profile)
    except TraceGaugeError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    return ValidateProfileResponse(
        violations=[
            {"field_path": v.field_path, "message": v.message} for v in violations
        ]
    )


@app.post("/v1/parse", response_model=ParseResponse)
def parse_texts(request: ParseRequest) -> ParseResponse:
    profile = _profile(request.profile)
    parsed = parse_batch(request.texts, profile)
    return ParseResponse(results=[parsed_to_dict(p) for p in parsed])


@app.post("/v1/render", response_model=RenderResponse)
def render_inference_prompt(request: RenderRequest) -> RenderResponse:
    profile = _profile(request.profile)
    try:
        rendered = render_prompt(
            _conversation(request.conversation),
            profile,
            think_prefix=request.think_prefix,
            response_prefix=request.response_prefix,
        )
    except TraceGaugeError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    return RenderResponse(**_rendered_payload(rendered))


@app.post("/v1/render/training", response_model=RenderResponse)
def render_training(request: RenderTrainingRequest) -> RenderResponse:
    profile = _profile(request.profile)
    try:
        rendered = render_training_example(
            _conversation(request.conversation),
            profile,
            MissingPolicy(request.missing_policy),
        )
    except TraceGaugeError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    return RenderResponse(**_rendered_payload(rendered))


@app.post("/v1/mask", response_model=MaskResponse)
def mask_conversations(request: MaskRequest) -> MaskResponse:
    profile = _profile(request.profile)
    mask = MaskFlag.NONE
    for flag in request.mask:
        mask |= MaskFlag.PROMPT if flag == "prompt" else MaskFlag.THINK
    if request.token_spans is not None and len(request.token_spans) != len(
        request.conversations
    ):
        raise HTTPException(
            status_code=422,
            detail="token_spans must align one-to-one with conversations",
        )
    results = []
    for i, conv in enumerate(request.conversations):
        try:
            example = build_masked_example(_conversation(conv), profile, mask)
            labels = None
            if request.token_spans is not None:
                align = TokenAlignment(
                    token_spans=tuple(
                        (int(s), int(e)) for s, e in request.token_spans[i]
                    )
                )
                labels = project_to_tokens(example, align)
        except TraceGaugeError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        results.append(masked_to_dict(example, labels))
    return MaskResponse(results=results)


@app.post("/v1/score", response_model=ScoreResponse)
def score_generations(request: ScoreRequest) -> ScoreResponse:
    profile = _profile(request.profile)
    results = []
    for record in request.records:
        parsed = parse_response(record.generation, profile)
        try:
            score = score_response(
                parsed, gold=record.gold, external_result=record.external_result
            )
        except TraceGaugeError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        doc = parsed_to_dict(parsed)
        doc.update(
            {
                "id": record.id,
                "answered": score.answered,
                "correct": score.correct,
                "extracted": score.extracted,
            }
        )
        results.append(doc)
    return ScoreResponse(results=results)


@app.post("/v1/stats")
def aggregate_stats(request: StatsRequest) -> dict:
    totals = TraceStats.zero()
    scores = []
    try:
        for record in request.records:
            status = TraceStatus(record["status"])
            answer = record.get("answer")
            answered = answer is not None and str(answer).strip() != ""
            totals = merge_stats(
                totals,
                TraceStats(
                    n=1,
                    valid=int(status is TraceStatus.VALID),
                    empty=int(status is TraceStatus.EMPTY),
                    missing=int(status is TraceStatus.MISSING),
                    truncated=int(status is TraceStatus.TRUNCATED),
                    answered=int(answered),
                ),
            )
            if request.eval:
                scores.append(
                    ResponseScore(
                        answered=bool(record.get("answered", answered)),
                        correct=bool(record["correct"]),
                        extracted=record.get("extracted"),
                        status=status,
                    )
                )
        if totals.n == 0:
            raise HTTPException(status_code=422, detail="no records")
        if request.eval:
            result = compute_eval(
                scores,
                min_valid=request.min_valid,
                level=request.level,
                resamples=request.resamples,
                seed=request.seed,
            )
            return eval_to_dict(result)
        return stats_to_dict(totals)
    except (KeyError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    except TraceGaugeError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None


@app.post("/v1/report")
def report(request: ReportRequest) -> dict:
    profile = _profile(request.profile)
    config = EvalConfig(
        min_valid=request.min_valid,
        level=request.level,
        resamples=request.resamples,
        seed=request.seed,
    )
    try:
        records = [run_record_from_dict(r.model_dump()) for r in request.records]
        series_list = run_report(records, profile, config, subset_n=request.subset_n)
        payload = {"series": [series_to_dict(s) for s in series_list]}
        if request.collapse:
            findings = []
            for series in series_list:
                if len(series.points) >= 2:
                    findings.extend(
                        detect_collapse(series, request.delta_vr, request.delta_rp)
                    )
            payload["collapse"] = [finding_to_dict(f) for f in findings]
        return payload
    except TraceGaugeError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None


@app.post("/v1/answers/check", response_model=CheckAnswersResponse)
def check_answers(request: CheckAnswersRequest) -> CheckAnswersResponse:
    results = [
        CheckedPair(
            pred=pair.pred,
            gold=pair.gold,
            equivalent=answers_equivalent(pair.pred, pair.gold),
            pred_canonical=normalize_answer(pair.pred),
            gold_canonical=normalize_answer(pair.gold),
        )
        for pair in request.pairs
    ]
    return CheckAnswersResponse(results=results)
