"""trace-gauge: structural reliability tooling for explicit-reasoning models.

Render chat prompts and training targets under declarative reasoning-format
profiles, parse generations into structurally classified traces, compute
reliability metrics with bootstrap confidence intervals, build loss-mask
annotations for fine-tuning data, and scan checkpoint series for
reasoning-trace collapse.
"""

from .answers import (
    ResponseScore,
    answers_equivalent,
    extract_boxed,
    last_numeric_token,
    normalize_answer,
    score_response,
)
from .errors import (
    AlignmentMismatchError,
    BadLevelError,
    DuplicateStepError,
    EmptyInputError,
    InvalidConversationError,
    MalformedDocumentError,
    MissingTargetError,
    MixedStepsError,
    ProfileValidationError,
    ScoringInputConflictError,
    SeriesTooShortError,
    SteeringUnsupportedError,
    SubsetTooLargeError,
    TraceGaugeError,
    UnknownProfileError,
)
from .masking import (
    MaskedExample,
    MaskFlag,
    TokenAlignment,
    apply_mask,
    build_masked_example,
    masked_char_ranges,
    parse_mask_flags,
    project_to_tokens,
    strategy_name,
)
from .metrics import (
    EvalResult,
    Interval,
    TraceStats,
    bootstrap_ci,
    compute_eval,
    compute_stats,
    merge_stats,
    round_pct,
)
from .parsing import (
    ParsedResponse,
    TraceStatus,
    extract_teacher_trace,
    parse_batch,
    parse_response,
)
from .profiles import (
    BUILTIN_PROFILE_NAMES,
    FormatProfile,
    MissingReasoningDefault,
    ProfileViolation,
    RoleMarkers,
    RolePair,
    builtin_profile,
    load_profile,
    serialize_profile,
    validate_profile,
)
from .render import (
    Conversation,
    Message,
    MissingPolicy,
    RenderedExample,
    Segment,
    SegmentKind,
    generation_slice,
    render_prompt,
    render_training_example,
)
from .report import (
    CheckpointSeries,
    CollapseFinding,
    CollapseKind,
    EvalConfig,
    RunRecord,
    SeriesPoint,
    build_series,
    detect_collapse,
    emit_report,
    evaluate_checkpoint,
    ingest_report,
    run_report,
    sample_subset,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentMismatchError",
    "BadLevelError",
    "BUILTIN_PROFILE_NAMES",
    "CheckpointSeries",
    "CollapseFinding",
    "CollapseKind",
    "Conversation",
    "DuplicateStepError",
    "EmptyInputError",
    "EvalConfig",
    "EvalResult",
    "FormatProfile",
    "Interval",
    "InvalidConversationError",
    "MalformedDocumentError",
    "MaskedExample",
    "MaskFlag",
    "Message",
    "MissingPolicy",
    "MissingReasoningDefault",
    "MissingTargetError",
    "MixedStepsError",
    "ParsedResponse",
    "ProfileValidationError",
    "ProfileViolation",
    "RenderedExample",
    "ResponseScore",
    "RoleMarkers",
    "RolePair",
    "RunRecord",
    "ScoringInputConflictError",
    "Segment",
    "SegmentKind",
    "SeriesPoint",
    "SeriesTooShortError",
    "SteeringUnsupportedError",
    "SubsetTooLargeError",
    "TokenAlignment",
    "TraceGaugeError",
    "TraceStats",
    "TraceStatus",
    "UnknownProfileError",
    "answers_equivalent",
    "apply_mask",
    "bootstrap_ci",
    "build_masked_example",
    "build_series",
    "builtin_profile",
    "compute_eval",
    "compute_stats",
    "detect_collapse",
    "emit_report",
    "evaluate_checkpoint",
    "extract_boxed",
    "extract_teacher_trace",
    "generation_slice",
    "ingest_report",
    "last_numeric_token",
    "load_profile",
    "masked_char_ranges",
    "merge_stats",
    "normalize_answer",
    "parse_batch",
    "parse_mask_flags",
    "parse_response",
    "project_to_tokens",
    "render_prompt",
    "render_training_example",
    "round_pct",
    "run_report",
    "sample_subset",
    "score_response",
    "serialize_profile",
    "strategy_name",
    "validate_profile",
]
