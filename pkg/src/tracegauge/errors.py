"""Exception types shared across the package.

Every domain error derives from TraceGaugeError so callers (CLI, service,
bindings) can map failures to exit codes / HTTP statuses in one place.
"""

from __future__ import annotations


class TraceGaugeError(Exception):
    """Base class for all domain errors."""


class UnknownProfileError(TraceGaugeError):
    def __init__(self, name: str):
        super().__init__(f"unknown builtin profile: {name!r}")
        self.name = name


class MalformedDocumentError(TraceGaugeError):
    """Profile or record document does not match the expected schema."""


class ProfileValidationError(TraceGaugeError):
    """A profile document parsed but breaks one or more invariants."""

    def __init__(self, violations):
        lines = "; ".join(f"{v.field_path}: {v.message}" for v in violations)
        super().__init__(f"invalid profile: {lines}")
        self.violations = list(violations)


class InvalidConversationError(TraceGaugeError):
    pass


class MissingTargetError(TraceGaugeError):
    """Training render requested but the conversation has no final assistant message."""


class SteeringUnsupportedError(TraceGaugeError):
    """The profile cannot express the requested think/response steering."""


class ScoringInputConflictError(TraceGaugeError):
    """score_response needs exactly one of gold / external_result."""


class EmptyInputError(TraceGaugeError):
    pass


class BadLevelError(TraceGaugeError):
    def __init__(self, level):
        super().__init__(f"confidence level must be in (0, 1), got {level!r}")
        self.level = level


class AlignmentMismatchError(TraceGaugeError):
    """Token spans do not tile the rendered text."""


class SubsetTooLargeError(TraceGaugeError):
    pass


class MixedStepsError(TraceGaugeError):
    pass


class DuplicateStepError(TraceGaugeError):
    pass


class SeriesTooShortError(TraceGaugeError):
    pass
