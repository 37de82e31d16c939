"""Reasoning-format profiles.

A FormatProfile is a declarative description of one reasoning-format
convention: the think delimiters, the per-role chat markers, the text that
signals the start of an assistant turn, and how missing reasoning is
represented in training data. Everything downstream (rendering, parsing,
masking) is driven by a profile, never by model-specific code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .errors import MalformedDocumentError, ProfileValidationError, UnknownProfileError


class MissingReasoningDefault(str, Enum):
    """How a profile represents an assistant turn that has no reasoning."""

    EMPTY_THINK = "empty-think"
    NO_THINK = "no-think"


@dataclass(frozen=True)
class RolePair:
    open: str
    close: str


@dataclass(frozen=True)
class RoleMarkers:
    user: RolePair
    assistant: RolePair
    system: RolePair

    def for_role(self, role: str) -> RolePair:
        return getattr(self, role)


@dataclass(frozen=True)
class ProfileViolation:
    field_path: str
    message: str


@dataclass(frozen=True)
class FormatProfile:
    name: str
    think_open: str
    think_close: str
    # True when the chat template itself emits the opening think tag, so
    # every generation starts inside a reasoning block.
    implicit_open: bool
    role_markers: RoleMarkers
    generation_suffix: str
    missing_reasoning_default: MissingReasoningDefault
    tolerate_unopened_close: bool = False


_MARKERS = RoleMarkers(
    user=RolePair("<user>\n", "\n</user>\n"),
    assistant=RolePair("<assistant>\n", "\n</assistant>\n"),
    system=RolePair("<system>\n", "\n</system>\n"),
)

_BUILTINS = {
    "in-text-think": FormatProfile(
        name="in-text-think",
        think_open="<think>",
        think_close="</think>",
        implicit_open=False,
        role_markers=_MARKERS,
        generation_suffix="<assistant>\n",
        missing_reasoning_default=MissingReasoningDefault.NO_THINK,
    ),
    "prefixed-think": FormatProfile(
        name="prefixed-think",
        think_open="<think>",
        think_close="</think>",
        implicit_open=True,
        role_markers=_MARKERS,
        generation_suffix="<assistant>\n<think>",
        missing_reasoning_default=MissingReasoningDefault.NO_THINK,
    ),
    "field-think-empty-default": FormatProfile(
        name="field-think-empty-default",
        think_open="<think>",
        think_close="</think>",
        implicit_open=False,
        role_markers=_MARKERS,
        generation_suffix="<assistant>\n",
        missing_reasoning_default=MissingReasoningDefault.EMPTY_THINK,
    ),
}

BUILTIN_PROFILE_NAMES = tuple(_BUILTINS)


def builtin_profile(name: str) -> FormatProfile:
    """Return one of the built-in profiles by name.

    Raises UnknownProfileError for anything not in BUILTIN_PROFILE_NAMES.
    """
    try:
        return _BUILTINS[name]
    except KeyError:
        raise UnknownProfileError(name) from None


def validate_profile(profile: FormatProfile) -> list[ProfileViolation]:
    """Check every profile invariant; return one violation per breach.

    Pure: the list is stable-ordered by field_path.
    """
    violations: list[ProfileViolation] = []

    if not profile.think_open:
        violations.append(ProfileViolation("think_open", "must be non-empty"))
    if not profile.think_close:
        violations.append(ProfileViolation("think_close", "must be non-empty"))
    if profile.think_open and profile.think_open == profile.think_close:
        violations.append(
            ProfileViolation("think_close", "must differ from think_open")
        )

    if profile.implicit_open:
        count = profile.generation_suffix.count(profile.think_open) if profile.think_open else 0
        if count != 1:
            violations.append(
                ProfileViolation(
                    "generation_suffix",
                    "implicit_open profiles must contain think_open exactly once "
                    f"(found {count})",
                )
            )

    seen: dict[str, str] = {}
    for role in ("user", "assistant", "system"):
        pair = profile.role_markers.for_role(role)
        for side in ("open", "close"):
            path = f"role_markers.{role}.{side}"
            marker = getattr(pair, side)
            if not marker:
                violations.append(ProfileViolation(path, "must be non-empty"))
                continue
            if marker in seen:
                violations.append(
                    ProfileViolation(path, f"duplicates {seen[marker]}")
                )
            else:
                seen[marker] = path

    violations.sort(key=lambda v: (v.field_path, v.message))
    return violations


_ROLE_KEYS = ("user", "assistant", "system")
_DOC_KEYS = {
    "name",
    "think_open",
    "think_close",
    "implicit_open",
    "role_markers",
    "generation_suffix",
    "missing_reasoning_default",
    "tolerate_unopened_close",
}


def profile_to_dict(profile: FormatProfile) -> dict:
    return {
        "name": profile.name,
        "think_open": profile.think_open,
        "think_close": profile.think_close,
        "implicit_open": profile.implicit_open,
        "role_markers": {
            role: {
                "open": profile.role_markers.for_role(role).open,
                "close": profile.role_markers.for_role(role).close,
            }
            for role in _ROLE_KEYS
        },
        "generation_suffix": profile.generation_suffix,
        "missing_reasoning_default": profile.missing_reasoning_default.value,
        "tolerate_unopened_close": profile.tolerate_unopened_close,
    }


def serialize_profile(profile: FormatProfile) -> str:
    return json.dumps(profile_to_dict(profile), ensure_ascii=False, indent=2)


def _require(obj: dict, key: str, kind: type, where: str = ""):
    path = f"{where}{key}"
    if key not in obj:
        raise MalformedDocumentError(f"missing key: {path}")
    value = obj[key]
    if kind is bool:
        if not isinstance(value, bool):
            raise MalformedDocumentError(f"{path} must be a boolean")
    elif not isinstance(value, kind) or isinstance(value, bool):
        raise MalformedDocumentError(f"{path} must be {kind.__name__}")
    return value


def profile_from_dict(doc: dict) -> FormatProfile:
    """Build and validate a profile from a parsed document."""
    if not isinstance(doc, dict):
        raise MalformedDocumentError("profile document must be a JSON object")
    unknown = set(doc) - _DOC_KEYS
    if unknown:
        raise MalformedDocumentError(f"unknown keys: {sorted(unknown)}")
    missing = _DOC_KEYS - set(doc)
    if missing:
        raise MalformedDocumentError(f"missing keys: {sorted(missing)}")

    markers_doc = _require(doc, "role_markers", dict)
    unknown_roles = set(markers_doc) - set(_ROLE_KEYS)
    if unknown_roles:
        raise MalformedDocumentError(f"unknown roles: {sorted(unknown_roles)}")
    pairs = {}
    for role in _ROLE_KEYS:
        if role not in markers_doc:
            raise MalformedDocumentError(f"missing key: role_markers.{role}")
        pair_doc = markers_doc[role]
        if not isinstance(pair_doc, dict) or set(pair_doc) != {"open", "close"}:
            raise MalformedDocumentError(
                f"role_markers.{role} must be an object with open/close"
            )
        pairs[role] = RolePair(
            open=_require(pair_doc, "open", str, f"role_markers.{role}."),
            close=_require(pair_doc, "close", str, f"role_markers.{role}."),
        )

    default_raw = _require(doc, "missing_reasoning_default", str)
    try:
        default = MissingReasoningDefault(default_raw)
    except ValueError:
        raise MalformedDocumentError(
            f"missing_reasoning_default must be one of "
            f"{[m.value for m in MissingReasoningDefault]}"
        ) from None

    profile = FormatProfile(
        name=_require(doc, "name", str),
        think_open=_require(doc, "think_open", str),
        think_close=_require(doc, "think_close", str),
        implicit_open=_require(doc, "implicit_open", bool),
        role_markers=RoleMarkers(**pairs),
        generation_suffix=_require(doc, "generation_suffix", str),
        missing_reasoning_default=default,
        tolerate_unopened_close=_require(doc, "tolerate_unopened_close", bool),
    )
    violations = validate_profile(profile)
    if violations:
        raise ProfileValidationError(violations)
    return profile


def load_profile(doc: str) -> FormatProfile:
    """Parse a UTF-8 JSON profile document into a validated FormatProfile.

    Raises MalformedDocumentError on schema breaches (bad JSON, missing or
    unknown keys, wrong types) and ProfileValidationError when the document
    parses but breaks a profile invariant.
    """
    try:
        parsed = json.loads(doc)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"not valid JSON: {exc}") from None
    return profile_from_dict(parsed)
