"""Conversation rendering under a FormatProfile.

Two render modes share one segment vocabulary:

* render_prompt produces inference-time prompt text, ending with the
  profile's generation suffix (optionally steered into or past the think
  block). Reasoning history is embedded compactly between the delimiters.
* render_training_example produces a fully segmented training target where
  every byte is classified (Prompt / TemplateGlue / Think* / Response), so
  mask construction can operate on segments alone. The think block uses a
  line layout: one newline after the open tag and before the close tag when
  the body is non-empty, and a byte-empty body when it is empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import (
    InvalidConversationError,
    MissingTargetError,
    SteeringUnsupportedError,
)
from .profiles import FormatProfile, MissingReasoningDefault

ROLES = ("user", "assistant", "system")


class SegmentKind(str, Enum):
    PROMPT = "prompt"
    TEMPLATE_GLUE = "template_glue"
    THINK_OPEN = "think_open"
    THINK_BODY = "think_body"
    THINK_CLOSE = "think_close"
    RESPONSE = "response"


class MissingPolicy(str, Enum):
    """How to represent an absent reasoning field in a training target."""

    EMPTY_THINK = "empty-think"
    NO_THINK = "no-think"
    PROFILE_DEFAULT = "profile-default"


@dataclass(frozen=True)
class Message:
    role: str
    content: str
    reasoning: str | None = None


@dataclass(frozen=True)
class Conversation:
    messages: tuple[Message, ...]

    @classmethod
    def from_dicts(cls, messages: list[dict]) -> "Conversation":
        out = []
        for msg in messages:
            if not isinstance(msg, dict) or "role" not in msg or "content" not in msg:
                raise InvalidConversationError(
                    "each message needs at least role and content"
                )
            out.append(
                Message(
                    role=msg["role"],
                    content=msg["content"],
                    reasoning=msg.get("reasoning"),
                )
            )
        return cls(messages=tuple(out))


@dataclass(frozen=True)
class Segment:
    kind: SegmentKind
    text: str
    masked: bool = False


@dataclass(frozen=True)
class RenderedExample:
    text: str
    segments: tuple[Segment, ...]


def _check_conversation(conv: Conversation) -> None:
    if not conv.messages:
        raise InvalidConversationError("conversation is empty")
    for i, msg in enumerate(conv.messages):
        if msg.role not in ROLES:
            raise InvalidConversationError(f"message {i}: unknown role {msg.role!r}")
        if not isinstance(msg.content, str):
            raise InvalidConversationError(f"message {i}: content must be text")
        if msg.reasoning is not None and msg.role != "assistant":
            raise InvalidConversationError(
                f"message {i}: reasoning is only allowed on assistant messages"
            )


def _history_turn(msg: Message, profile: FormatProfile) -> str:
    """Render one already-completed turn, compact style."""
    pair = profile.role_markers.for_role(msg.role)
    if msg.role != "assistant":
        return pair.open + msg.content + pair.close
    if msg.reasoning is not None:
        think = profile.think_open + msg.reasoning + profile.think_close
    elif profile.missing_reasoning_default is MissingReasoningDefault.EMPTY_THINK:
        think = profile.think_open + profile.think_close
    else:
        think = ""
    return pair.open + think + msg.content + pair.close


def _finish(segments: list[Segment]) -> RenderedExample:
    kept = tuple(s for s in segments if s.text)
    return RenderedExample(text="".join(s.text for s in kept), segments=kept)


def _suffix_tail_after_open(profile: FormatProfile) -> str:
    idx = profile.generation_suffix.find(profile.think_open)
    return profile.generation_suffix[idx + len(profile.think_open):]


def render_prompt(
    conv: Conversation,
    profile: FormatProfile,
    think_prefix: str | None = None,
    response_prefix: str | None = None,
) -> RenderedExample:
    """Render an inference prompt, optionally steering the generation.

    With no steering the output ends with the profile's generation suffix.
    think_prefix leaves the output inside an open think block whose body
    starts with the prefix; response_prefix closes a (possibly empty) think
    block and seeds the final response.
    """
    _check_conversation(conv)
    if conv.messages[-1].role == "assistant":
        raise InvalidConversationError(
            "an inference prompt must end on a user or system message"
        )

    segments = [
        Segment(SegmentKind.PROMPT, _history_turn(m, profile)) for m in conv.messages
    ]
    segments.append(Segment(SegmentKind.TEMPLATE_GLUE, profile.generation_suffix))

    steer_think = think_prefix is not None
    steer_response = response_prefix is not None
    if steer_think or steer_response:
        if profile.implicit_open:
            # The suffix already opened the block; anything non-whitespace
            # after the open tag would sit between the tag and the steering
            # text, so the body could not start with the prefix.
            if _suffix_tail_after_open(profile).strip():
                raise SteeringUnsupportedError(
                    f"profile {profile.name!r} emits extra text after its "
                    "implicit think open; steering cannot be expressed"
                )
        else:
            segments.append(Segment(SegmentKind.THINK_OPEN, profile.think_open))
        if steer_think:
            segments.append(Segment(SegmentKind.THINK_BODY, think_prefix))
        if steer_response:
            segments.append(Segment(SegmentKind.THINK_CLOSE, profile.think_close))
            segments.append(Segment(SegmentKind.RESPONSE, response_prefix))

    return _finish(segments)


def render_training_example(
    conv: Conversation,
    profile: FormatProfile,
    missing_policy: MissingPolicy = MissingPolicy.PROFILE_DEFAULT,
) -> RenderedExample:
    """Render a conversation as a segmented training target.

    The final message must be an assistant turn; it becomes the supervised
    region. All earlier turns are classified Prompt, the assistant markers
    TemplateGlue, and the think block (when present) ThinkOpen / ThinkBody /
    ThinkClose. An assistant message whose reasoning is None falls back to
    missing_policy; an explicit empty-string reasoning always renders an
    empty block.
    """
    _check_conversation(conv)
    target = conv.messages[-1]
    if target.role != "assistant":
        raise MissingTargetError("the final message must be an assistant turn")

    policy = missing_policy
    if policy is MissingPolicy.PROFILE_DEFAULT:
        policy = MissingPolicy(profile.missing_reasoning_default.value)

    segments = [
        Segment(SegmentKind.PROMPT, _history_turn(m, profile))
        for m in conv.messages[:-1]
    ]
    pair = profile.role_markers.assistant
    segments.append(Segment(SegmentKind.TEMPLATE_GLUE, pair.open))

    reasoning = target.reasoning
    if reasoning:
        segments.append(Segment(SegmentKind.THINK_OPEN, profile.think_open + "\n"))
        segments.append(Segment(SegmentKind.THINK_BODY, reasoning))
        segments.append(
            Segment(SegmentKind.THINK_CLOSE, "\n" + profile.think_close + "\n")
        )
    elif reasoning == "" or policy is MissingPolicy.EMPTY_THINK:
        segments.append(Segment(SegmentKind.THINK_OPEN, profile.think_open))
        segments.append(Segment(SegmentKind.THINK_CLOSE, profile.think_close + "\n"))

    segments.append(Segment(SegmentKind.RESPONSE, target.content))
    segments.append(Segment(SegmentKind.TEMPLATE_GLUE, pair.close))
    return _finish(segments)


def generation_slice(rendered: RenderedExample, profile: FormatProfile) -> str:
    """Return the model-generated portion of a rendered training example.

    This is the text a model would actually emit: everything after the
    prompt plus generation suffix, up to (not including) the closing
    assistant marker. For implicit-open profiles the suffix consumes the
    opening think tag, mirroring what the template supplies at inference.
    """
    prompt_len = 0
    for seg in rendered.segments:
        if seg.kind is not SegmentKind.PROMPT:
            break
        prompt_len += len(seg.text)
    rest = rendered.text[prompt_len:]
    if rest.startswith(profile.generation_suffix):
        body = rest[len(profile.generation_suffix):]
    else:
        # A no-think target under an implicit-open profile never renders the
        # template-supplied open tag; only the assistant marker precedes it.
        open_marker = profile.role_markers.assistant.open
        body = rest[len(open_marker):] if rest.startswith(open_marker) else rest
    close = profile.role_markers.assistant.close
    if body.endswith(close):
        body = body[: len(body) - len(close)]
    return body
