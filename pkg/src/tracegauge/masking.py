"""Loss-mask construction over rendered training examples.

Masking operates on segments in character space: THINK masks the think
block (open tag, body, close tag), PROMPT masks everything before the
assistant turn plus the opening assistant marker. Response text and the
closing assistant marker are never masked, so the final answer always
stays supervised. Projection onto caller-supplied token spans is a
separate step that widens conservatively: a token straddling a masked
boundary is masked.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Flag, auto
from typing import Sequence

from .errors import AlignmentMismatchError
from .profiles import FormatProfile
from .render import (
    Conversation,
    MissingPolicy,
    RenderedExample,
    Segment,
    SegmentKind,
    render_training_example,
)


class MaskFlag(Flag):
    NONE = 0
    PROMPT = auto()
    THINK = auto()


_STRATEGY_NAMES = {
    MaskFlag.NONE: "unmasked",
    MaskFlag.THINK: "masked-think",
    MaskFlag.PROMPT: "masked-prompt",
    MaskFlag.PROMPT | MaskFlag.THINK: "response-only",
}

_THINK_KINDS = frozenset(
    {SegmentKind.THINK_OPEN, SegmentKind.THINK_BODY, SegmentKind.THINK_CLOSE}
)


@dataclass(frozen=True)
class MaskedExample:
    segments: tuple[Segment, ...]
    strategy_name: str

    @property
    def text(self) -> str:
        return "".join(s.text for s in self.segments)


@dataclass(frozen=True)
class TokenAlignment:
    token_spans: tuple[tuple[int, int], ...]


def strategy_name(mask: MaskFlag) -> str:
    return _STRATEGY_NAMES[mask]


def parse_mask_flags(spec: str) -> MaskFlag:
    """Parse a comma-joined flag set, e.g. "prompt,think". "" means no mask."""
    mask = MaskFlag.NONE
    for token in spec.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token == "prompt":
            mask |= MaskFlag.PROMPT
        elif token == "think":
            mask |= MaskFlag.THINK
        else:
            raise ValueError(f"unknown mask flag {token!r}")
    return mask


def apply_mask(rendered: RenderedExample, mask: MaskFlag) -> tuple[Segment, ...]:
    """Set masked bits on a rendered example's segments."""
    out: list[Segment] = []
    seen_response = False
    for seg in rendered.segments:
        if seg.kind is SegmentKind.RESPONSE:
            seen_response = True
        masked = False
        if MaskFlag.THINK in mask and seg.kind in _THINK_KINDS:
            masked = True
        if MaskFlag.PROMPT in mask:
            if seg.kind is SegmentKind.PROMPT:
                masked = True
            # Opening assistant glue belongs to the prompt region; the
            # closing marker after the response stays supervised.
            elif seg.kind is SegmentKind.TEMPLATE_GLUE and not seen_response:
                masked = True
        out.append(replace(seg, masked=masked) if masked != seg.masked else seg)
    return tuple(out)


def build_masked_example(
    conv: Conversation,
    profile: FormatProfile,
    mask: MaskFlag,
) -> MaskedExample:
    """Render a conversation as a training example and set its loss mask.

    When THINK is masked, missing reasoning is rendered as an empty think
    block so the masked region exists (the masked-think strategy trains on
    data formatted with empty think tags).
    """
    policy = (
        MissingPolicy.EMPTY_THINK
        if MaskFlag.THINK in mask
        else MissingPolicy.PROFILE_DEFAULT
    )
    rendered = render_training_example(conv, profile, policy)
    return MaskedExample(
        segments=apply_mask(rendered, mask),
        strategy_name=strategy_name(mask),
    )


def masked_char_ranges(example: MaskedExample) -> list[tuple[int, int]]:
    """Half-open character ranges of the masked region, in order."""
    ranges: list[tuple[int, int]] = []
    pos = 0
    for seg in example.segments:
        end = pos + len(seg.text)
        if seg.masked and seg.text:
            if ranges and ranges[-1][1] == pos:
                ranges[-1] = (ranges[-1][0], end)
            else:
                ranges.append((pos, end))
        pos = end
    return ranges


def _check_alignment(align: TokenAlignment, text_length: int) -> None:
    expected = 0
    for i, (start, end) in enumerate(align.token_spans):
        if start != expected or end < start:
            raise AlignmentMismatchError(
                f"token span {i} is ({start}, {end}); expected to start at "
                f"{expected} with end >= start"
            )
        expected = end
    if expected != text_length:
        raise AlignmentMismatchError(
            f"token spans cover [0, {expected}) but the text has "
            f"{text_length} characters"
        )


def project_to_tokens(
    example: MaskedExample, align: TokenAlignment
) -> list[bool]:
    """Project the character mask onto token spans.

    Returns one flag per token, True meaning masked (excluded from the
    loss). A token is masked iff any character of its span is masked.
    """
    text_length = sum(len(s.text) for s in example.segments)
    _check_alignment(align, text_length)

    ranges = masked_char_ranges(example)
    labels: list[bool] = []
    r = 0
    for start, end in align.token_spans:
        while r < len(ranges) and ranges[r][1] <= start:
            r += 1
        overlaps = (
            start < end
            and r < len(ranges)
            and ranges[r][0] < end
            and start < ranges[r][1]
        )
        labels.append(overlaps)
    return labels


def masked_to_dict(
    example: MaskedExample, token_labels: Sequence[bool] | None = None
) -> dict:
    segments = []
    pos = 0
    for seg in example.segments:
        end = pos + len(seg.text)
        segments.append(
            {"kind": seg.kind.value, "start": pos, "end": end, "masked": seg.masked}
        )
        pos = end
    out = {
        "text": example.text,
        "segments": segments,
        "strategy": example.strategy_name,
    }
    if token_labels is not None:
        out["token_labels"] = [1 if m else 0 for m in token_labels]
    return out
