import random

import pytest

import tracegauge as tg
from tracegauge.render import SegmentKind

from conftest import random_conversation

THINK_KINDS = {SegmentKind.THINK_OPEN, SegmentKind.THINK_BODY, SegmentKind.THINK_CLOSE}


def simple_conv(reasoning=None, content="{response}"):
    return tg.Conversation(messages=(
        tg.Message("user", "{instruction}"),
        tg.Message("assistant", content, reasoning=reasoning),
    ))


def test_prompt_ends_with_suffix(in_text):
    conv = tg.Conversation(messages=(tg.Message("user", "hello"),))
    rendered = tg.render_prompt(conv, in_text)
    assert rendered.text.endswith(in_text.generation_suffix)
    assert "".join(s.text for s in rendered.segments) == rendered.text


def test_prompt_embeds_reasoning_history(in_text):
    conv = tg.Conversation(messages=(
        tg.Message("user", "What is 2 + 2?"),
        tg.Message("assistant", "4", reasoning="2 + 2 = 4"),
        tg.Message("user", "And 3 + 3?"),
    ))
    rendered = tg.render_prompt(conv, in_text)
    assert "<think>2 + 2 = 4</think>4" in rendered.text


def test_prompt_think_prefix(in_text):
    conv = tg.Conversation(messages=(tg.Message("user", "Q"),))
    rendered = tg.render_prompt(
        conv, in_text, think_prefix="Let me break this down step by step."
    )
    assert rendered.text.endswith("<think>Let me break this down step by step.")


def test_prompt_think_prefix_prefixed_profile(prefixed):
    conv = tg.Conversation(messages=(tg.Message("user", "Q"),))
    rendered = tg.render_prompt(conv, prefixed, think_prefix="Okay, ")
    assert rendered.text.endswith(prefixed.generation_suffix + "Okay, ")


def test_prompt_response_prefix(in_text):
    conv = tg.Conversation(messages=(tg.Message("user", "Q"),))
    rendered = tg.render_prompt(conv, in_text, response_prefix="The answer is")
    assert rendered.text.endswith("<think></think>The answer is")
    parsed = tg.parse_response(
        rendered.text.split(in_text.generation_suffix)[-1] + " 4", in_text
    )
    assert parsed.status is tg.TraceStatus.EMPTY


def test_prompt_both_prefixes(in_text):
    conv = tg.Conversation(messages=(tg.Message("user", "Q"),))
    rendered = tg.render_prompt(
        conv, in_text, think_prefix="plan", response_prefix="so:"
    )
    assert rendered.text.endswith("<think>plan</think>so:")


def test_prompt_rejects_trailing_assistant(in_text):
    conv = simple_conv()
    with pytest.raises(tg.InvalidConversationError):
        tg.render_prompt(conv, in_text)


def test_steering_unsupported(prefixed):
    awkward = tg.FormatProfile(
        name="awkward",
        think_open=prefixed.think_open,
        think_close=prefixed.think_close,
        implicit_open=True,
        role_markers=prefixed.role_markers,
        generation_suffix="<assistant>\n<think>preamble:",
        missing_reasoning_default=prefixed.missing_reasoning_default,
    )
    conv = tg.Conversation(messages=(tg.Message("user", "Q"),))
    with pytest.raises(tg.SteeringUnsupportedError):
        tg.render_prompt(conv, awkward, think_prefix="x")


def test_training_segments_empty_think(in_text):
    rendered = tg.render_training_example(
        simple_conv(), in_text, tg.MissingPolicy.EMPTY_THINK
    )
    kinds = [s.kind for s in rendered.segments]
    assert kinds == [
        SegmentKind.PROMPT,
        SegmentKind.TEMPLATE_GLUE,
        SegmentKind.THINK_OPEN,
        SegmentKind.THINK_CLOSE,
        SegmentKind.RESPONSE,
        SegmentKind.TEMPLATE_GLUE,
    ]


def test_training_segments_no_think(in_text):
    rendered = tg.render_training_example(
        simple_conv(), in_text, tg.MissingPolicy.NO_THINK
    )
    assert not [s for s in rendered.segments if s.kind in THINK_KINDS]


def test_training_direct_mapping(in_text):
    rendered = tg.render_training_example(simple_conv(reasoning="r"), in_text)
    by_kind = {s.kind: s.text for s in rendered.segments}
    assert by_kind[SegmentKind.THINK_BODY] == "r"
    assert by_kind[SegmentKind.RESPONSE] == "{response}"


def test_policy_difference_is_think_delimiters(in_text):
    conv = simple_conv()
    with_block = tg.render_training_example(conv, in_text, tg.MissingPolicy.EMPTY_THINK)
    without = tg.render_training_example(conv, in_text, tg.MissingPolicy.NO_THINK)
    think_text = "".join(
        s.text for s in with_block.segments if s.kind in THINK_KINDS
    )
    assert with_block.text.replace(think_text, "", 1) == without.text


def test_profile_default_policy(in_text, field_profile):
    conv = simple_conv()
    assert not [
        s for s in tg.render_training_example(conv, in_text).segments
        if s.kind in THINK_KINDS
    ]
    assert [
        s for s in tg.render_training_example(conv, field_profile).segments
        if s.kind in THINK_KINDS
    ]


def test_training_missing_target(in_text):
    conv = tg.Conversation(messages=(tg.Message("user", "Q"),))
    with pytest.raises(tg.MissingTargetError):
        tg.render_training_example(conv, in_text)


def test_empty_conversation_invalid(in_text):
    with pytest.raises(tg.InvalidConversationError):
        tg.render_prompt(tg.Conversation(messages=()), in_text)


def test_reasoning_on_user_invalid(in_text):
    conv = tg.Conversation(messages=(
        tg.Message("user", "Q", reasoning="sneaky"),
        tg.Message("assistant", "A"),
    ))
    with pytest.raises(tg.InvalidConversationError):
        tg.render_training_example(conv, in_text)


def test_losslessness_over_random_conversations():
    rng = random.Random(101)
    for name in tg.BUILTIN_PROFILE_NAMES:
        profile = tg.builtin_profile(name)
        for policy in tg.MissingPolicy:
            for _ in range(50):
                conv = random_conversation(rng, profile, with_reasoning=rng.random() < 0.5)
                rendered = tg.render_training_example(conv, profile, policy)
                assert "".join(s.text for s in rendered.segments) == rendered.text


def test_round_trip_small():
    rng = random.Random(202)
    for name in ("in-text-think", "prefixed-think"):
        profile = tg.builtin_profile(name)
        for _ in range(100):
            conv = random_conversation(rng, profile, with_reasoning=True)
            target = conv.messages[-1]
            rendered = tg.render_training_example(conv, profile)
            parsed = tg.parse_response(tg.generation_slice(rendered, profile), profile)
            assert parsed.status is tg.TraceStatus.VALID
            assert parsed.reasoning == target.reasoning
            assert parsed.answer == target.content
