import random

from hypothesis import given, settings
from hypothesis import strategies as st

import tracegauge as tg

from conftest import random_conversation


def test_spec_examples(in_text, prefixed):
    parsed = tg.parse_response("<think>2 + 2 = 4</think>4", in_text)
    assert (parsed.status, parsed.reasoning, parsed.answer) == (
        tg.TraceStatus.VALID, "2 + 2 = 4", "4",
    )

    parsed = tg.parse_response("<think></think>The answer is 4", in_text)
    assert parsed.status is tg.TraceStatus.EMPTY
    assert parsed.answer == "The answer is 4"

    parsed = tg.parse_response("The answer is 4", in_text)
    assert parsed.status is tg.TraceStatus.MISSING
    assert parsed.answer == "The answer is 4"

    parsed = tg.parse_response("<think>Let me consider", in_text)
    assert parsed.status is tg.TraceStatus.TRUNCATED
    assert parsed.answer is None

    parsed = tg.parse_response("steps here</think>42", prefixed)
    assert (parsed.status, parsed.reasoning, parsed.answer) == (
        tg.TraceStatus.VALID, "steps here", "42",
    )


def test_fixture_agreement(parser_cases):
    for case in parser_cases:
        profile = tg.builtin_profile(case["profile"])
        parsed = tg.parse_response(case["text"], profile)
        assert parsed.status.value == case["status"], case["id"]
        assert parsed.reasoning == case["reasoning"], case["id"]
        assert parsed.answer == case["answer"], case["id"]
        assert parsed.raw_length == len(case["text"]), case["id"]


def test_status_flags(in_text):
    parsed = tg.parse_response("<think>r</think>a", in_text)
    assert parsed.has_valid_reasoning
    assert not parsed.has_empty_reasoning
    assert not parsed.has_missing_reasoning
    assert not parsed.has_truncated_reasoning


@settings(max_examples=300, deadline=None)
@given(st.text(), st.sampled_from(list(tg.BUILTIN_PROFILE_NAMES)))
def test_totality_and_coupling(text, profile_name):
    profile = tg.builtin_profile(profile_name)
    parsed = tg.parse_response(text, profile)
    assert parsed.raw_length == len(text)
    if parsed.status is tg.TraceStatus.VALID:
        assert parsed.reasoning and parsed.reasoning.strip() == parsed.reasoning
        assert parsed.answer is not None
    elif parsed.status is tg.TraceStatus.EMPTY:
        assert not parsed.reasoning
        assert parsed.answer is not None
    elif parsed.status is tg.TraceStatus.MISSING:
        assert parsed.reasoning is None
        assert parsed.answer == text
    else:
        assert parsed.answer is None
    # Determinism.
    assert tg.parse_response(text, profile) == parsed


def test_monotone_truncation(in_text, prefixed):
    rng = random.Random(33)
    for profile in (in_text, prefixed):
        for _ in range(50):
            conv = random_conversation(rng, profile, with_reasoning=True)
            rendered = tg.render_training_example(conv, profile)
            full = tg.generation_slice(rendered, profile)
            assert tg.parse_response(full, profile).status is tg.TraceStatus.VALID
            body_end = full.index(profile.think_close)
            body_start = (
                full.index(profile.think_open) + len(profile.think_open)
                if not profile.implicit_open
                else 0
            )
            if body_end <= body_start + 1:
                continue
            cut = rng.randrange(body_start + 1, body_end)
            parsed = tg.parse_response(full[:cut], profile)
            assert parsed.status is tg.TraceStatus.TRUNCATED


def test_parse_batch(in_text):
    assert tg.parse_batch([], in_text) == []
    single = tg.parse_batch(["<think>r</think>a"], in_text)
    assert single == [tg.parse_response("<think>r</think>a", in_text)]

    rng = random.Random(44)
    texts = []
    for _ in range(1000):
        roll = rng.random()
        if roll < 0.25:
            texts.append(f"<think>{rng.random()}</think>{rng.random()}")
        elif roll < 0.5:
            texts.append("<think></think>x")
        elif roll < 0.75:
            texts.append(f"answer {rng.random()}")
        else:
            texts.append("<think>never closes")
    batch = tg.parse_batch(texts, in_text)
    element_wise = [tg.parse_response(t, in_text) for t in texts]
    assert batch == element_wise


def test_stray_close_tolerated():
    base = tg.builtin_profile("in-text-think")
    tolerant = tg.FormatProfile(
        name="tolerant",
        think_open=base.think_open,
        think_close=base.think_close,
        implicit_open=False,
        role_markers=base.role_markers,
        generation_suffix=base.generation_suffix,
        missing_reasoning_default=base.missing_reasoning_default,
        tolerate_unopened_close=True,
    )
    parsed = tg.parse_response("off-template reasoning</think>42", tolerant)
    assert parsed.status is tg.TraceStatus.VALID
    assert parsed.reasoning == "off-template reasoning"
    assert parsed.answer == "42"
    # Without a close tag there is still nothing to anchor on.
    parsed = tg.parse_response("no tags at all", tolerant)
    assert parsed.status is tg.TraceStatus.MISSING


def test_extract_teacher_trace():
    text = "<reasoning_steps>\nOkay, balance the equation first.\n</reasoning_steps>"
    assert tg.extract_teacher_trace(text) == "Okay, balance the equation first."
    assert tg.extract_teacher_trace("no tags, just an answer") is None
    assert (
        tg.extract_teacher_trace("<reasoning_steps>First, ...</reasoning_steps>")
        is None
    )
    assert tg.extract_teacher_trace("<reasoning_steps>Okay, unterminated") is None
    two = (
        "<reasoning_steps>Okay, use the first block.</reasoning_steps>"
        "<reasoning_steps>Okay, not this one.</reasoning_steps>"
    )
    assert tg.extract_teacher_trace(two) == "Okay, use the first block."
