"""Final-answer extraction and permissive equivalence checking.

The checker recognises answers across common equivalent surface forms:
boxed LaTeX, dollar-wrapped math, thousands separators, trailing
punctuation / percent signs, simple \\frac fractions, decimals vs.
fractions, and single-letter choice labels. Numeric comparison is exact
rational arithmetic, never floating tolerance.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .errors import ScoringInputConflictError
from .parsing import ParsedResponse, TraceStatus

_BOXED_RE = re.compile(r"\\boxed\s*\{")
_FRAC_RE = re.compile(r"([+-]?)\\frac\{(-?\d+)\}\{(-?\d+)\}")
_THOUSANDS_RE = re.compile(r"[+-]?\d{1,3}(?:,\d{3})+(?:\.\d+)?")
_RATIONAL_RE = re.compile(r"[+-]?(?:\d+\.?\d*|\.\d+)")
_FRACTION_RE = re.compile(r"([+-]?\d+)\s*/\s*([+-]?\d+)")
_NUMERIC_TOKEN_RE = re.compile(r"[-+]?(?:\d[\d,]*(?:\.\d+)?|\.\d+)")


@dataclass(frozen=True)
class ResponseScore:
    answered: bool
    correct: bool
    extracted: str | None
    status: TraceStatus


def extract_boxed(answer_text: str) -> str | None:
    """Return the content of the last \\boxed{...}, balancing braces.

    None when no \\boxed occurs or the last occurrence never balances.
    """
    matches = list(_BOXED_RE.finditer(answer_text))
    if not matches:
        return None
    start = matches[-1].end()
    depth = 1
    for i in range(start, len(answer_text)):
        ch = answer_text[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return answer_text[start:i].strip()
    return None


def _strip_decorations(s: str) -> str:
    s = s.strip()
    while True:
        before = s
        while len(s) >= 2 and s.startswith("$") and s.endswith("$"):
            s = s[1:-1].strip()
        while s and (s.endswith(".") or s.endswith("%")):
            s = s[:-1].rstrip()
        if s == before:
            return s


def _as_rational(s: str) -> Fraction | None:
    if _RATIONAL_RE.fullmatch(s):
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError):
            return None
    frac = _FRACTION_RE.fullmatch(s)
    if frac:
        try:
            return Fraction(int(frac.group(1)), int(frac.group(2)))
        except ZeroDivisionError:
            return None
    return None


def normalize_answer(text: str) -> str:
    """Reduce an answer to a canonical comparison form.

    Numeric-looking text canonicalises to an exact reduced rational
    ("0.50" -> "1/2", "1,000" -> "1000"); a lone letter uppercases as a
    choice label; everything else lowercases with decorations stripped.
    """
    s = _strip_decorations(text)
    s = _FRAC_RE.sub(lambda m: f"{m.group(1)}{m.group(2)}/{m.group(3)}", s)
    if _THOUSANDS_RE.fullmatch(s):
        s = s.replace(",", "")
    s = s.lower()
    rational = _as_rational(s)
    if rational is not None:
        return str(rational)
    if len(s) == 1 and s.isalpha() and s.isascii():
        return s.upper()
    return s


def answers_equivalent(pred: str, gold: str) -> bool:
    """Permissive equality: canonical forms match (rationals compared exactly)."""
    return normalize_answer(pred) == normalize_answer(gold)


def last_numeric_token(text: str) -> str | None:
    tokens = _NUMERIC_TOKEN_RE.findall(text)
    return tokens[-1] if tokens else None


def _answered(answer: str | None) -> bool:
    return answer is not None and answer.strip() != ""


def score_response(
    parsed: ParsedResponse,
    gold: str | None = None,
    external_result: bool | None = None,
) -> ResponseScore:
    """Score one parsed response against a gold answer or an external label.

    Exactly one of gold / external_result must be supplied: gold drives the
    boxed-extraction + permissive-equivalence path, external_result carries
    a pass/fail verdict from an outside harness (code tasks). Truncated
    responses have no answer and never score correct.
    """
    if (gold is None) == (external_result is None):
        raise ScoringInputConflictError(
            "supply exactly one of gold / external_result"
        )

    answered = _answered(parsed.answer)
    if parsed.status is TraceStatus.TRUNCATED:
        return ResponseScore(False, False, None, parsed.status)

    if external_result is not None:
        return ResponseScore(
            answered=answered,
            correct=bool(external_result) and answered,
            extracted=None,
            status=parsed.status,
        )

    if not answered:
        return ResponseScore(False, False, None, parsed.status)

    answer = parsed.answer
    boxed = extract_boxed(answer)
    if boxed is not None:
        return ResponseScore(
            answered=True,
            correct=answers_equivalent(boxed, gold),
            extracted=normalize_answer(boxed),
            status=parsed.status,
        )

    # No boxed form: compare the whole answer, then its last numeric token.
    if answers_equivalent(answer, gold):
        return ResponseScore(True, True, normalize_answer(answer), parsed.status)
    token = last_numeric_token(answer)
    if token is not None and answers_equivalent(token, gold):
        return ResponseScore(True, True, normalize_answer(token), parsed.status)
    return ResponseScore(True, False, normalize_answer(answer), parsed.status)


def score_to_dict(score: ResponseScore) -> dict:
    return {
        "answered": score.answered,
        "correct": score.correct,
        "extracted": score.extracted,
    }
