"""Structural reliability metrics and task metrics with bootstrap intervals.

TraceStats partitions a corpus into the four structural statuses and keeps
exact counts, so the four rates always sum to 1 as count ratios and shard
merging is associative and commutative. compute_eval layers pass@1 and the
reasoning-conditioned rate on top, suppressing the conditioned rate when
too few valid-reasoning responses make it unstable, and attaches percentile
bootstrap confidence intervals (jointly resampling records so all metrics
come from the same resamples).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from .answers import ResponseScore
from .errors import BadLevelError, EmptyInputError
from .parsing import ParsedResponse, TraceStatus

DEFAULT_LEVEL = 0.95
DEFAULT_RESAMPLES = 10_000
DEFAULT_SEED = 42
DEFAULT_MIN_VALID = 10
BOOTSTRAP_METHOD = "percentile-bootstrap"

# Resamples are drawn in fixed-size blocks from one seeded generator, so a
# result depends only on (seed, resamples, n), not on available memory.
_RESAMPLE_BLOCK = 1024


@dataclass(frozen=True)
class TraceStats:
    n: int
    valid: int
    empty: int
    missing: int
    truncated: int
    answered: int

    @property
    def valid_reasoning_rate(self) -> float:
        return self.valid / self.n if self.n else 0.0

    @property
    def empty_reasoning_rate(self) -> float:
        return self.empty / self.n if self.n else 0.0

    @property
    def missing_reasoning_rate(self) -> float:
        return self.missing / self.n if self.n else 0.0

    @property
    def truncated_reasoning_rate(self) -> float:
        return self.truncated / self.n if self.n else 0.0

    @property
    def answer_rate(self) -> float:
        return self.answered / self.n if self.n else 0.0

    @classmethod
    def zero(cls) -> "TraceStats":
        return cls(0, 0, 0, 0, 0, 0)


@dataclass(frozen=True)
class Interval:
    low: float
    high: float
    level: float = DEFAULT_LEVEL
    method: str = BOOTSTRAP_METHOD
    resamples: int = DEFAULT_RESAMPLES
    seed: int = DEFAULT_SEED

    @property
    def half_width(self) -> float:
        return (self.high - self.low) / 2


@dataclass(frozen=True)
class EvalResult:
    stats: TraceStats
    pass1: float
    rpass1: float | None
    ci: dict[str, Interval] = field(default_factory=dict)
    min_valid_threshold: int = DEFAULT_MIN_VALID


def _has_answer(parsed: ParsedResponse) -> bool:
    return parsed.answer is not None and parsed.answer.strip() != ""


def compute_stats(parsed: Sequence[ParsedResponse]) -> TraceStats:
    """Count statuses over a non-empty corpus of parsed responses."""
    if not parsed:
        raise EmptyInputError("compute_stats needs at least one response")
    counts = {status: 0 for status in TraceStatus}
    answered = 0
    for p in parsed:
        counts[p.status] += 1
        if _has_answer(p):
            answered += 1
    return TraceStats(
        n=len(parsed),
        valid=counts[TraceStatus.VALID],
        empty=counts[TraceStatus.EMPTY],
        missing=counts[TraceStatus.MISSING],
        truncated=counts[TraceStatus.TRUNCATED],
        answered=answered,
    )


def merge_stats(a: TraceStats, b: TraceStats) -> TraceStats:
    """Add two shards; associative and commutative, zero() is the identity."""
    return TraceStats(
        n=a.n + b.n,
        valid=a.valid + b.valid,
        empty=a.empty + b.empty,
        missing=a.missing + b.missing,
        truncated=a.truncated + b.truncated,
        answered=a.answered + b.answered,
    )


def _check_bootstrap_args(n: int, level: float, resamples: int) -> None:
    if n == 0:
        raise EmptyInputError("cannot bootstrap an empty sample")
    if not (0.0 < level < 1.0):
        raise BadLevelError(level)
    if resamples < 1000:
        raise ValueError(f"resamples must be >= 1000, got {resamples}")


def bootstrap_ci(
    indicators: Sequence[int] | Sequence[float],
    level: float = DEFAULT_LEVEL,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_SEED,
) -> Interval:
    """Percentile bootstrap interval for the mean of a 0/1 indicator vector.

    Draws `resamples` same-size resamples with replacement from a seeded
    generator and takes the (alpha/2, 1-alpha/2) percentiles of the
    resample means. Deterministic given the seed.
    """
    # Canonical order: resampling sees only the empirical distribution, so
    # sorting makes the interval invariant under input permutation.
    values = np.sort(np.asarray(indicators, dtype=np.float64))
    _check_bootstrap_args(values.size, level, resamples)

    rng = np.random.default_rng(seed)
    n = values.size
    means = np.empty(resamples, dtype=np.float64)
    done = 0
    while done < resamples:
        block = min(_RESAMPLE_BLOCK, resamples - done)
        idx = rng.integers(0, n, size=(block, n))
        means[done:done + block] = values[idx].mean(axis=1)
        done += block

    alpha = (1.0 - level) / 2.0
    low, high = np.percentile(means, [alpha * 100.0, (1.0 - alpha) * 100.0])
    return Interval(
        low=float(low),
        high=float(high),
        level=level,
        resamples=resamples,
        seed=seed,
    )


def compute_eval(
    scores: Sequence[ResponseScore],
    min_valid: int = DEFAULT_MIN_VALID,
    level: float = DEFAULT_LEVEL,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_SEED,
) -> EvalResult:
    """Aggregate scored responses into pass@1, the reasoning-conditioned
    rate, the structural rates, and bootstrap intervals for all of them.

    The conditioned rate (correct among valid-reasoning responses) is
    reported only when the valid count exceeds min_valid. All intervals
    come from one joint resampling of records, so every resample's metrics
    are computed over the same drawn records.
    """
    if not scores:
        raise EmptyInputError("compute_eval needs at least one score")
    _check_bootstrap_args(len(scores), level, resamples)

    # A record's contribution is fully described by (status, correct,
    # answered); sorting on that key makes every interval invariant under
    # input permutation, not just the point estimates.
    scores = sorted(
        scores, key=lambda s: (s.status.value, s.correct, s.answered)
    )
    n = len(scores)
    correct = np.array([1.0 if s.correct else 0.0 for s in scores])
    valid = np.array(
        [1.0 if s.status is TraceStatus.VALID else 0.0 for s in scores]
    )
    empty = np.array(
        [1.0 if s.status is TraceStatus.EMPTY else 0.0 for s in scores]
    )
    missing = np.array(
        [1.0 if s.status is TraceStatus.MISSING else 0.0 for s in scores]
    )
    truncated = np.array(
        [1.0 if s.status is TraceStatus.TRUNCATED else 0.0 for s in scores]
    )
    answered = np.array([1.0 if s.answered else 0.0 for s in scores])

    stats = TraceStats(
        n=n,
        valid=int(valid.sum()),
        empty=int(empty.sum()),
        missing=int(missing.sum()),
        truncated=int(truncated.sum()),
        answered=int(answered.sum()),
    )
    pass1 = float(correct.mean())
    correct_and_valid = correct * valid
    rpass1 = (
        float(correct_and_valid.sum() / stats.valid)
        if stats.valid > min_valid
        else None
    )

    rng = np.random.default_rng(seed)
    columns = {
        "pass1": correct,
        "vr": valid,
        "er": empty,
        "mr": missing,
        "tr": truncated,
    }
    means = {name: np.empty(resamples) for name in columns}
    rp_means = np.empty(resamples)
    done = 0
    while done < resamples:
        block = min(_RESAMPLE_BLOCK, resamples - done)
        idx = rng.integers(0, n, size=(block, n))
        for name, col in columns.items():
            means[name][done:done + block] = col[idx].mean(axis=1)
        valid_draw = valid[idx].sum(axis=1)
        with np.errstate(invalid="ignore"):
            rp_means[done:done + block] = np.where(
                valid_draw > 0,
                correct_and_valid[idx].sum(axis=1) / valid_draw,
                np.nan,
            )
        done += block

    alpha = (1.0 - level) / 2.0
    pct = [alpha * 100.0, (1.0 - alpha) * 100.0]

    def interval(samples: np.ndarray) -> Interval:
        low, high = np.percentile(samples, pct)
        return Interval(float(low), float(high), level, BOOTSTRAP_METHOD,
                        resamples, seed)

    ci = {name: interval(means[name]) for name in columns}
    if rpass1 is not None:
        defined = rp_means[~np.isnan(rp_means)]
        if defined.size:
            ci["rpass1"] = interval(defined)

    return EvalResult(
        stats=stats,
        pass1=pass1,
        rpass1=rpass1,
        ci=ci,
        min_valid_threshold=min_valid,
    )


def round_pct(fraction: float) -> float:
    """Render a fraction as a percentage, one decimal place, round-half-up.

    Used for display and table replay; computation always keeps full
    precision.
    """
    value = Decimal(repr(fraction)) * 100
    return float(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def interval_to_dict(interval: Interval) -> dict:
    return {
        "low": interval.low,
        "high": interval.high,
        "level": interval.level,
        "method": interval.method,
        "resamples": interval.resamples,
        "seed": interval.seed,
    }


def interval_from_dict(doc: dict) -> Interval:
    return Interval(
        low=doc["low"],
        high=doc["high"],
        level=doc["level"],
        method=doc.get("method", BOOTSTRAP_METHOD),
        resamples=doc["resamples"],
        seed=doc["seed"],
    )


def stats_to_dict(stats: TraceStats) -> dict:
    return {
        "n": stats.n,
        "counts": {
            "valid": stats.valid,
            "empty": stats.empty,
            "missing": stats.missing,
            "truncated": stats.truncated,
            "answered": stats.answered,
        },
        "rates": {
            "vr": stats.valid_reasoning_rate,
            "er": stats.empty_reasoning_rate,
            "mr": stats.missing_reasoning_rate,
            "tr": stats.truncated_reasoning_rate,
            "answer_rate": stats.answer_rate,
        },
    }


def stats_from_dict(doc: dict) -> TraceStats:
    counts = doc["counts"]
    return TraceStats(
        n=doc["n"],
        valid=counts["valid"],
        empty=counts["empty"],
        missing=counts["missing"],
        truncated=counts["truncated"],
        answered=counts["answered"],
    )


def eval_to_dict(result: EvalResult) -> dict:
    out = stats_to_dict(result.stats)
    out["pass1"] = result.pass1
    out["rpass1"] = result.rpass1
    out["min_valid"] = result.min_valid_threshold
    out["ci"] = {name: interval_to_dict(iv) for name, iv in result.ci.items()}
    return out


def eval_from_dict(doc: dict) -> EvalResult:
    return EvalResult(
        stats=stats_from_dict(doc),
        pass1=doc["pass1"],
        rpass1=doc.get("rpass1"),
        ci={name: interval_from_dict(iv) for name, iv in doc.get("ci", {}).items()},
        min_valid_threshold=doc.get("min_valid", DEFAULT_MIN_VALID),
    )
