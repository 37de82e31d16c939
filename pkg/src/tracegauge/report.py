"""End-to-end run evaluation and collapse detection.

A run is a stream of (id, task, generation, label, step) records. The
pipeline samples a fixed evaluation subset deterministically, evaluates
each checkpoint (parse -> score -> metrics), assembles per-task checkpoint
series, scans each series for the collapse signature (valid-reasoning rate
falls while the reasoning-conditioned rate holds or improves), and emits
plot-ready CSV or lossless JSON.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .answers import score_response
from .errors import (
    DuplicateStepError,
    EmptyInputError,
    MalformedDocumentError,
    MixedStepsError,
    SeriesTooShortError,
    SubsetTooLargeError,
)
from .metrics import (
    DEFAULT_LEVEL,
    DEFAULT_MIN_VALID,
    DEFAULT_RESAMPLES,
    DEFAULT_SEED,
    EvalResult,
    compute_eval,
    eval_from_dict,
    eval_to_dict,
)
from .parsing import parse_response
from .profiles import FormatProfile

DEFAULT_SUBSET_N = 256
DEFAULT_DELTA_VR = 0.15
DEFAULT_DELTA_RP = 0.05


@dataclass(frozen=True)
class RunRecord:
    id: str
    task: str
    prompt: str
    generation: str
    step: int
    gold: str | None = None
    external_result: bool | None = None

    def __post_init__(self):
        if (self.gold is None) == (self.external_result is None):
            raise MalformedDocumentError(
                f"record {self.id!r}: exactly one of gold / external_result "
                "must be present"
            )


def run_record_from_dict(doc: dict, default_step: int | None = None) -> RunRecord:
    try:
        step = doc["step"] if "step" in doc else default_step
        if step is None:
            raise MalformedDocumentError(
                "record has no step and no default step was given"
            )
        return RunRecord(
            id=str(doc["id"]),
            task=str(doc["task"]),
            prompt=str(doc.get("prompt", "")),
            generation=doc["generation"],
            step=int(step),
            gold=doc.get("gold"),
            external_result=doc.get("external_result"),
        )
    except KeyError as exc:
        raise MalformedDocumentError(f"record missing key: {exc}") from None


@dataclass(frozen=True)
class EvalConfig:
    min_valid: int = DEFAULT_MIN_VALID
    level: float = DEFAULT_LEVEL
    resamples: int = DEFAULT_RESAMPLES
    seed: int = DEFAULT_SEED


@dataclass(frozen=True)
class SeriesPoint:
    step: int
    result: EvalResult


@dataclass(frozen=True)
class CheckpointSeries:
    task: str
    points: tuple[SeriesPoint, ...]

    @property
    def steps(self) -> tuple[int, ...]:
        return tuple(p.step for p in self.points)


class CollapseKind(str, Enum):
    COLLAPSE_SIGNATURE = "collapse-signature"
    JOINT_DEGRADATION = "joint-degradation"
    STABLE = "stable"


@dataclass(frozen=True)
class CollapseFinding:
    task: str
    window: tuple[int, int]
    vr_drop: float
    rpass1_drift: float
    kind: CollapseKind


def sample_subset(ids: Sequence, n: int = DEFAULT_SUBSET_N,
                  seed: int = DEFAULT_SEED) -> list:
    """Deterministic uniform sample without replacement, input order kept."""
    if n > len(ids):
        raise SubsetTooLargeError(
            f"cannot sample {n} from {len(ids)} ids"
        )
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(len(ids), size=n, replace=False))
    return [ids[i] for i in chosen]


def evaluate_checkpoint(
    records: Iterable[RunRecord],
    profile: FormatProfile,
    config: EvalConfig = EvalConfig(),
) -> EvalResult:
    """Parse, score, and aggregate the records of a single checkpoint."""
    records = list(records)
    if not records:
        raise EmptyInputError("no records for this checkpoint")
    steps = {r.step for r in records}
    if len(steps) > 1:
        raise MixedStepsError(f"records span steps {sorted(steps)}")

    scores = []
    for record in records:
        parsed = parse_response(record.generation, profile)
        scores.append(
            score_response(
                parsed, gold=record.gold, external_result=record.external_result
            )
        )
    return compute_eval(
        scores,
        min_valid=config.min_valid,
        level=config.level,
        resamples=config.resamples,
        seed=config.seed,
    )


def build_series(
    results: Iterable[tuple[int, EvalResult]], task: str
) -> CheckpointSeries:
    """Assemble per-step results into a step-sorted series for one task."""
    points = [SeriesPoint(step, result) for step, result in results]
    if not points:
        raise EmptyInputError("a series needs at least one checkpoint")
    seen: set[int] = set()
    for p in points:
        if p.step in seen:
            raise DuplicateStepError(f"duplicate step {p.step} in task {task!r}")
        seen.add(p.step)
    points.sort(key=lambda p: p.step)
    return CheckpointSeries(task=task, points=tuple(points))


def detect_collapse(
    series: CheckpointSeries,
    delta_vr: float = DEFAULT_DELTA_VR,
    delta_rp: float = DEFAULT_DELTA_RP,
) -> list[CollapseFinding]:
    """Classify a series over its full window.

    CollapseSignature: VR falls by at least delta_vr while the conditioned
    rate holds within delta_rp or improves (including the case where it
    becomes suppressed because almost no valid reasoning remains).
    JointDegradation: VR falls and the conditioned rate falls with it.
    Stable: everything else. Suppressed endpoints fall back to the nearest
    step where the conditioned rate was reportable.
    """
    if len(series.points) < 2:
        raise SeriesTooShortError("collapse detection needs at least two steps")

    first, last = series.points[0], series.points[-1]
    vr_drop = max(
        first.result.stats.valid_reasoning_rate
        - last.result.stats.valid_reasoning_rate,
        0.0,
    )

    reportable = [p for p in series.points if p.result.rpass1 is not None]
    if reportable:
        rp_drift = reportable[-1].result.rpass1 - reportable[0].result.rpass1
    else:
        rp_drift = 0.0
    suppressed_at_end = last.result.rpass1 is None

    if vr_drop >= delta_vr:
        if suppressed_at_end or rp_drift >= -delta_rp:
            kind = CollapseKind.COLLAPSE_SIGNATURE
        else:
            kind = CollapseKind.JOINT_DEGRADATION
    else:
        kind = CollapseKind.STABLE

    return [
        CollapseFinding(
            task=series.task,
            window=(first.step, last.step),
            vr_drop=vr_drop,
            rpass1_drift=rp_drift,
            kind=kind,
        )
    ]


def finding_to_dict(finding: CollapseFinding) -> dict:
    return {
        "task": finding.task,
        "window": list(finding.window),
        "vr_drop": finding.vr_drop,
        "rpass1_drift": finding.rpass1_drift,
        "kind": finding.kind.value,
    }


CSV_COLUMNS = [
    "task", "step", "pass1", "rpass1", "vr", "er", "mr", "tr",
    "pass1_ci_low", "pass1_ci_high",
    "rpass1_ci_low", "rpass1_ci_high",
    "vr_ci_low", "vr_ci_high",
    "er_ci_low", "er_ci_high",
    "mr_ci_low", "mr_ci_high",
    "tr_ci_low", "tr_ci_high",
]


def _csv_row(task: str, step, result: EvalResult) -> list:
    stats = result.stats
    row = [
        task,
        step if step is not None else "",
        repr(result.pass1),
        repr(result.rpass1) if result.rpass1 is not None else "",
        repr(stats.valid_reasoning_rate),
        repr(stats.empty_reasoning_rate),
        repr(stats.missing_reasoning_rate),
        repr(stats.truncated_reasoning_rate),
    ]
    for metric in ("pass1", "rpass1", "vr", "er", "mr", "tr"):
        interval = result.ci.get(metric)
        if interval is None:
            row.extend(["", ""])
        else:
            row.extend([repr(interval.low), repr(interval.high)])
    return row


def series_to_dict(series: CheckpointSeries) -> dict:
    return {
        "task": series.task,
        "points": [
            {"step": p.step, "metrics": eval_to_dict(p.result)}
            for p in series.points
        ],
    }


def series_from_dict(doc: dict) -> CheckpointSeries:
    return CheckpointSeries(
        task=doc["task"],
        points=tuple(
            SeriesPoint(step=p["step"], result=eval_from_dict(p["metrics"]))
            for p in doc["points"]
        ),
    )


def emit_report(
    obj: CheckpointSeries | EvalResult,
    format: str = "json",
    task: str = "",
    step: int | None = None,
) -> str:
    """Serialize a series (or a single result) as JSON or CSV.

    JSON is lossless: ingest_report(emit_report(s)) == s. CSV is the
    plot-ready flat table; a suppressed conditioned rate serializes as an
    empty cell.
    """
    if isinstance(obj, EvalResult):
        if format == "json":
            return json.dumps(eval_to_dict(obj), ensure_ascii=False)
        if format == "csv":
            return _csv_text([_csv_row(task, step, obj)])
        raise ValueError(f"unknown report format {format!r}")

    if format == "json":
        return json.dumps(series_to_dict(obj), ensure_ascii=False)
    if format == "csv":
        rows = [_csv_row(obj.task, p.step, p.result) for p in obj.points]
        return _csv_text(rows)
    raise ValueError(f"unknown report format {format!r}")


def _csv_text(rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerows(rows)
    return buffer.getvalue()


def ingest_report(text: str) -> CheckpointSeries:
    """Load a JSON series produced by emit_report."""
    doc = json.loads(text)
    return series_from_dict(doc)


def run_report(
    records: Iterable[RunRecord],
    profile: FormatProfile,
    config: EvalConfig = EvalConfig(),
    subset_n: int | None = DEFAULT_SUBSET_N,
) -> list[CheckpointSeries]:
    """Group records by task and step, evaluate every checkpoint, and
    return one series per task (tasks sorted by name).

    When subset_n is set, each task is restricted to a deterministic
    fixed subset of its record ids (sampled once and reused across steps,
    clamped to the number of distinct ids available).
    """
    by_task: dict[str, list[RunRecord]] = {}
    for record in records:
        by_task.setdefault(record.task, []).append(record)
    if not by_task:
        raise EmptyInputError("no records to report on")

    series = []
    for task in sorted(by_task):
        task_records = by_task[task]
        if subset_n is not None:
            unique_ids = sorted({r.id for r in task_records})
            keep = set(
                sample_subset(
                    unique_ids, min(subset_n, len(unique_ids)), config.seed
                )
            )
            task_records = [r for r in task_records if r.id in keep]
        by_step: dict[int, list[RunRecord]] = {}
        for record in task_records:
            by_step.setdefault(record.step, []).append(record)
        results = [
            (step, evaluate_checkpoint(recs, profile, config))
            for step, recs in sorted(by_step.items())
        ]
        series.append(build_series(results, task))
    return series
