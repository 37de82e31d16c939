"""Command-line surface.

Every subcommand streams JSONL from stdin or --in to stdout or --out,
record by record with bounded memory (aggregating commands keep counts,
not records). Records that fail to process become {"id", "error"} records
in the data stream; diagnostics go to stderr only.

Exit codes: 0 success, 1 input/schema error, 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Iterator, TextIO

from ._jsonl import dump_line, iter_jsonl
from .answers import (
    ResponseScore,
    answers_equivalent,
    normalize_answer,
    score_response,
    score_to_dict,
)
from .errors import TraceGaugeError
from .masking import (
    TokenAlignment,
    build_masked_example,
    masked_to_dict,
    parse_mask_flags,
    project_to_tokens,
)
from .metrics import (
    DEFAULT_LEVEL,
    DEFAULT_MIN_VALID,
    DEFAULT_RESAMPLES,
    DEFAULT_SEED,
    TraceStats,
    compute_eval,
    eval_to_dict,
    merge_stats,
    stats_to_dict,
)
from .parsing import TraceStatus, parse_response, parsed_to_dict
from .profiles import (
    BUILTIN_PROFILE_NAMES,
    FormatProfile,
    builtin_profile,
    load_profile,
)
from .render import (
    Conversation,
    MissingPolicy,
    RenderedExample,
    render_prompt,
    render_training_example,
)
from .report import (
    DEFAULT_DELTA_RP,
    DEFAULT_DELTA_VR,
    DEFAULT_SUBSET_N,
    CSV_COLUMNS,
    EvalConfig,
    detect_collapse,
    finding_to_dict,
    run_record_from_dict,
    run_report,
    series_to_dict,
    _csv_row,
)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_USAGE = 2


def default_seed() -> int:
    raw = os.environ.get("TRACE_GAUGE_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise TraceGaugeError(
            f"TRACE_GAUGE_SEED must be an integer, got {raw!r}"
        ) from None


def resolve_profile(spec: str) -> FormatProfile:
    """Interpret --profile as a builtin name or a document path."""
    if spec in BUILTIN_PROFILE_NAMES:
        return builtin_profile(spec)
    try:
        with open(spec, encoding="utf-8") as handle:
            return load_profile(handle.read())
    except OSError as exc:
        raise TraceGaugeError(
            f"--profile is neither a builtin "
            f"({', '.join(BUILTIN_PROFILE_NAMES)}) nor a readable file: {exc}"
        ) from None


@contextlib.contextmanager
def _open_in(path: str | None):
    if path is None or path == "-":
        yield sys.stdin
    else:
        with open(path, encoding="utf-8") as handle:
            yield handle


@contextlib.contextmanager
def _open_out(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as handle:
            yield handle


def _record_text(record: dict) -> str:
    for key in ("text", "generation"):
        if key in record:
            value = record[key]
            if not isinstance(value, str):
                raise TraceGaugeError(f"{key!r} must be a string")
            return value
    raise TraceGaugeError("record needs a 'text' or 'generation' field")


def _stream_map(
    records: Iterator[tuple[int, object]],
    transform: Callable[[int, dict], dict],
    out: TextIO,
    jobs: int,
) -> int:
    """Apply transform per record, keeping input order. Returns failures."""

    def one(item: tuple[int, object]) -> tuple[str, bool]:
        index, record = item
        try:
            if isinstance(record, Exception):
                raise TraceGaugeError(str(record))
            if not isinstance(record, dict):
                raise TraceGaugeError("each line must be a JSON object")
            return dump_line(transform(index, record)), True
        except (TraceGaugeError, KeyError, TypeError, ValueError) as exc:
            rid = record.get("id", index) if isinstance(record, dict) else index
            return dump_line({"id": rid, "error": str(exc)}), False

    failures = 0
    if jobs > 1:
        executor = ThreadPoolExecutor(max_workers=jobs)
        results: Iterable[tuple[str, bool]] = executor.map(one, records, chunksize=16)
    else:
        executor = None
        results = map(one, records)
    try:
        for line, ok in results:
            if not ok:
                failures += 1
            out.write(line + "\n")
    finally:
        if executor is not None:
            executor.shutdown()
    return failures


def _finish_stream(failures: int) -> int:
    if failures:
        print(f"{failures} record(s) failed", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_OK


def _cmd_parse(args) -> int:
    profile = resolve_profile(args.profile)

    def transform(index: int, record: dict) -> dict:
        parsed = parse_response(_record_text(record), profile)
        return parsed_to_dict(parsed, record.get("id", index))

    with _open_in(args.infile) as src, _open_out(args.outfile) as out:
        return _finish_stream(_stream_map(iter_jsonl(src), transform, out, args.jobs))


def _cmd_score(args) -> int:
    profile = resolve_profile(args.profile)

    def transform(index: int, record: dict) -> dict:
        parsed = parse_response(_record_text(record), profile)
        score = score_response(
            parsed,
            gold=record.get("gold"),
            external_result=record.get("external_result"),
        )
        doc = parsed_to_dict(parsed, record.get("id", index))
        doc.update(score_to_dict(score))
        return doc

    with _open_in(args.infile) as src, _open_out(args.outfile) as out:
        return _finish_stream(_stream_map(iter_jsonl(src), transform, out, args.jobs))


def _cmd_stats(args) -> int:
    failures = 0
    totals = TraceStats.zero()
    scores: list[ResponseScore] = []

    with _open_in(args.infile) as src:
        for index, record in iter_jsonl(src):
            try:
                if isinstance(record, Exception):
                    raise TraceGaugeError(str(record))
                status = TraceStatus(record["status"])
                answer = record.get("answer")
                answered = answer is not None and str(answer).strip() != ""
                shard = TraceStats(
                    n=1,
                    valid=int(status is TraceStatus.VALID),
                    empty=int(status is TraceStatus.EMPTY),
                    missing=int(status is TraceStatus.MISSING),
                    truncated=int(status is TraceStatus.TRUNCATED),
                    answered=int(answered),
                )
                totals = merge_stats(totals, shard)
                if args.eval:
                    scores.append(
                        ResponseScore(
                            answered=bool(record.get("answered", answered)),
                            correct=bool(record["correct"]),
                            extracted=record.get("extracted"),
                            status=status,
                        )
                    )
            except (TraceGaugeError, KeyError, TypeError, ValueError) as exc:
                failures += 1
                print(f"record {index}: {exc}", file=sys.stderr)

    if totals.n == 0:
        print("no usable records", file=sys.stderr)
        return EXIT_INPUT_ERROR

    if args.eval:
        result = compute_eval(
            scores,
            min_valid=args.min_valid,
            level=args.level,
            resamples=args.resamples,
            seed=args.seed,
        )
        doc = eval_to_dict(result)
    else:
        doc = stats_to_dict(totals)

    with _open_out(args.outfile) as out:
        out.write(json.dumps(doc, ensure_ascii=False) + "\n")
    if failures:
        print(f"{failures} record(s) skipped", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_OK


def _rendered_to_dict(rendered: RenderedExample) -> dict:
    segments = []
    pos = 0
    for seg in rendered.segments:
        end = pos + len(seg.text)
        segments.append({"kind": seg.kind.value, "start": pos, "end": end})
        pos = end
    return {"text": rendered.text, "segments": segments}


def _cmd_render(args) -> int:
    profile = resolve_profile(args.profile)
    policy = MissingPolicy(args.missing_policy)

    def transform(index: int, record: dict) -> dict:
        conv = Conversation.from_dicts(record["messages"])
        if args.mode == "training":
            rendered = render_training_example(conv, profile, policy)
        else:
            rendered = render_prompt(
                conv,
                profile,
                think_prefix=args.think_prefix,
                response_prefix=args.response_prefix,
            )
        doc = _rendered_to_dict(rendered)
        if "id" in record:
            doc = {"id": record["id"], **doc}
        return doc

    with _open_in(args.infile) as src, _open_out(args.outfile) as out:
        return _finish_stream(_stream_map(iter_jsonl(src), transform, out, args.jobs))


def _cmd_mask(args) -> int:
    profile = resolve_profile(args.profile)
    mask = parse_mask_flags(args.mask)

    def transform(index: int, record: dict) -> dict:
        conv = Conversation.from_dicts(record["messages"])
        example = build_masked_example(conv, profile, mask)
        labels = None
        if "token_spans" in record:
            align = TokenAlignment(
                token_spans=tuple((int(s), int(e)) for s, e in record["token_spans"])
            )
            labels = project_to_tokens(example, align)
        doc = masked_to_dict(example, labels)
        if "id" in record:
            doc = {"id": record["id"], **doc}
        return doc

    with _open_in(args.infile) as src, _open_out(args.outfile) as out:
        return _finish_stream(_stream_map(iter_jsonl(src), transform, out, args.jobs))


def _cmd_check_answers(args) -> int:
    def transform(index: int, record: dict) -> dict:
        pred, gold = record["pred"], record["gold"]
        doc = dict(record)
        doc["equivalent"] = answers_equivalent(pred, gold)
        doc["pred_canonical"] = normalize_answer(pred)
        doc["gold_canonical"] = normalize_answer(gold)
        return doc

    with _open_in(args.infile) as src, _open_out(args.outfile) as out:
        return _finish_stream(_stream_map(iter_jsonl(src), transform, out, args.jobs))


def _cmd_report(args) -> int:
    profile = resolve_profile(args.profile)
    config = EvalConfig(
        min_valid=args.min_valid,
        level=args.level,
        resamples=args.resamples,
        seed=args.seed,
    )

    records = []
    failures = 0
    with _open_in(args.infile) as src:
        for index, raw in iter_jsonl(src):
            try:
                if isinstance(raw, Exception):
                    raise TraceGaugeError(str(raw))
                records.append(run_record_from_dict(raw, default_step=args.step))
            except (TraceGaugeError, KeyError, TypeError, ValueError) as exc:
                failures += 1
                print(f"record {index}: {exc}", file=sys.stderr)

    if not records:
        print("no usable records", file=sys.stderr)
        return EXIT_INPUT_ERROR

    subset_n = None if args.no_subset else args.subset_n
    series_list = run_report(records, profile, config, subset_n=subset_n)

    findings = []
    if args.collapse:
        for series in series_list:
            if len(series.points) >= 2:
                findings.extend(
                    detect_collapse(series, args.delta_vr, args.delta_rp)
                )

    with _open_out(args.outfile) as out:
        if args.format == "json":
            doc = {"series": [series_to_dict(s) for s in series_list]}
            if args.collapse:
                doc["collapse"] = [finding_to_dict(f) for f in findings]
            out.write(json.dumps(doc, ensure_ascii=False) + "\n")
        else:
            import csv as _csv

            writer = _csv.writer(out, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for series in series_list:
                for point in series.points:
                    writer.writerow(_csv_row(series.task, point.step, point.result))
            for finding in findings:
                print(dump_line(finding_to_dict(finding)), file=sys.stderr)

    if failures:
        print(f"{failures} record(s) skipped", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def _add_io_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--in", dest="infile", default=None,
                        help="input JSONL path (default: stdin)")
    parser.add_argument("--out", dest="outfile", default=None,
                        help="output path (default: stdout)")
    parser.add_argument("--jobs", type=int, default=1,
                        help="worker fan-out; output order is always input order")


def _add_eval_flags(parser: argparse.ArgumentParser, seed: int) -> None:
    parser.add_argument("--min-valid", type=int, default=DEFAULT_MIN_VALID)
    parser.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    parser.add_argument("--seed", type=int, default=seed)
    parser.add_argument("--level", type=float, default=DEFAULT_LEVEL)


def build_parser(seed: int) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trace-gauge",
        description="Reasoning-trace parsing, metrics, masking, and reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="classify generations into trace statuses")
    p.add_argument("--profile", required=True)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_parse)

    p = sub.add_parser("score", help="parse and score generations")
    p.add_argument("--profile", required=True)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("stats", help="aggregate parsed/scored records")
    p.add_argument("--eval", action="store_true",
                   help="compute pass@1 / conditioned rate with bootstrap CIs "
                        "(requires scored records; holds indicators in memory)")
    _add_eval_flags(p, seed)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("render", help="render conversations under a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--mode", choices=["prompt", "training"], default="prompt")
    p.add_argument("--think-prefix", default=None)
    p.add_argument("--response-prefix", default=None)
    p.add_argument("--missing-policy", default=MissingPolicy.PROFILE_DEFAULT.value,
                   choices=[m.value for m in MissingPolicy])
    _add_io_flags(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("mask", help="build loss-masked training examples")
    p.add_argument("--profile", required=True)
    p.add_argument("--mask", default="",
                   help="comma-joined subset of {prompt, think}")
    _add_io_flags(p)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("report", help="per-checkpoint metrics and collapse scan")
    p.add_argument("--profile", required=True)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--step", type=int, default=None,
                   help="default step for records without a step field")
    p.add_argument("--subset-n", type=int, default=DEFAULT_SUBSET_N,
                   help="fixed per-task evaluation subset size")
    p.add_argument("--no-subset", action="store_true")
    p.add_argument("--collapse", action="store_true",
                   help="classify each task series for the collapse signature")
    p.add_argument("--delta-vr", type=float, default=DEFAULT_DELTA_VR)
    p.add_argument("--delta-rp", type=float, default=DEFAULT_DELTA_RP)
    _add_eval_flags(p, seed)
    _add_io_flags(p)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("check-answers", help="permissive answer equivalence")
    _add_io_flags(p)
    p.set_defaults(func=_cmd_check_answers)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        seed = default_seed()
    except TraceGaugeError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT_ERROR
    parser = build_parser(seed)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TraceGaugeError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INPUT_ERROR
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
