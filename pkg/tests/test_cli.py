import json

import pytest

import tracegauge as tg
from tracegauge.cli import main

from conftest import FIXTURES, load_jsonl


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def run(args):
    return main(args)


def test_parse_command(tmp_path):
    src = tmp_path / "gen.jsonl"
    out = tmp_path / "parsed.jsonl"
    write_jsonl(src, [
        {"id": "a", "text": "<think>r</think>4"},
        {"id": "b", "generation": "no tags"},
    ])
    assert run(["parse", "--profile", "in-text-think",
                "--in", str(src), "--out", str(out)]) == 0
    records = load_jsonl(out)
    assert records[0] == {
        "id": "a", "status": "valid", "reasoning": "r", "answer": "4",
        "raw_length": 17,
    }
    assert records[1]["status"] == "missing"


def test_parse_matches_fixture_labels(tmp_path):
    cases = load_jsonl(FIXTURES / "parser_cases.jsonl")
    by_profile = {}
    for case in cases:
        by_profile.setdefault(case["profile"], []).append(case)
    for profile, group in by_profile.items():
        src = tmp_path / f"{profile}.jsonl"
        out = tmp_path / f"{profile}-out.jsonl"
        write_jsonl(src, [{"id": c["id"], "text": c["text"]} for c in group])
        assert run(["parse", "--profile", profile,
                    "--in", str(src), "--out", str(out)]) == 0
        for case, record in zip(group, load_jsonl(out)):
            assert record["status"] == case["status"], case["id"]


def test_score_command(tmp_path, capsys):
    src = tmp_path / "gen.jsonl"
    out = tmp_path / "scored.jsonl"
    write_jsonl(src, [
        {"id": "a", "generation": "<think>2+2</think>\\boxed{4}", "gold": "4"},
        {"id": "b", "generation": "<think>code</think>x", "external_result": True},
        {"id": "c", "generation": "<think>unfinished", "gold": "4"},
    ])
    assert run(["score", "--profile", "in-text-think",
                "--in", str(src), "--out", str(out)]) == 0
    records = load_jsonl(out)
    assert records[0]["correct"] is True and records[0]["extracted"] == "4"
    assert records[1]["correct"] is True
    assert records[2]["correct"] is False and records[2]["answered"] is False


def test_stats_command(tmp_path):
    src = tmp_path / "parsed.jsonl"
    out = tmp_path / "stats.json"
    write_jsonl(src, [
        {"id": 0, "status": "valid", "reasoning": "r", "answer": "4", "raw_length": 9},
        {"id": 1, "status": "truncated", "reasoning": "r", "answer": None,
         "raw_length": 5},
        {"id": 2, "status": "empty", "reasoning": "", "answer": "x", "raw_length": 3},
        {"id": 3, "status": "missing", "reasoning": None, "answer": "y",
         "raw_length": 1},
    ])
    assert run(["stats", "--in", str(src), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["n"] == 4
    assert doc["counts"] == {
        "valid": 1, "empty": 1, "missing": 1, "truncated": 1, "answered": 3,
    }
    assert doc["rates"]["vr"] == 0.25


def test_stats_eval_command(tmp_path):
    src = tmp_path / "scored.jsonl"
    out = tmp_path / "eval.json"
    records = [
        {"id": i, "status": "valid", "reasoning": "r", "answer": "4",
         "raw_length": 9, "answered": True, "correct": i < 12, "extracted": "4"}
        for i in range(20)
    ]
    write_jsonl(src, records)
    assert run(["stats", "--eval", "--resamples", "1000",
                "--in", str(src), "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["pass1"] == 0.6
    assert doc["rpass1"] == 0.6
    assert "pass1" in doc["ci"]


def test_mask_command_response_only(tmp_path):
    src = tmp_path / "conv.jsonl"
    out = tmp_path / "masked.jsonl"
    write_jsonl(src, [{"messages": [
        {"role": "user", "content": "q"},
        {"role": "assistant", "content": "a"},
    ]}])
    assert run(["mask", "--profile", "in-text-think", "--mask", "prompt,think",
                "--in", str(src), "--out", str(out)]) == 0
    record = load_jsonl(out)[0]
    assert record["strategy"] == "response-only"
    response = [s for s in record["segments"] if s["kind"] == "response"][0]
    assert response["masked"] is False
    assert record["segments"][0]["masked"] is True


def test_mask_command_token_spans(tmp_path):
    conv = {"messages": [
        {"role": "user", "content": "q"},
        {"role": "assistant", "content": "a"},
    ]}
    rendered = tg.build_masked_example(
        tg.Conversation.from_dicts(conv["messages"]),
        tg.builtin_profile("in-text-think"),
        tg.MaskFlag.THINK,
    )
    n = len(rendered.text)
    conv["token_spans"] = [[i, i + 1] for i in range(n)]
    src = tmp_path / "conv.jsonl"
    out = tmp_path / "masked.jsonl"
    write_jsonl(src, [conv])
    assert run(["mask", "--profile", "in-text-think", "--mask", "think",
                "--in", str(src), "--out", str(out)]) == 0
    record = load_jsonl(out)[0]
    assert len(record["token_labels"]) == n
    assert sum(record["token_labels"]) == len("<think></think>\n")


def test_render_command_prompt_and_training(tmp_path):
    src = tmp_path / "conv.jsonl"
    write_jsonl(src, [{"id": "c", "messages": [
        {"role": "user", "content": "q"},
        {"role": "assistant", "content": "a", "reasoning": "r"},
    ]}])
    out = tmp_path / "train.jsonl"
    assert run(["render", "--profile", "in-text-think", "--mode", "training",
                "--in", str(src), "--out", str(out)]) == 0
    record = load_jsonl(out)[0]
    assert record["text"].startswith("<user>\nq\n</user>\n")
    kinds = [s["kind"] for s in record["segments"]]
    assert "think_body" in kinds

    prompt_src = tmp_path / "prompt.jsonl"
    write_jsonl(prompt_src, [{"messages": [{"role": "user", "content": "q"}]}])
    out2 = tmp_path / "prompt-out.jsonl"
    assert run(["render", "--profile", "in-text-think",
                "--think-prefix", "Let me see.",
                "--in", str(prompt_src), "--out", str(out2)]) == 0
    assert load_jsonl(out2)[0]["text"].endswith("<think>Let me see.")


def test_report_command_json_and_csv(tmp_path):
    out = tmp_path / "report.json"
    assert run(["report", "--profile", "in-text-think", "--resamples", "1000",
                "--no-subset", "--collapse",
                "--in", str(FIXTURES / "run_records.jsonl"),
                "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert {s["task"] for s in doc["series"]} == {"chem", "code"}
    assert len(doc["collapse"]) == 2

    csv_out = tmp_path / "report.csv"
    assert run(["report", "--profile", "in-text-think", "--resamples", "1000",
                "--no-subset", "--format", "csv",
                "--in", str(FIXTURES / "run_records.jsonl"),
                "--out", str(csv_out)]) == 0
    lines = csv_out.read_text().strip().split("\n")
    assert lines[0].startswith("task,step,pass1,rpass1,vr,er,mr,tr")
    assert len(lines) == 1 + 6  # two tasks x three steps


def test_check_answers_command(tmp_path):
    src = tmp_path / "pairs.jsonl"
    out = tmp_path / "checked.jsonl"
    write_jsonl(src, [
        {"pred": "1,000", "gold": "1000"},
        {"pred": "42", "gold": "41"},
    ])
    assert run(["check-answers", "--in", str(src), "--out", str(out)]) == 0
    records = load_jsonl(out)
    assert records[0]["equivalent"] is True
    assert records[0]["pred_canonical"] == "1000"
    assert records[1]["equivalent"] is False


def test_error_records_keep_stream_valid(tmp_path, capsys):
    src = tmp_path / "gen.jsonl"
    out = tmp_path / "parsed.jsonl"
    with open(src, "w") as handle:
        handle.write(json.dumps({"id": "a", "text": "<think>r</think>4"}) + "\n")
        handle.write("{this is not json\n")
        handle.write(json.dumps({"id": "c", "no_text_key": 1}) + "\n")
    code = run(["parse", "--profile", "in-text-think",
                "--in", str(src), "--out", str(out)])
    assert code == 1
    records = load_jsonl(out)
    assert len(records) == 3
    assert records[0]["status"] == "valid"
    assert "error" in records[1]
    assert records[2]["id"] == "c" and "error" in records[2]
    assert "2 record(s) failed" in capsys.readouterr().err


def test_unknown_subcommand_exits_2():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


def test_unknown_profile_exits_1(tmp_path, capsys):
    src = tmp_path / "gen.jsonl"
    write_jsonl(src, [{"id": "a", "text": "x"}])
    assert run(["parse", "--profile", "nope", "--in", str(src)]) == 1
    assert "--profile" in capsys.readouterr().err


def test_profile_document_path(tmp_path):
    profile_path = tmp_path / "custom.json"
    profile_path.write_text(
        tg.serialize_profile(tg.builtin_profile("in-text-think"))
    )
    src = tmp_path / "gen.jsonl"
    out = tmp_path / "out.jsonl"
    write_jsonl(src, [{"id": "a", "text": "<think>r</think>4"}])
    assert run(["parse", "--profile", str(profile_path),
                "--in", str(src), "--out", str(out)]) == 0
    assert load_jsonl(out)[0]["status"] == "valid"


def test_outputs_are_deterministic(tmp_path):
    src = tmp_path / "gen.jsonl"
    write_jsonl(src, [
        {"id": i, "generation": f"<think>t{i}</think>\\boxed{{{i}}}", "gold": str(i)}
        for i in range(20)
    ])
    out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (out1, out2):
        assert run(["score", "--profile", "in-text-think",
                    "--in", str(src), "--out", str(out)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_jobs_preserve_order(tmp_path):
    src = tmp_path / "gen.jsonl"
    write_jsonl(src, [{"id": i, "text": f"<think>r{i}</think>{i}"}
                      for i in range(200)])
    sequential = tmp_path / "seq.jsonl"
    parallel = tmp_path / "par.jsonl"
    assert run(["parse", "--profile", "in-text-think",
                "--in", str(src), "--out", str(sequential)]) == 0
    assert run(["parse", "--profile", "in-text-think", "--jobs", "4",
                "--in", str(src), "--out", str(parallel)]) == 0
    assert sequential.read_bytes() == parallel.read_bytes()


def test_seed_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("TRACE_GAUGE_SEED", "7")
    src = tmp_path / "scored.jsonl"
    write_jsonl(src, [
        {"id": i, "status": "valid", "reasoning": "r", "answer": "4",
         "raw_length": 9, "answered": True, "correct": i % 3 == 0}
        for i in range(30)
    ])
    out = tmp_path / "eval.json"
    assert run(["stats", "--eval", "--resamples", "1000",
                "--in", str(src), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["ci"]["pass1"]["seed"] == 7
