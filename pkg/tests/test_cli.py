from __future__ import annotations

import json

from click.testing import CliRunner

from patentgen.cli import main
from patentgen.core import draft_to_record, load_json, make_draft
from patentgen.gateway import MockPlaybook
from helpers import pipeline_playbook, rule

RUNNER = CliRunner()


def _write_draft(path, marker="plain"):
    draft = make_draft(
        {
            1: f"The problem is unreliable control ({marker}).",
            2: f"Existing fixed-gain controllers fall short ({marker}).",
            3: f"An adaptive gain loop solves it ({marker}).",
            4: f"Protect the gain scheduler ({marker}).",
            5: f"Figure 1 shows the loop ({marker}).",
        },
        source_id=marker,
    )
    path.write_text(json.dumps(draft_to_record(draft)), "utf-8")
    return path


def _write_config(path, playbook_path, retry_max=0):
    config = {
        "schema_version": "run-config-v1",
        "backends": {
            "default": {
                "kind": "mock",
                "playbook_path": str(playbook_path),
                "retry_max": retry_max,
                "backoff_s": 0.0,
            }
        },
    }
    path.write_text(json.dumps(config), "utf-8")
    return path


def _setup_generate(tmp_path, playbook: MockPlaybook):
    draft_file = _write_draft(tmp_path / "draft.json")
    playbook_path = tmp_path / "playbook.json"
    playbook.save(playbook_path)
    config_file = _write_config(tmp_path / "config.json", playbook_path)
    return draft_file, config_file


def test_generate_complete_run(tmp_path):
    draft_file, config_file = _setup_generate(tmp_path, pipeline_playbook())
    out = tmp_path / "run"
    result = RUNNER.invoke(
        main, ["generate", str(draft_file), "--config", str(config_file), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert (out / "patent.txt").exists()
    assert load_json(out / "status.json")["status"] == "complete"


def test_generate_validates_draft(tmp_path):
    record = {"qa": [{"question_id": i, "answer_text": f"a{i}"} for i in (1, 2, 3, 5)]}
    draft_file = tmp_path / "bad_draft.json"
    draft_file.write_text(json.dumps(record), "utf-8")
    playbook_path = tmp_path / "pb.json"
    pipeline_playbook().save(playbook_path)
    config_file = _write_config(tmp_path / "config.json", playbook_path)
    result = RUNNER.invoke(
        main, ["generate", str(draft_file), "--config", str(config_file), "--out", str(tmp_path / "r")]
    )
    assert result.exit_code == 1
    assert "missing question 4" in result.output


def test_generate_partial_run_exits_2(tmp_path):
    playbook = pipeline_playbook(
        extra_rules=[rule("Just output this subsection", {"error": "transport"})]
    )
    draft_file, config_file = _setup_generate(tmp_path, playbook)
    out = tmp_path / "run"
    result = RUNNER.invoke(
        main, ["generate", str(draft_file), "--config", str(config_file), "--out", str(out)]
    )
    assert result.exit_code == 2
    assert load_json(out / "status.json")["status"] == "partial"
    assert (out / "components.json").exists()


def test_generate_threads_seed_into_run_config(tmp_path):
    draft_file, config_file = _setup_generate(tmp_path, pipeline_playbook())
    out = tmp_path / "run"
    result = RUNNER.invoke(
        main,
        ["generate", str(draft_file), "--config", str(config_file),
         "--out", str(out), "--seed", "77"],
    )
    assert result.exit_code == 0
    assert load_json(out / "config.json")["seed"] == 77


_FULL_BASELINE = (
    "<Patent><Title> T </Title><Abstract> A </Abstract><Background> B </Background>"
    "<Summary> S </Summary><Claims> C </Claims><Full Description> D </Full Description></Patent>"
)


def _run_baseline(tmp_path, scripted: str):
    draft_file = _write_draft(tmp_path / "draft.json")
    playbook_path = tmp_path / "pb.json"
    MockPlaybook([rule("write a complete patent document", scripted)]).save(playbook_path)
    out = tmp_path / "baseline"
    result = RUNNER.invoke(
        main,
        ["baseline", str(draft_file), "--mock-playbook", str(playbook_path), "--out", str(out)],
    )
    return result, out


def test_baseline_full_output(tmp_path):
    result, out = _run_baseline(tmp_path, _FULL_BASELINE)
    assert result.exit_code == 0, result.output
    assert (out / "patent.txt").exists()
    report = load_json(out / "parse_report.json")
    assert report["missing"] == []
    assert len(report["sections_found"]) == 6


def test_baseline_missing_description(tmp_path):
    scripted = _FULL_BASELINE.replace("<Full Description> D </Full Description>", "")
    result, out = _run_baseline(tmp_path, scripted)
    assert result.exit_code == 2
    report = load_json(out / "parse_report.json")
    assert report["missing"] == ["description"]
    assert (out / "sections" / "claims.txt").exists()
    assert not (out / "patent.txt").exists()


def test_baseline_untagged_prose(tmp_path):
    result, out = _run_baseline(tmp_path, "Just some prose, no tags anywhere.")
    assert result.exit_code == 2
    assert (out / "raw_response.txt").read_text().startswith("Just some prose")
    assert load_json(out / "parse_report.json")["sections_found"] == []


def test_score_identity(tmp_path):
    gen = tmp_path / "gen"
    ref = tmp_path / "ref"
    gen.mkdir()
    ref.mkdir()
    for doc_id in ("d1", "d2"):
        text = f"A patent about widgets {doc_id}. It has claims. It has a description."
        (gen / f"{doc_id}.txt").write_text(text, "utf-8")
        (ref / f"{doc_id}.txt").write_text(text, "utf-8")
    out = tmp_path / "report"
    result = RUNNER.invoke(main, ["score", str(gen), str(ref), "--out", str(out)])
    assert result.exit_code == 0, result.output
    record = load_json(out / "report.json")
    assert record["counts"] == {"scored": 2, "failed": 0}
    for row in record["rows"]:
        assert row["bleu"] == 100.0
        assert row["rouge1"] == 1.0 and row["rougel"] == 1.0
    assert record["header"]["stopword_list_id"] == "en-v1"


def test_score_alignment_error_names_id(tmp_path):
    gen = tmp_path / "gen"
    ref = tmp_path / "ref"
    gen.mkdir()
    ref.mkdir()
    (gen / "d1.txt").write_text("text one", "utf-8")
    (gen / "d2.txt").write_text("text two", "utf-8")
    (ref / "d1.txt").write_text("text one", "utf-8")
    result = RUNNER.invoke(main, ["score", str(gen), str(ref)])
    assert result.exit_code == 1
    assert "d2" in result.output


def _bench_fixture(tmp_path, playbook: MockPlaybook, n_docs=3):
    docs = []
    for i in range(1, n_docs + 1):
        draft_file = _write_draft(tmp_path / f"draft{i}.json", marker=f"MARKDOC{i}")
        ref_file = tmp_path / f"ref{i}.txt"
        ref_file.write_text(f"Reference patent {i} about adaptive control.", "utf-8")
        docs.append(
            {"doc_id": f"doc{i}", "draft_file": str(draft_file), "reference_file": str(ref_file)}
        )
    manifest_file = tmp_path / "manifest.json"
    manifest_file.write_text(json.dumps({"docs": docs}), "utf-8")
    playbook_path = tmp_path / "bench_pb.json"
    playbook.save(playbook_path)
    config_file = _write_config(tmp_path / "bench_config.json", playbook_path)
    return manifest_file, config_file, playbook_path


def test_bench_runs_every_document(tmp_path):
    manifest_file, config_file, _ = _bench_fixture(tmp_path, pipeline_playbook())
    out = tmp_path / "bench"
    result = RUNNER.invoke(
        main, ["bench", str(manifest_file), "--config", str(config_file), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    record = load_json(out / "report.json")
    assert record["counts"] == {"scored": 3, "failed": 0}
    for i in (1, 2, 3):
        assert (out / "runs" / f"doc{i}" / "patent.txt").exists()
        assert (out / "generated" / f"doc{i}.txt").exists()


def test_bench_resume_skips_completed_docs(tmp_path):
    manifest_file, config_file, playbook_path = _bench_fixture(tmp_path, pipeline_playbook())
    out = tmp_path / "bench"
    first = RUNNER.invoke(
        main, ["bench", str(manifest_file), "--config", str(config_file), "--out", str(out)]
    )
    assert first.exit_code == 0
    # An empty playbook would fail any model call, so a clean rerun proves
    # completed documents are never recomputed.
    MockPlaybook([]).save(playbook_path)
    second = RUNNER.invoke(
        main, ["bench", str(manifest_file), "--config", str(config_file), "--out", str(out)]
    )
    assert second.exit_code == 0, second.output
    assert load_json(out / "report.json")["counts"]["scored"] == 3


def test_bench_failure_row_then_resume_completes_rest(tmp_path):
    playbook = pipeline_playbook(
        extra_rules=[rule("MARKDOC3", {"error": "transport"})]
    )
    manifest_file, config_file, playbook_path = _bench_fixture(tmp_path, playbook)
    out = tmp_path / "bench"
    first = RUNNER.invoke(
        main, ["bench", str(manifest_file), "--config", str(config_file), "--out", str(out)]
    )
    assert first.exit_code == 2
    record = load_json(out / "report.json")
    assert record["counts"] == {"scored": 2, "failed": 1}
    failed_row = [r for r in record["rows"] if r["doc_id"] == "doc3"][0]
    assert failed_row["failed"] is True

    # Rerun with doc1/doc2 poisoned: resume must not touch them, and doc3
    # must now complete.
    retry_playbook = pipeline_playbook(
        extra_rules=[
            rule("MARKDOC1", {"error": "status", "code": 400}),
            rule("MARKDOC2", {"error": "status", "code": 400}),
        ]
    )
    retry_playbook.save(playbook_path)
    second = RUNNER.invoke(
        main, ["bench", str(manifest_file), "--config", str(config_file), "--out", str(out)]
    )
    assert second.exit_code == 0, second.output
    record = load_json(out / "report.json")
    assert record["counts"] == {"scored": 3, "failed": 0}


def test_bench_parallel_jobs(tmp_path):
    manifest_file, config_file, _ = _bench_fixture(tmp_path, pipeline_playbook())
    out = tmp_path / "bench_jobs"
    result = RUNNER.invoke(
        main,
        ["bench", str(manifest_file), "--config", str(config_file),
         "--out", str(out), "--jobs", "2"],
    )
    assert result.exit_code == 0, result.output
    assert load_json(out / "report.json")["counts"] == {"scored": 3, "failed": 0}


def test_report_command_renders_table(tmp_path):
    gen = tmp_path / "gen"
    ref = tmp_path / "ref"
    gen.mkdir()
    ref.mkdir()
    (gen / "d1.txt").write_text("one two three. four five.", "utf-8")
    (ref / "d1.txt").write_text("one two three. four five.", "utf-8")
    out = tmp_path / "rep"
    RUNNER.invoke(main, ["score", str(gen), str(ref), "--out", str(out)])
    result = RUNNER.invoke(main, ["report", str(out / "report.json")])
    assert result.exit_code == 0
    assert "doc_id" in result.output and "d1" in result.output
    assert "mean" in result.output


def test_missing_config_is_invalid_input(tmp_path):
    draft_file = _write_draft(tmp_path / "draft.json")
    result = RUNNER.invoke(main, ["generate", str(draft_file)])
    assert result.exit_code == 1
    assert "no backends configured" in result.output
