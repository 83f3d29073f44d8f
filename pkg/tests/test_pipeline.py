from __future__ import annotations

import json
from pathlib import Path

import pytest

from vqaprompt.errors import ConfigError
from vqaprompt.pipeline import (
    RunConfig,
    TranscriptLog,
    build_all_prompts,
    compute_heuristics,
    make_run_config,
    parse_config_file,
    replay_eval,
    run_pipeline,
)
from vqaprompt.artifacts import load_manifest


def echo_config(fixture_dir: Path, out_dir: Path, **overrides) -> RunConfig:
    base = dict(
        manifest=str(fixture_dir / "manifest.json"),
        out_dir=str(out_dir),
        k=10, n_examples=4, queries=3,
        strategy="fused",
        gateway_mode="mock",
        mock_policy="echo_top1",
    )
    base.update(overrides)
    return RunConfig(**base)


def test_echo_run_stage2_equals_stage1(fixture_dataset_dir, tmp_path):
    config = echo_config(fixture_dataset_dir, tmp_path / "run")
    result = run_pipeline(config)
    report = result.report
    assert not result.failed
    assert report.accuracy == report.stage1_accuracy  # bit-exact
    assert report.behavior_fractions["keep_top1"] == 1.0
    assert report.hit_rate[1] == report.stage1_accuracy
    for name in ("config_snapshot.json", "transcript.jsonl", "votes.jsonl",
                 "report.json", "report.md", "candidates.json", "selections.json"):
        assert (tmp_path / "run" / name).exists()
    lines = (tmp_path / "run" / "transcript.jsonl").read_text().splitlines()
    assert len(lines) == 24 * 3


def test_replay_reproduces_report_byte_identically(fixture_dataset_dir, tmp_path):
    config = echo_config(fixture_dataset_dir, tmp_path / "run")
    run_pipeline(config)
    report_path = tmp_path / "run" / "report.json"
    original = report_path.read_bytes()
    replay_eval(tmp_path / "run")
    assert report_path.read_bytes() == original


def test_resumed_run_equals_uninterrupted(fixture_dataset_dir, tmp_path):
    full_dir = tmp_path / "full"
    run_pipeline(echo_config(fixture_dataset_dir, full_dir))
    full_report = (full_dir / "report.json").read_bytes()
    full_transcript = (full_dir / "transcript.jsonl").read_text().splitlines()

    resumed_dir = tmp_path / "resumed"
    resumed_dir.mkdir()
    half = len(full_transcript) // 2
    (resumed_dir / "transcript.jsonl").write_text(
        "\n".join(full_transcript[:half]) + "\n"
    )
    run_pipeline(echo_config(fixture_dataset_dir, resumed_dir))
    assert (resumed_dir / "report.json").read_bytes() == full_report
    resumed_lines = (resumed_dir / "transcript.jsonl").read_text().splitlines()
    assert sorted(resumed_lines) == sorted(full_transcript)


def test_rerun_skips_completed_requests(fixture_dataset_dir, tmp_path):
    out = tmp_path / "run"
    run_pipeline(echo_config(fixture_dataset_dir, out))
    before = (out / "transcript.jsonl").read_text()
    run_pipeline(echo_config(fixture_dataset_dir, out))
    assert (out / "transcript.jsonl").read_text() == before


def test_candidate_oracle_accuracy_at_least_stage1(fixture_dataset_dir, tmp_path):
    config = echo_config(fixture_dataset_dir, tmp_path / "run",
                         mock_policy="candidate_oracle")
    report = run_pipeline(config).report
    assert report.accuracy >= report.stage1_accuracy - 1e-12


def test_rand_strategy_needs_seed(fixture_dataset_dir, tmp_path):
    with pytest.raises(ConfigError, match="seed"):
        echo_config(fixture_dataset_dir, tmp_path / "run", strategy="rand")


def test_rand_strategy_deterministic(fixture_dataset_dir, tmp_path):
    for name in ("a", "b"):
        run_pipeline(echo_config(fixture_dataset_dir, tmp_path / name,
                                 strategy="rand", seed=5))
    assert (tmp_path / "a" / "report.json").read_bytes() == \
        (tmp_path / "b" / "report.json").read_bytes()


def test_grouped_strategy_runs(fixture_dataset_dir, tmp_path):
    config = echo_config(fixture_dataset_dir, tmp_path / "run", strategy="grouped",
                         n_examples=2, queries=2)
    report = run_pipeline(config).report
    assert report.sample_count == 24


def test_zero_shot_prompts_have_no_examples(fixture_dataset_dir, tmp_path):
    config = echo_config(fixture_dataset_dir, tmp_path / "run",
                         n_examples=0, queries=1)
    dataset = load_manifest(config.manifest)
    heur = compute_heuristics(dataset, config)
    bundles = build_all_prompts(dataset, heur, config)
    assert all(b.example_ids_per_prompt == ((),) for b in bundles.values())
    prompt = next(iter(bundles.values())).prompts[0]
    assert prompt.count("Answer:") == 1
    report = run_pipeline(config).report
    assert report.accuracy == report.stage1_accuracy


def test_gateway_failures_flag_incomplete_report(fixture_dataset_dir, tmp_path):
    script = tmp_path / "script.json"
    script.write_text("{}")
    config = echo_config(fixture_dataset_dir, tmp_path / "run",
                         mock_policy="scripted", script_table=str(script))
    result = run_pipeline(config)
    assert len(result.failed) == 24
    assert not result.report.complete
    report_doc = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report_doc["complete"] is False
    assert len(report_doc["failed_sample_ids"]) == 24


def test_example_hit_rate_in_report(fixture_dataset_dir, tmp_path):
    report = run_pipeline(echo_config(fixture_dataset_dir, tmp_path / "run")).report
    assert report.example_hit_rate is not None
    assert 0.0 <= report.example_hit_rate <= 1.0


def test_dump_prompts_writes_files(fixture_dataset_dir, tmp_path):
    config = echo_config(fixture_dataset_dir, tmp_path / "run",
                         dump_prompts=str(tmp_path / "prompts"))
    run_pipeline(config)
    dumped = list((tmp_path / "prompts").glob("*.txt"))
    assert len(dumped) == 24 * 3


# --------------------------------------------------------------------------
# config plumbing


def test_parse_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment\n"
        "manifest = fixtures/manifest.json\n"
        "k = 5\n"
        "include_scores = false\n"
        "strategy = fused\n"
        'oracle_table = "oracle.json"  # inline comment\n'
    )
    parsed = parse_config_file(cfg)
    assert parsed == {
        "manifest": "fixtures/manifest.json",
        "k": 5,
        "include_scores": False,
        "strategy": "fused",
        "oracle_table": "oracle.json",
    }


def test_make_run_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config keys"):
        make_run_config({"manifest": "m", "out_dir": "o", "bogus": 1})


def test_make_run_config_requires_paths():
    with pytest.raises(ConfigError, match="manifest"):
        make_run_config({"k": 3})


def test_transcript_log_roundtrip(tmp_path):
    log = TranscriptLog(tmp_path / "t.jsonl")
    record = {"sample_id": "s", "query_index": 0, "prompt_sha256": "x",
              "raw_text": "r", "parsed_answer": "r", "latency_ms": 0}
    log.append(record)
    again = TranscriptLog(tmp_path / "t.jsonl")
    assert again.get("s", 0, "x") == record
    assert again.get("s", 1, "x") is None


def test_parallel_workers_reproduce_sequential_report(fixture_dataset_dir, tmp_path):
    run_pipeline(echo_config(fixture_dataset_dir, tmp_path / "seq", workers=1))
    run_pipeline(echo_config(fixture_dataset_dir, tmp_path / "par", workers=4))
    assert (tmp_path / "seq" / "report.json").read_bytes() == \
        (tmp_path / "par" / "report.json").read_bytes()
    seq_lines = sorted((tmp_path / "seq" / "transcript.jsonl").read_text().splitlines())
    par_lines = sorted((tmp_path / "par" / "transcript.jsonl").read_text().splitlines())
    assert seq_lines == par_lines
