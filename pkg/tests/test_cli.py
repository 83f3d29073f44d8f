from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from vqaprompt.fixtures import FixtureSpec, generate_fixtures


def run_cli(*args: str) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "vqaprompt.cli", *args],
        capture_output=True, text=True,
    )


@pytest.fixture(scope="module")
def cli_fixture_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("cli_fixture")
    generate_fixtures(FixtureSpec(seed=3, test_count=6, train_count=40, dim=16,
                                  vocab_size=15), out)
    return out


def test_gen_fixtures_command(tmp_path):
    proc = run_cli("gen-fixtures", "--out", str(tmp_path / "fx"), "--seed", "9",
                   "--test-count", "4", "--train-count", "20", "--dim", "8",
                   "--vocab-size", "12")
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "fx" / "manifest.json").exists()
    assert (tmp_path / "fx" / "banks" / "fused.prfb").exists()


def test_run_eval_report_cycle(cli_fixture_dir, tmp_path):
    out = tmp_path / "run"
    proc = run_cli(
        "run", "--manifest", str(cli_fixture_dir / "manifest.json"),
        "--out-dir", str(out), "--k", "5", "--n-examples", "2", "--queries", "3",
        "--strategy", "fused", "--gateway-mode", "mock", "--mock-policy", "echo_top1",
    )
    assert proc.returncode == 0, proc.stderr
    assert "stage-2 accuracy" in proc.stdout
    report_bytes = (out / "report.json").read_bytes()

    proc = run_cli("eval", "--run-dir", str(out))
    assert proc.returncode == 0, proc.stderr
    assert (out / "report.json").read_bytes() == report_bytes

    proc = run_cli("report", "--run-dir", str(out))
    assert proc.returncode == 0, proc.stderr
    assert "## Candidate hit rate" in proc.stdout


def test_run_with_config_file_and_override(cli_fixture_dir, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"manifest = {cli_fixture_dir / 'manifest.json'}\n"
        f"out_dir = {tmp_path / 'cfg_run'}\n"
        "k = 5\nn_examples = 2\nqueries = 2\n"
        "gateway_mode = mock\nmock_policy = echo_top1\n"
    )
    proc = run_cli("run", "--config", str(cfg), "--queries", "1")
    assert proc.returncode == 0, proc.stderr
    snapshot = json.loads((tmp_path / "cfg_run" / "config_snapshot.json").read_text())
    assert snapshot["queries"] == 1  # flag overrides file
    assert snapshot["k"] == 5


def test_heuristics_command(cli_fixture_dir, tmp_path):
    proc = run_cli(
        "heuristics", "--manifest", str(cli_fixture_dir / "manifest.json"),
        "--out-dir", str(tmp_path / "heur"), "--k", "5", "--n-examples", "2",
        "--queries", "2",
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "heur" / "candidates.json").exists()
    assert (tmp_path / "heur" / "selections.json").exists()


def test_heuristics_beam_mode(cli_fixture_dir):
    proc = run_cli("heuristics", "--scorer", str(cli_fixture_dir / "scorer.json"),
                   "--beam-width", "3", "--max-len", "5")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip()


def test_prompts_dump(cli_fixture_dir, tmp_path):
    proc = run_cli(
        "prompts", "--manifest", str(cli_fixture_dir / "manifest.json"),
        "--out-dir", str(tmp_path / "unused"), "--k", "5", "--n-examples", "2",
        "--queries", "2", "--dump-prompts", str(tmp_path / "dump"),
    )
    assert proc.returncode == 0, proc.stderr
    assert len(list((tmp_path / "dump").glob("*.txt"))) == 6 * 2


def test_ablate_sweep(cli_fixture_dir, tmp_path):
    out = tmp_path / "grid"
    proc = run_cli(
        "ablate", "--manifest", str(cli_fixture_dir / "manifest.json"),
        "--out-dir", str(out), "--n-examples", "2", "--queries", "2",
        "--gateway-mode", "mock", "--mock-policy", "echo_top1",
        "--sweep", "k=1,5",
    )
    assert proc.returncode == 0, proc.stderr
    grid = json.loads((out / "grid.json").read_text())["cells"]
    assert [c["tag"] for c in grid] == ["k=1", "k=5"]
    assert all(c["accuracy"] is not None for c in grid)
    assert (out / "grid.csv").read_text().startswith("tag,")

    proc = run_cli("report", "--run-dir", str(out), "--format", "csv")
    assert proc.returncode == 0
    assert proc.stdout.startswith("tag,")


def test_config_error_exit_code(tmp_path):
    proc = run_cli("run", "--manifest", str(tmp_path / "missing.json"),
                   "--out-dir", str(tmp_path / "o"), "--strategy", "rand")
    assert proc.returncode == 4
    assert "seed" in proc.stderr


def test_gateway_exhaustion_exit_code(cli_fixture_dir, tmp_path):
    script = tmp_path / "empty.json"
    script.write_text("{}")
    proc = run_cli(
        "run", "--manifest", str(cli_fixture_dir / "manifest.json"),
        "--out-dir", str(tmp_path / "run"), "--k", "5", "--n-examples", "2",
        "--queries", "1", "--gateway-mode", "mock", "--mock-policy", "scripted",
        "--script-table", str(script),
    )
    assert proc.returncode == 3
    assert "failed at the gateway" in proc.stderr


def test_unknown_flag_exit_code():
    proc = run_cli("run", "--bogus-flag", "1")
    assert proc.returncode == 4


def test_invariant_violation_exit_code(monkeypatch, tmp_path):
    import vqaprompt.cli as cli_mod
    from vqaprompt.errors import InvariantViolation

    (tmp_path / "run").mkdir()

    def boom(run_dir, verify_prompts=True):
        raise InvariantViolation("fractions do not sum to 1")

    monkeypatch.setattr(cli_mod, "replay_eval", boom)
    monkeypatch.setattr(sys, "argv", ["vqaprompt", "eval", "--run-dir", str(tmp_path / "run")])
    with pytest.raises(SystemExit) as exc:
        cli_mod.main()
    assert exc.value.code == 2
