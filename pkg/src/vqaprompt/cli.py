"""Operator CLI: fixtures, heuristics, prompts, runs, ablations, eval, reports.

Exit codes: 0 success, 2 invariant violation, 3 gateway exhaustion,
4 configuration error (1 is reserved for unexpected crashes).
"""

from __future__ import annotations

import itertools
import json
import sys
from pathlib import Path

import click

from .artifacts import load_manifest, write_canonical_json
from .beam import TableScorer, beam_search
from .errors import (
    EXIT_CONFIG,
    EXIT_GATEWAY,
    EXIT_INVARIANT,
    EXIT_OK,
    ConfigError,
    GatewayError,
    InvariantViolation,
    VqaPromptError,
)
from .evaluation import ablation_grid
from .fixtures import FixtureSpec, generate_fixtures
from .pipeline import (
    DEFAULT_HIT_RATE_KS,
    RunConfig,
    build_all_prompts,
    compute_heuristics,
    make_run_config,
    parse_config_file,
    persist_heuristics,
    replay_eval,
    run_pipeline,
)
from .reporting import render_grid_csv, render_markdown


@click.group()
def cli() -> None:
    """Answer-heuristics prompting pipeline."""


@cli.command("gen-fixtures")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--test-count", default=200, show_default=True, type=int)
@click.option("--train-count", default=None, type=int,
              help="Defaults to 5x the test count.")
@click.option("--dim", default=64, show_default=True, type=int)
@click.option("--vocab-size", default=120, show_default=True, type=int)
def gen_fixtures_cmd(out_dir: str, seed: int, test_count: int,
                     train_count: int | None, dim: int, vocab_size: int) -> None:
    """Generate a deterministic synthetic dataset tree."""
    spec = FixtureSpec(seed=seed, test_count=test_count, train_count=train_count,
                       dim=dim, vocab_size=vocab_size)
    dataset = generate_fixtures(spec, out_dir)
    click.echo(f"wrote {dataset.name}: {len(dataset.samples)} samples under {out_dir}")


def _config_from_options(config_path: str | None, overrides: dict) -> RunConfig:
    base = parse_config_file(config_path) if config_path else {}
    base.update({k: v for k, v in overrides.items() if v is not None})
    return make_run_config(base)


_RUN_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                 help="Flat key=value config file; flags override."),
    click.option("--manifest", type=click.Path(), default=None),
    click.option("--out-dir", type=click.Path(), default=None),
    click.option("--task-format", type=str, default=None),
    click.option("--k", type=int, default=None),
    click.option("--n-examples", "n_examples", type=int, default=None),
    click.option("--queries", type=int, default=None),
    click.option("--strategy", type=str, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--gateway-mode", type=str, default=None),
    click.option("--mock-policy", type=str, default=None),
    click.option("--oracle-table", type=click.Path(), default=None),
    click.option("--script-table", type=click.Path(), default=None),
    click.option("--endpoint-url", type=str, default=None),
    click.option("--model", type=str, default=None),
    click.option("--api-key-env", type=str, default=None),
    click.option("--workers", type=int, default=None),
    click.option("--metric", type=str, default=None),
    click.option("--max-prompt-chars", "max_prompt_chars", type=int, default=None),
    click.option("--dump-prompts", "dump_prompts", type=click.Path(), default=None),
    click.option("--no-head", "include_head", flag_value=False, default=None),
    click.option("--no-scores", "include_scores", flag_value=False, default=None),
    click.option("--no-caption", "include_caption", flag_value=False, default=None),
]


def _with_run_options(fn):
    for option in reversed(_RUN_OPTIONS):
        fn = option(fn)
    return fn


@cli.command("heuristics")
@_with_run_options
@click.option("--scorer", "scorer_path", type=click.Path(exists=True), default=None,
              help="Run beam search over a synthetic scorer file instead of a manifest.")
@click.option("--beam-width", default=5, show_default=True, type=int)
@click.option("--max-len", default=4, show_default=True, type=int)
def heuristics_cmd(config_path, scorer_path, beam_width, max_len, **overrides) -> None:
    """Compute stage-1 candidates and example selections."""
    if scorer_path is not None:
        scorer = TableScorer.from_file(scorer_path)
        candidates = beam_search(scorer, beam_width, max_len)
        for cand in candidates:
            click.echo(f"{cand.answer}\t{cand.score:.6f}\t{cand.log_score:.6f}")
        return
    config = _config_from_options(config_path, overrides)
    dataset = load_manifest(config.manifest)
    heur = compute_heuristics(dataset, config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    persist_heuristics(out, heur)
    click.echo(f"wrote candidates and selections for {len(heur.eval_candidates)} test samples")


@cli.command("prompts")
@_with_run_options
def prompts_cmd(config_path, **overrides) -> None:
    """Render prompt bundles; use --dump-prompts DIR to write .txt files."""
    config = _config_from_options(config_path, overrides)
    dataset = load_manifest(config.manifest)
    heur = compute_heuristics(dataset, config)
    bundles = build_all_prompts(dataset, heur, config)
    if config.dump_prompts:
        dump = Path(config.dump_prompts)
        dump.mkdir(parents=True, exist_ok=True)
        for sid, bundle in sorted(bundles.items()):
            for t, prompt in enumerate(bundle.prompts):
                (dump / f"{sid}_q{t}.txt").write_text(prompt, encoding="utf-8")
        click.echo(f"dumped {sum(len(b.prompts) for b in bundles.values())} prompts to {dump}")
    else:
        click.echo(f"built {len(bundles)} prompt bundles (use --dump-prompts to write them)")


@cli.command("run")
@_with_run_options
def run_cmd(config_path, **overrides) -> None:
    """Full pipeline: heuristics, prompts, completions, voting, report."""
    config = _config_from_options(config_path, overrides)
    result = run_pipeline(config)
    click.echo(
        f"stage-1 accuracy {result.report.stage1_accuracy:.4f}, "
        f"stage-2 accuracy {result.report.accuracy:.4f} "
        f"({result.report.sample_count} samples)"
    )
    if result.failed:
        click.echo(f"{len(result.failed)} samples failed at the gateway", err=True)
        sys.exit(EXIT_GATEWAY)


@cli.command("ablate")
@_with_run_options
@click.option("--sweep", "sweeps", multiple=True,
              help="Axis spec key=v1,v2,...; repeat for a Cartesian sweep.")
def ablate_cmd(config_path, sweeps, **overrides) -> None:
    """Run one pipeline per sweep cell and merge the grid."""
    if not sweeps:
        raise ConfigError("ablate needs at least one --sweep axis")
    base = parse_config_file(config_path) if config_path else {}
    base.update({k: v for k, v in overrides.items() if v is not None})
    if "out_dir" not in base:
        raise ConfigError("ablate needs out_dir")
    grid_root = Path(base["out_dir"])

    axes: list[tuple[str, list]] = []
    for sweep in sweeps:
        if "=" not in sweep:
            raise ConfigError(f"bad sweep spec {sweep!r}, expected key=v1,v2")
        key, values = sweep.split("=", 1)
        parsed = []
        for v in values.split(","):
            try:
                parsed.append(json.loads(v))
            except json.JSONDecodeError:
                parsed.append(v)
        axes.append((key.strip(), parsed))

    cells = []
    gateway_failures = False
    for combo in itertools.product(*(values for _, values in axes)):
        assignment = dict(zip((key for key, _ in axes), combo))
        tag = ",".join(f"{k}={v}" for k, v in assignment.items())
        cell_dir = grid_root / ("cell_" + tag.replace("/", "_").replace(",", "__").replace("=", "-"))
        cell_cfg = dict(base)
        cell_cfg.update(assignment)
        cell_cfg["out_dir"] = str(cell_dir)
        # The grid's hit-rate column reports the rate at the cell's own k.
        cell_k = int(cell_cfg.get("k", 10))
        ks = set(cell_cfg.get("hit_rate_ks", DEFAULT_HIT_RATE_KS))
        if cell_k >= 1:
            ks.add(cell_k)
        cell_cfg["hit_rate_ks"] = sorted(ks)
        config = make_run_config(cell_cfg)
        cell: dict = {"tag": tag, "config": assignment}
        try:
            result = run_pipeline(config)
            report = result.report
            if result.failed:
                gateway_failures = True
            scalar = report.hit_rate.get(config.k) if config.k >= 1 else None
            cell.update({
                "accuracy": report.accuracy,
                "stage1_accuracy": report.stage1_accuracy,
                "hit_rate": scalar,
                "hit_rate_map": {str(k): v for k, v in sorted(report.hit_rate.items())},
                "example_hit_rate": report.example_hit_rate,
            })
        except GatewayError:
            gateway_failures = True
            cell.update({"accuracy": None, "stage1_accuracy": None,
                         "hit_rate": None, "example_hit_rate": None})
        cells.append(cell)

    grid = ablation_grid(cells)
    grid_root.mkdir(parents=True, exist_ok=True)
    write_canonical_json({"cells": grid}, grid_root / "grid.json")
    (grid_root / "grid.csv").write_text(render_grid_csv(grid), encoding="utf-8")
    click.echo(f"wrote {len(grid)} grid cells to {grid_root}")
    if gateway_failures:
        sys.exit(EXIT_GATEWAY)


@cli.command("eval")
@click.option("--run-dir", required=True, type=click.Path(exists=True))
@click.option("--no-verify-prompts", "verify", flag_value=False, default=True)
def eval_cmd(run_dir: str, verify: bool) -> None:
    """Recompute the report from a run directory's transcript."""
    report = replay_eval(run_dir, verify_prompts=verify)
    click.echo(
        f"stage-1 accuracy {report.stage1_accuracy:.4f}, "
        f"stage-2 accuracy {report.accuracy:.4f} ({report.sample_count} samples)"
    )


@cli.command("report")
@click.option("--run-dir", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["md", "csv"]), default="md",
              show_default=True)
def report_cmd(run_dir: str, fmt: str) -> None:
    """Render report.json (or grid.json) to Markdown or CSV."""
    run_path = Path(run_dir)
    report_path = run_path / "report.json"
    grid_path = run_path / "grid.json"
    if fmt == "csv":
        if grid_path.exists():
            click.echo(render_grid_csv(json.loads(grid_path.read_text())["cells"]), nl=False)
            return
        raise ConfigError(f"no grid.json under {run_dir} for CSV export")
    if report_path.exists():
        click.echo(render_markdown(json.loads(report_path.read_text())))
        return
    if grid_path.exists():
        click.echo(render_grid_csv(json.loads(grid_path.read_text())["cells"]), nl=False)
        return
    raise ConfigError(f"no report.json or grid.json under {run_dir}")


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        sys.exit(EXIT_CONFIG)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except InvariantViolation as exc:
        click.echo(f"invariant violation: {exc}", err=True)
        sys.exit(EXIT_INVARIANT)
    except GatewayError as exc:
        click.echo(f"gateway error: {exc}", err=True)
        sys.exit(EXIT_GATEWAY)
    except VqaPromptError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except SystemExit:
        raise
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
