"""Render report JSON into Markdown tables and grid CSV."""

from __future__ import annotations

import csv
import io


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _table(headers: list[str], rows: list[list]) -> str:
    lines = ["| " + " | ".join(headers) + " |",
             "|" + "|".join("---" for _ in headers) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(_fmt(v) for v in row) + " |")
    return "\n".join(lines)


def render_markdown(report: dict) -> str:
    parts = ["# Run report", ""]
    parts.append(_table(
        ["metric", "value"],
        [
            ["stage-1 accuracy", report["stage1_accuracy"]],
            ["stage-2 accuracy", report["accuracy"]],
            ["example hit rate", report.get("example_hit_rate")],
            ["samples", report["sample_count"]],
            ["complete", report["complete"]],
        ],
    ))
    parts.append("")

    parts.append("## Candidate hit rate")
    parts.append(_table(
        ["k", "hit rate"],
        [[k, v] for k, v in sorted(report["hit_rate"].items(), key=lambda kv: int(kv[0]))],
    ))
    parts.append("")

    parts.append("## Prediction behaviors")
    parts.append(_table(
        ["behavior", "fraction", "stage-1 acc", "stage-2 acc"],
        [
            [name,
             report["behavior_fractions"][name],
             report["behavior_accuracy"][name]["stage1"],
             report["behavior_accuracy"][name]["stage2"]]
            for name in report["behavior_fractions"]
        ],
    ))
    parts.append("")

    parts.append("## Stage confusion")
    parts.append(_table(
        ["transition", "fraction"],
        [[name, value] for name, value in report["confusion"].items()],
    ))
    parts.append("")

    if report.get("per_category"):
        parts.append("## Per-category accuracy")
        parts.append(_table(
            ["category", "stage-1", "stage-2"],
            [
                [cat, accs["stage1"], accs["stage2"]]
                for cat, accs in report["per_category"].items()
            ],
        ))
        parts.append("")

    if report.get("cells"):
        parts.append("## Ablation grid")
        parts.append(_table(
            ["tag", "accuracy", "stage-1 acc", "hit rate", "example hit rate"],
            [
                [c["tag"], c["accuracy"], c["stage1_accuracy"],
                 _grid_hit(c), c["example_hit_rate"]]
                for c in report["cells"]
            ],
        ))
        parts.append("")

    if report.get("failed_sample_ids"):
        parts.append("## Failed samples")
        parts.extend(f"- {sid}" for sid in report["failed_sample_ids"])
        parts.append("")
    return "\n".join(parts)


def _grid_hit(cell: dict):
    hit = cell.get("hit_rate")
    if isinstance(hit, dict):
        if not hit:
            return None
        top = max(hit, key=lambda k: int(k))
        return hit[top]
    return hit


def render_grid_csv(cells: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tag", "config", "accuracy", "stage1_accuracy", "hit_rate", "example_hit_rate"])
    for cell in cells:
        writer.writerow([
            cell["tag"],
            ";".join(f"{k}={v}" for k, v in sorted(cell.get("config", {}).items())),
            _csv_val(cell["accuracy"]),
            _csv_val(cell["stage1_accuracy"]),
            _csv_val(_grid_hit(cell)),
            _csv_val(cell["example_hit_rate"]),
        ])
    return buf.getvalue()


def _csv_val(value) -> str:
    return "" if value is None else repr(value) if isinstance(value, float) else str(value)
