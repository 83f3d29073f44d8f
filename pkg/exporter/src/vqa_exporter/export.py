"""Batch export of adapter tensors into the portable artifact files."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adapters import Adapter
from .formats import (
    write_candidate_table,
    write_feature_bank,
    write_grouped_bank,
    write_vocabulary,
)

FLAT_KINDS = ("fused", "question", "image", "answer_logits")


class ExportError(RuntimeError):
    pass


@dataclass
class ExportJob:
    adapter: Adapter
    out_dir: str | Path
    kinds: tuple[str, ...] = FLAT_KINDS
    export_answer_words: bool = True
    candidate_k: int = 10
    batch_size: int = 64


def _validate(sample_id: str, name: str, array: np.ndarray, dim: int | None) -> np.ndarray:
    array = np.asarray(array, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise ExportError(f"non-finite activation in {name!r} for sample {sample_id!r}")
    if dim is not None and array.shape[-1] != dim:
        raise ExportError(
            f"{name!r} for sample {sample_id!r} has dim {array.shape[-1]}, "
            f"declared {dim}"
        )
    return array


def export(job: ExportJob) -> dict[str, Path]:
    """Run the adapter over its samples and write every requested artifact.

    Returns a map of artifact name to written path. Aborts on the first
    non-finite activation or shape mismatch, naming the offending sample.
    """
    adapter = job.adapter
    out = Path(job.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = list(adapter.sample_ids)
    if not ids:
        raise ExportError("adapter exposes no samples")

    flat: dict[str, list[np.ndarray]] = {k: [] for k in job.kinds}
    groups: list[np.ndarray] = []
    candidates: dict[str, list[tuple[str, float]]] = {}

    for start in range(0, len(ids), job.batch_size):
        for sample_id in ids[start : start + job.batch_size]:
            tensors = adapter.forward(sample_id)
            for kind in job.kinds:
                if kind not in tensors:
                    raise ExportError(f"adapter emits no {kind!r} tensor")
                dim = len(adapter.answers) if kind == "answer_logits" else adapter.feature_dim
                flat[kind].append(_validate(sample_id, kind, tensors[kind], dim))
            if job.export_answer_words:
                group = _validate(sample_id, "answer_words",
                                  tensors["answer_words"], adapter.feature_dim)
                if group.ndim != 2 or group.shape[0] < 1:
                    raise ExportError(
                        f"answer_words for sample {sample_id!r} must be (L>=1, dim)"
                    )
                groups.append(group)
            if "answer_logits" in job.kinds and job.candidate_k > 0:
                logits = flat["answer_logits"][-1]
                order = np.argsort(-logits, kind="stable")[: job.candidate_k]
                candidates[sample_id] = [
                    (adapter.answers[int(i)], float(logits[int(i)])) for i in order
                ]

    written: dict[str, Path] = {}
    for kind in job.kinds:
        path = out / f"{kind}.prfb"
        write_feature_bank(path, kind, ids, np.stack(flat[kind]))
        written[kind] = path
    if job.export_answer_words:
        path = out / "answer_words.prfg"
        write_grouped_bank(path, "fused", ids, groups)
        written["answer_words"] = path

    vocab_path = out / "vocab.txt"
    write_vocabulary(vocab_path, adapter.answers)
    written["vocab"] = vocab_path
    if hasattr(adapter, "word_vocab"):
        word_path = out / "word_vocab.txt"
        write_vocabulary(word_path, adapter.word_vocab)
        written["word_vocab"] = word_path
    if candidates:
        cand_path = out / "candidates.json"
        write_candidate_table(cand_path, candidates)
        written["candidates"] = cand_path
    return written
