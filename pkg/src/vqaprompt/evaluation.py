"""Metrics and analyses: soft accuracy, hit rates, behaviors, confusion, grids.

The soft score of a prediction is ``min(matching_annotators / 3, 1)`` over the
sample's ten normalized annotator answers; the ``official`` metric variant
averages that quantity over the ten leave-one-annotator-out subsets. All
string comparison goes through ``voting.normalize_answer``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .artifacts import EVAL_ANNOTATOR_COUNT, AnswerCandidate, Sample
from .errors import InvariantViolation, VqaPromptError
from .voting import normalize_answer, project_to_choice

BEHAVIOR_CLASSES = ("keep_top1", "in_top_2_to_k", "beyond_top_k")
CONFUSION_CELLS = (
    "correct_to_correct",
    "correct_to_wrong",
    "wrong_to_correct",
    "wrong_to_wrong",
)
PARTITION_TOL = 1e-12


def _mean(values: Sequence[float]) -> float:
    if not values:
        return 0.0
    return sum(values) / len(values)


def normalized_answer_counts(sample: Sample) -> dict[str, int]:
    counts: dict[str, int] = {}
    for a in sample.answers:
        key = normalize_answer(a)
        counts[key] = counts.get(key, 0) + 1
    return counts


def soft_score(prediction: str, sample: Sample, metric: str = "simple") -> float:
    """Soft credit of a predicted answer against the sample's annotations."""
    if len(sample.answers) != EVAL_ANNOTATOR_COUNT:
        raise VqaPromptError(
            f"sample {sample.id!r}: evaluation needs exactly {EVAL_ANNOTATOR_COUNT} "
            f"annotator answers, got {len(sample.answers)}"
        )
    pred = normalize_answer(prediction)
    matches = [normalize_answer(a) == pred for a in sample.answers]
    n_match = sum(matches)
    if metric == "simple":
        return min(n_match / 3.0, 1.0)
    if metric == "official":
        # Average over the ten leave-one-annotator-out subsets.
        total = 0.0
        for left_out in range(EVAL_ANNOTATOR_COUNT):
            subset_matches = n_match - (1 if matches[left_out] else 0)
            total += min(subset_matches / 3.0, 1.0)
        return total / EVAL_ANNOTATOR_COUNT
    raise VqaPromptError(f"unknown metric {metric!r}")


def soft_score_table(sample: Sample) -> dict[str, float]:
    """Map of normalized answer -> soft score for every annotated answer."""
    return {
        ans: min(count / 3.0, 1.0)
        for ans, count in normalized_answer_counts(sample).items()
    }


def hit_rate(
    candidate_table: Mapping[str, Sequence[AnswerCandidate]],
    samples: Sequence[Sample],
    k: int,
    metric: str = "simple",
) -> float:
    """Mean over samples of the best soft score among the top-k candidates."""
    if k < 1:
        raise VqaPromptError(f"hit rate needs k >= 1, got {k}")
    per_sample = []
    for sample in samples:
        cands = candidate_table.get(sample.id, ())
        per_sample.append(
            max((soft_score(c.answer, sample, metric) for c in cands[:k]), default=0.0)
        )
    return _mean(per_sample)


def example_hit_rate(
    selections: Mapping[str, Sequence[str]],
    samples: Sequence[Sample],
    gold_of: Mapping[str, str],
    metric: str = "simple",
) -> float:
    """Mean best soft score of the selected examples' gold answers.

    ``selections`` maps test ids to selected training ids and ``gold_of`` maps
    training ids to their modal answer.
    """
    per_sample = []
    for sample in samples:
        ids = selections.get(sample.id, ())
        per_sample.append(
            max((soft_score(gold_of[i], sample, metric) for i in ids), default=0.0)
        )
    return _mean(per_sample)


def behavior_classify(
    final_answer: str, candidates: Sequence[AnswerCandidate], k: int
) -> str:
    """Class of the final answer relative to the candidate list."""
    if k > 0 and not candidates:
        raise VqaPromptError("behavior classification needs candidates when k > 0")
    final = normalize_answer(final_answer)
    if candidates and final == normalize_answer(candidates[0].answer):
        return "keep_top1"
    for cand in candidates[1:k]:
        if final == normalize_answer(cand.answer):
            return "in_top_2_to_k"
    return "beyond_top_k"


def stage_confusion(
    stage1_scores: Mapping[str, float],
    stage2_scores: Mapping[str, float],
    tau: float = 1.0,
) -> dict[str, float]:
    """2x2 fractions of correct/wrong transitions between the stages.

    A prediction counts correct when its soft score >= tau.
    """
    if not 0 < tau <= 1:
        raise VqaPromptError(f"tau must be in (0, 1], got {tau}")
    if set(stage1_scores) != set(stage2_scores):
        raise VqaPromptError("stage-1 and stage-2 sample ids are misaligned")
    counts = dict.fromkeys(CONFUSION_CELLS, 0)
    for sid, s1 in stage1_scores.items():
        first = "correct" if s1 >= tau else "wrong"
        second = "correct" if stage2_scores[sid] >= tau else "wrong"
        counts[f"{first}_to_{second}"] += 1
    total = len(stage1_scores)
    return {cell: counts[cell] / total for cell in CONFUSION_CELLS}


@dataclass
class SampleOutcome:
    """Everything the report needs about one test sample."""

    sample_id: str
    category: str
    stage1_answer: str
    stage1_score: float
    final_answer: str
    stage2_score: float
    behavior: str


@dataclass
class EvalReport:
    accuracy: float
    stage1_accuracy: float
    hit_rate: dict[int, float]
    behavior_fractions: dict[str, float]
    behavior_accuracy: dict[str, dict[str, float]]
    confusion: dict[str, float]
    per_category: dict[str, dict[str, float]]
    sample_count: int
    failed_sample_ids: list[str] = field(default_factory=list)
    example_hit_rate: float | None = None
    cells: list[dict] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.failed_sample_ids

    def check_invariants(self) -> None:
        if abs(sum(self.behavior_fractions.values()) - 1.0) > PARTITION_TOL:
            raise InvariantViolation("behavior fractions do not sum to 1")
        if abs(sum(self.confusion.values()) - 1.0) > PARTITION_TOL:
            raise InvariantViolation("confusion fractions do not sum to 1")
        for name, value in [("accuracy", self.accuracy), ("stage1_accuracy", self.stage1_accuracy)]:
            if not 0.0 <= value <= 1.0:
                raise InvariantViolation(f"{name} {value} outside [0, 1]")
        for k, rate in self.hit_rate.items():
            if not 0.0 <= rate <= 1.0:
                raise InvariantViolation(f"hit_rate@{k} {rate} outside [0, 1]")
        ks = sorted(self.hit_rate)
        for a, b in zip(ks, ks[1:]):
            if self.hit_rate[b] < self.hit_rate[a]:
                raise InvariantViolation(
                    f"hit_rate@{b} < hit_rate@{a} violates monotonicity"
                )

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "stage1_accuracy": self.stage1_accuracy,
            "hit_rate": {str(k): v for k, v in sorted(self.hit_rate.items())},
            "behavior_fractions": self.behavior_fractions,
            "behavior_accuracy": self.behavior_accuracy,
            "confusion": self.confusion,
            "per_category": self.per_category,
            "sample_count": self.sample_count,
            "failed_sample_ids": sorted(self.failed_sample_ids),
            "example_hit_rate": self.example_hit_rate,
            "complete": self.complete,
            "cells": self.cells,
        }


def evaluate_outcomes(
    outcomes: Sequence[SampleOutcome],
    candidate_table: Mapping[str, Sequence[AnswerCandidate]],
    samples: Sequence[Sample],
    hit_rate_ks: Sequence[int],
    tau: float = 1.0,
    metric: str = "simple",
    failed_sample_ids: Sequence[str] = (),
    example_hit: float | None = None,
) -> EvalReport:
    """Fold per-sample outcomes into the full report (deterministic order)."""
    by_id = {o.sample_id: o for o in outcomes}
    ordered = [by_id[s.id] for s in samples if s.id in by_id]

    stage1_scores = [o.stage1_score for o in ordered]
    stage2_scores = [o.stage2_score for o in ordered]

    behavior_counts = dict.fromkeys(BEHAVIOR_CLASSES, 0)
    behavior_s1: dict[str, list[float]] = {b: [] for b in BEHAVIOR_CLASSES}
    behavior_s2: dict[str, list[float]] = {b: [] for b in BEHAVIOR_CLASSES}
    per_cat_s1: dict[str, list[float]] = {}
    per_cat_s2: dict[str, list[float]] = {}
    for o in ordered:
        behavior_counts[o.behavior] += 1
        behavior_s1[o.behavior].append(o.stage1_score)
        behavior_s2[o.behavior].append(o.stage2_score)
        per_cat_s1.setdefault(o.category, []).append(o.stage1_score)
        per_cat_s2.setdefault(o.category, []).append(o.stage2_score)

    n = len(ordered)
    eligible = [s for s in samples if s.id in by_id]
    report = EvalReport(
        accuracy=_mean(stage2_scores),
        stage1_accuracy=_mean(stage1_scores),
        hit_rate={
            k: hit_rate(candidate_table, eligible, k, metric) for k in hit_rate_ks
        },
        behavior_fractions={b: behavior_counts[b] / n if n else 0.0 for b in BEHAVIOR_CLASSES},
        behavior_accuracy={
            b: {"stage1": _mean(behavior_s1[b]), "stage2": _mean(behavior_s2[b])}
            for b in BEHAVIOR_CLASSES
        },
        confusion=stage_confusion(
            {o.sample_id: o.stage1_score for o in ordered},
            {o.sample_id: o.stage2_score for o in ordered},
            tau,
        ) if ordered else dict.fromkeys(CONFUSION_CELLS, 0.0),
        per_category={
            cat: {"stage1": _mean(per_cat_s1[cat]), "stage2": _mean(per_cat_s2[cat])}
            for cat in sorted(per_cat_s1)
        },
        sample_count=n,
        failed_sample_ids=list(failed_sample_ids),
        example_hit_rate=example_hit,
    )
    if ordered:
        report.check_invariants()
    return report


def mc_accuracy(
    predictions: Mapping[str, str], samples: Sequence[Sample]
) -> float:
    """Multiple-choice accuracy: predicted choice index vs the gold choice.

    The gold index is the projection of the modal annotator answer onto the
    sample's choices.
    """
    scores = []
    for sample in samples:
        if sample.id not in predictions or not sample.choices:
            continue
        gold_idx = project_to_choice(sample.modal_answer(), sample.choices)
        pred_idx = project_to_choice(predictions[sample.id], sample.choices)
        scores.append(1.0 if pred_idx == gold_idx else 0.0)
    return _mean(scores)


# --------------------------------------------------------------------------
# Ablation grids


def ablation_grid(cells: Sequence[dict]) -> list[dict]:
    """Merge tagged run cells into one grid; duplicate tags are an error and
    cells whose run produced no report keep explicit null metrics."""
    seen: set[str] = set()
    grid = []
    for cell in cells:
        tag = cell.get("tag")
        if tag is None:
            raise VqaPromptError("ablation cell is missing its config tag")
        if tag in seen:
            raise VqaPromptError(f"duplicate ablation cell tag {tag!r}")
        seen.add(tag)
        grid.append({
            "tag": tag,
            "config": cell.get("config", {}),
            "accuracy": cell.get("accuracy"),
            "stage1_accuracy": cell.get("stage1_accuracy"),
            "hit_rate": cell.get("hit_rate"),
            "example_hit_rate": cell.get("example_hit_rate"),
        })
    return grid
