"""Stage-1 heuristics: answer candidates and answer-aware example selection.

Candidates come from a score vector over the answer vocabulary (discriminative
path) or from beam search over an autoregressive scorer (see ``beam``).
Examples are the nearest training samples in a latent feature space, under
cosine similarity for flat banks and mean pairwise cosine for ragged groups.

All similarity math runs in float64 regardless of the float32 storage
precision. Ties break by ascending row index everywhere, which makes every
operation here a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .artifacts import AnswerCandidate, AnswerVocabulary, FeatureBank, GroupedFeatureBank
from .errors import HeuristicsError

SELECTION_STRATEGIES = ("rand", "ques_img", "fused", "fused_ques_img", "answer_logits")

# Bank kinds each multi-bank strategy averages over.
_STRATEGY_BANKS = {
    "ques_img": ("question", "image"),
    "fused": ("fused",),
    "fused_ques_img": ("fused", "question", "image"),
    "answer_logits": ("answer_logits",),
}


@dataclass(frozen=True)
class ExampleSelection:
    """Ranked training neighbors for one testing sample."""

    test_sample_id: str
    neighbor_ids: tuple[str, ...]
    similarities: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.neighbor_ids) != len(self.similarities):
            raise HeuristicsError("neighbor ids and similarities must align")
        if len(set(self.neighbor_ids)) != len(self.neighbor_ids):
            raise HeuristicsError("neighbor ids must be unique")
        if self.test_sample_id in self.neighbor_ids:
            raise HeuristicsError("selection must not contain the test sample itself")
        for a, b in zip(self.similarities, self.similarities[1:]):
            if b > a:
                raise HeuristicsError("similarities must be non-increasing")


def top_k_candidates(
    logits: np.ndarray | Sequence[float],
    vocab: AnswerVocabulary,
    k: int,
) -> list[AnswerCandidate]:
    """Top-k vocabulary answers by score, ties by ascending vocabulary index."""
    scores = np.asarray(logits, dtype=np.float64)
    if scores.ndim != 1:
        raise HeuristicsError(f"logits must be 1-D, got shape {scores.shape}")
    if scores.shape[0] != vocab.size:
        raise HeuristicsError(
            f"logits length {scores.shape[0]} != vocabulary size {vocab.size}"
        )
    if k < 1:
        raise HeuristicsError(f"k must be positive, got {k}")
    if k > vocab.size:
        raise HeuristicsError(f"k={k} exceeds vocabulary size {vocab.size}")
    if not np.all(np.isfinite(scores)):
        bad = int(np.flatnonzero(~np.isfinite(scores))[0])
        raise HeuristicsError(f"non-finite logit at index {bad}")
    if np.any(scores <= 0) or np.any(scores > 1):
        raise HeuristicsError("logits must be confidence scores in (0, 1]")
    order = np.argsort(-scores, kind="stable")[:k]
    return [AnswerCandidate(vocab.entries[int(i)], float(scores[int(i)])) for i in order]


def stage1_top1(candidates: Sequence[AnswerCandidate]) -> AnswerCandidate:
    """The stage-1 prediction: the highest-scoring candidate."""
    if not candidates:
        raise HeuristicsError("candidate list is empty")
    return candidates[0]


def _as_query(query: np.ndarray | Sequence[float], dim: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != dim:
        raise HeuristicsError(f"query dim {q.shape[0]} != bank dim {dim}")
    norm = float(np.linalg.norm(q))
    if norm == 0.0:
        raise HeuristicsError("query vector has zero norm")
    return q / norm


def _cosine_scores(bank: FeatureBank, unit_query: np.ndarray) -> np.ndarray:
    """Cosine of the unit query against every row; zero-norm rows get -inf."""
    rows = bank.rows.astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    sims = rows @ unit_query
    nonzero = norms > 0.0
    sims[nonzero] = sims[nonzero] / norms[nonzero]
    sims[~nonzero] = -np.inf
    return sims


def _select_top(
    bank_ids: Sequence[str],
    sims: np.ndarray,
    n: int,
    exclude: set[str],
    test_sample_id: str,
) -> ExampleSelection:
    usable = np.array(
        [sid not in exclude and np.isfinite(sims[i]) for i, sid in enumerate(bank_ids)]
    )
    available = int(usable.sum())
    if n > available:
        raise HeuristicsError(
            f"requested {n} neighbors but only {available} usable bank entries"
        )
    masked = np.where(usable, sims, -np.inf)
    order = np.argsort(-masked, kind="stable")[:n]
    return ExampleSelection(
        test_sample_id=test_sample_id,
        neighbor_ids=tuple(bank_ids[int(i)] for i in order),
        similarities=tuple(float(masked[int(i)]) for i in order),
    )


def cosine_knn(
    query: np.ndarray | Sequence[float],
    bank: FeatureBank,
    n: int,
    exclude: Iterable[str] = (),
    test_sample_id: str = "",
) -> ExampleSelection:
    """Top-n bank rows by cosine similarity, ties by ascending row index."""
    if n < 1:
        raise HeuristicsError(f"n must be positive, got {n}")
    unit_query = _as_query(query, bank.dim)
    exclude_set = {sid for sid in exclude if bank.has_id(sid)}
    return _select_top(bank.sample_ids, _cosine_scores(bank, unit_query), n, exclude_set, test_sample_id)


def group_similarity(group_a: np.ndarray, group_b: np.ndarray) -> float:
    """Mean pairwise cosine between the rows of two feature groups.

    Symmetric in its arguments and bounded to [-1, 1].
    """
    a = np.asarray(group_a, dtype=np.float64)
    b = np.asarray(group_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise HeuristicsError("groups must be 2-D arrays")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise HeuristicsError("groups must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise HeuristicsError(f"group dims differ: {a.shape[1]} vs {b.shape[1]}")
    return float(np.dot(_unit_mean(a, "first"), _unit_mean(b, "second")))


def _unit_mean(group: np.ndarray, which: str) -> np.ndarray:
    # Sum_jk cos(a_j, b_k) factorizes through the per-group means of the
    # row-normalized vectors, so each group reduces to one vector.
    norms = np.linalg.norm(group, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise HeuristicsError(f"zero-norm row {int(zero[0])} in {which} group")
    return (group / norms[:, None]).mean(axis=0)


def grouped_knn(
    query_group: np.ndarray,
    bank: GroupedFeatureBank,
    n: int,
    exclude: Iterable[str] = (),
    test_sample_id: str = "",
) -> ExampleSelection:
    """Top-n groups by mean pairwise cosine against the query group."""
    if n < 1:
        raise HeuristicsError(f"n must be positive, got {n}")
    q = np.asarray(query_group, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] == 0:
        raise HeuristicsError("query group must be a non-empty 2-D array")
    if q.shape[1] != bank.dim:
        raise HeuristicsError(f"query group dim {q.shape[1]} != bank dim {bank.dim}")
    q_mean = _unit_mean(q, "query")
    sims = np.empty(bank.count, dtype=np.float64)
    for i in range(bank.count):
        group = bank.group(i).astype(np.float64)
        sims[i] = float(np.dot(q_mean, _unit_mean(group, f"bank group {i}")))
    exclude_set = {sid for sid in exclude if bank.has_id(sid)}
    return _select_top(bank.sample_ids, sims, n, exclude_set, test_sample_id)


def combined_knn(
    test_sample_id: str,
    strategy: str,
    queries: Mapping[str, np.ndarray | Sequence[float]],
    banks: Mapping[str, FeatureBank],
    n: int,
    seed: int | None = None,
    exclude: Iterable[str] = (),
) -> ExampleSelection:
    """Select n training neighbors under one of the named strategies.

    ``rand`` ignores features and draws n distinct ids from a generator seeded
    with ``seed``. Multi-bank strategies score every training sample by the
    arithmetic mean of per-bank cosine similarities; single-bank strategies
    reduce to ``cosine_knn``. All banks must enumerate the same ids in the
    same order.
    """
    if strategy not in SELECTION_STRATEGIES:
        raise HeuristicsError(
            f"unknown strategy {strategy!r}, expected one of {SELECTION_STRATEGIES}"
        )
    if strategy == "rand":
        if seed is None:
            raise HeuristicsError("strategy 'rand' requires a seed")
        if not banks:
            raise HeuristicsError("strategy 'rand' needs at least one bank for the id universe")
        ids = next(iter(banks.values())).sample_ids
        exclude_set = set(exclude) | {test_sample_id}
        pool = [sid for sid in ids if sid not in exclude_set]
        if n > len(pool):
            raise HeuristicsError(f"requested {n} neighbors but only {len(pool)} available")
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(pool), size=n, replace=False)
        return ExampleSelection(
            test_sample_id=test_sample_id,
            neighbor_ids=tuple(pool[int(i)] for i in picks),
            similarities=tuple(0.0 for _ in range(n)),
        )

    needed = _STRATEGY_BANKS[strategy]
    for kind in needed:
        if kind not in banks:
            raise HeuristicsError(f"strategy {strategy!r} requires a {kind!r} bank")
        if kind not in queries:
            raise HeuristicsError(f"strategy {strategy!r} requires a {kind!r} query vector")

    if len(needed) == 1:
        kind = needed[0]
        return cosine_knn(queries[kind], banks[kind], n, exclude=set(exclude) | {test_sample_id},
                          test_sample_id=test_sample_id)

    first = banks[needed[0]]
    for kind in needed[1:]:
        if banks[kind].sample_ids != first.sample_ids:
            raise HeuristicsError("strategy banks must enumerate identical ids in identical order")
    sims = np.zeros(first.count, dtype=np.float64)
    for kind in needed:
        sims += _cosine_scores(banks[kind], _as_query(queries[kind], banks[kind].dim))
    sims /= len(needed)
    exclude_set = {sid for sid in set(exclude) | {test_sample_id} if first.has_id(sid)}
    return _select_top(first.sample_ids, sims, n, exclude_set, test_sample_id)
