"""Model adapters: the minimal bridge between a checkpoint and the exporter.

An adapter exposes its sample universe, its answer vocabulary, and
``forward(sample_id) -> {tensor name: array}``. Generative adapters
additionally answer ``next_distribution(prefix)`` over their word vocabulary
for the scorer server. Real checkpoints wrap their framework code behind this
interface; the adapters here are tiny deterministic stand-ins used for
integration testing and dry runs.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import numpy as np

from .formats import BOS, EOS

TENSOR_NAMES = ("fused", "question", "image", "answer_logits", "answer_words")


class Adapter(Protocol):
    name: str
    feature_dim: int
    sample_ids: Sequence[str]
    answers: Sequence[str]

    def forward(self, sample_id: str) -> dict[str, np.ndarray]: ...


def _rng_for(*parts: object) -> np.random.Generator:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(np.frombuffer(digest, dtype=np.uint64))


class TinyRandomAdapter:
    """Deterministic random-weight stand-in for a discriminative VQA model.

    Every tensor is a pure function of (seed, sample id), so re-exports are
    byte-identical. Each sample gets a planted gold answer whose logit is
    boosted, and whose words form the answer-word feature group.
    """

    def __init__(self, seed: int, feature_dim: int, sample_ids: Sequence[str],
                 answers: Sequence[str] | None = None):
        self.name = f"tiny-random-{seed}"
        self.seed = seed
        self.feature_dim = feature_dim
        self.sample_ids = list(sample_ids)
        self.answers = list(answers) if answers is not None else [
            f"thing {i}" if i % 4 == 0 else f"item{i}" for i in range(12)
        ]
        self.words = sorted({w for a in self.answers for w in a.split()})
        self.word_vocab = [BOS, EOS, *self.words]
        self._nan_samples: set[str] = set()

    def poison(self, sample_id: str) -> None:
        """Make ``forward`` emit a NaN for this sample (failure-path tests)."""
        self._nan_samples.add(sample_id)

    def gold_answer(self, sample_id: str) -> str:
        rng = _rng_for(self.seed, "gold", sample_id)
        return self.answers[int(rng.integers(len(self.answers)))]

    def forward(self, sample_id: str) -> dict[str, np.ndarray]:
        gold = self.gold_answer(sample_id)
        rng = _rng_for(self.seed, "feat", sample_id)
        fused = rng.normal(size=self.feature_dim)
        question = rng.normal(size=self.feature_dim)
        image = rng.normal(size=self.feature_dim)
        logits = rng.uniform(0.01, 0.5, size=len(self.answers))
        logits[self.answers.index(gold)] = rng.uniform(0.6, 0.95)
        words = rng.normal(size=(len(gold.split()), self.feature_dim))
        if sample_id in self._nan_samples:
            fused = fused.copy()
            fused[0] = np.nan
        return {
            "fused": fused,
            "question": question,
            "image": image,
            "answer_logits": logits,
            "answer_words": words,
        }

    def next_distribution(self, prefix: Sequence[str]) -> np.ndarray:
        if not prefix or prefix[0] != BOS:
            raise ValueError(f"prefix must start with {BOS}")
        for token in prefix:
            if token not in self.word_vocab:
                raise KeyError(f"unknown token {token!r}")
        rng = _rng_for(self.seed, "dist", " ".join(prefix))
        logits = rng.normal(size=len(self.word_vocab))
        logits[0] = -np.inf  # BOS is never emitted
        exp = np.exp(logits - np.nanmax(logits[1:]))
        exp[0] = 0.0
        return exp / exp.sum()


class ChainAdapter:
    """Generative adapter that decodes one fixed word chain."""

    def __init__(self, words: Sequence[str], continue_p: float = 1.0):
        self.name = "chain"
        self.chain = list(words)
        self.continue_p = float(continue_p)
        self.words = sorted(set(self.chain))
        self.word_vocab = [BOS, EOS, *self.words]
        self.feature_dim = 0
        self.sample_ids: list[str] = []
        self.answers = [" ".join(self.chain)]

    def forward(self, sample_id: str) -> dict[str, np.ndarray]:
        raise NotImplementedError("chain adapter only serves distributions")

    def next_distribution(self, prefix: Sequence[str]) -> np.ndarray:
        if not prefix or prefix[0] != BOS:
            raise ValueError(f"prefix must start with {BOS}")
        for token in prefix:
            if token not in self.word_vocab:
                raise KeyError(f"unknown token {token!r}")
        probs = np.zeros(len(self.word_vocab))
        position = len(prefix) - 1
        if list(prefix[1:]) == self.chain[:position] and position < len(self.chain):
            probs[self.word_vocab.index(self.chain[position])] = self.continue_p
            probs[1] += 1.0 - self.continue_p  # EOS
        else:
            probs[1] = 1.0
        return probs

    def scorer_doc(self) -> dict:
        """Synthetic scorer file document reproducing this chain bit-exactly.

        Probabilities are read back from ``next_distribution`` so the file and
        the live adapter agree to the last float bit.
        """
        table = {}
        prefix = [BOS]
        for _ in self.chain:
            probs = self.next_distribution(tuple(prefix))
            table[" ".join(prefix)] = {
                self.word_vocab[i]: float(p)
                for i, p in enumerate(probs) if p > 0.0
            }
            position = len(prefix) - 1
            prefix.append(self.chain[position])
        return {"vocab": list(self.word_vocab), "table": table, "default": {EOS: 1.0}}
