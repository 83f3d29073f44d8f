"""Beam-search decoding over an abstract autoregressive scorer.

A scorer maps a token prefix (always starting with ``[BOS]``) to a probability
distribution over the word vocabulary. Scorers are deterministic: a fixed
prefix always yields the same distribution. Two implementations ship here: one
backed by a JSON prefix table (for synthetic fixtures) and one speaking the
HTTP protocol ``POST {prefix: [...]} -> {probs: [...]}``.

Each decoding step expands every live beam by its top-k next tokens, then
reduces the pool - frozen completed beams included - to the global top-k by
accumulated log probability. Beams that reach ``max_len`` scored tokens
without emitting ``[EOS]`` are force-terminated. The reported confidence is
``exp(s / L)`` where ``s`` is the accumulated log probability and ``L`` counts
scored tokens including the terminating ``[EOS]``; the raw ``s`` is kept on
the candidate. Duplicate surface strings merge keeping the highest
confidence. The empty answer is not part of the candidate space: the first
decoding step expands word tokens only.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .artifacts import BOS, EOS, AnswerCandidate, AnswerVocabulary
from .errors import ScorerError

_SUM_TOL = 1e-6


class AutoregressiveScorer(Protocol):
    vocab: AnswerVocabulary

    def next_distribution(self, prefix: Sequence[str]) -> np.ndarray:
        """Probability vector over ``vocab`` for the token after ``prefix``."""
        ...


def validate_distribution(probs: np.ndarray, size: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (size,):
        raise ScorerError(f"distribution has shape {probs.shape}, expected ({size},)")
    if np.any(~np.isfinite(probs)) or np.any(probs < 0):
        raise ScorerError("distribution entries must be finite and non-negative")
    total = float(probs.sum())
    if abs(total - 1.0) > _SUM_TOL:
        raise ScorerError(f"distribution sums to {total}, violating the sum-to-1 contract")
    return probs


class TableScorer:
    """Scorer backed by a JSON table of space-joined prefixes.

    File schema::

        {
          "vocab": ["[BOS]", "[EOS]", "w1", ...],
          "table": {"[BOS]": {"w1": 0.9, "[EOS]": 0.1}, ...},
          "default": {"[EOS]": 1.0}
        }

    Unlisted prefixes fall back to ``default``; words absent from a
    distribution map get probability zero.
    """

    def __init__(self, vocab: AnswerVocabulary, table: dict[str, dict[str, float]],
                 default: dict[str, float]):
        self.vocab = vocab
        self._table = {k: self._to_vector(v) for k, v in table.items()}
        self._default = self._to_vector(default)

    def _to_vector(self, dist: dict[str, float]) -> np.ndarray:
        probs = np.zeros(self.vocab.size, dtype=np.float64)
        for word, p in dist.items():
            probs[self.vocab.index(word)] = float(p)
        return validate_distribution(probs, self.vocab.size)

    @classmethod
    def from_file(cls, path: str | Path) -> "TableScorer":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        vocab = AnswerVocabulary(doc["vocab"], kind="generative")
        return cls(vocab, doc.get("table", {}), doc["default"])

    def next_distribution(self, prefix: Sequence[str]) -> np.ndarray:
        if not prefix or prefix[0] != BOS:
            raise ScorerError(f"prefix must start with {BOS}, got {list(prefix)!r}")
        return self._table.get(" ".join(prefix), self._default)


class HttpScorer:
    """Scorer client for a live endpoint implementing the prefix protocol."""

    def __init__(self, url: str, vocab: AnswerVocabulary, timeout_s: float = 10.0):
        self.url = url
        self.vocab = vocab
        self.timeout_s = timeout_s

    def next_distribution(self, prefix: Sequence[str]) -> np.ndarray:
        import requests

        try:
            resp = requests.post(self.url, json={"prefix": list(prefix)}, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise ScorerError(f"scorer endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerError(f"scorer endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            probs = resp.json()["probs"]
        except (ValueError, KeyError) as exc:
            raise ScorerError(f"scorer endpoint reply malformed: {exc}") from exc
        return validate_distribution(np.asarray(probs, dtype=np.float64), self.vocab.size)


@dataclass
class _Beam:
    words: tuple[str, ...]
    path: tuple[int, ...]  # token indices walked, including a terminal EOS
    log_score: float
    finished: bool

    @property
    def scored_tokens(self) -> int:
        return len(self.path)


def beam_search(scorer: AutoregressiveScorer, k: int, max_len: int) -> list[AnswerCandidate]:
    """Decode up to ``k`` answers with their confidences, best first.

    Score ties break by the ascending token-index path, both at every reduce
    step and in the final ordering, so decoding is fully deterministic even
    when distinct sequences score identically (permutations under a stationary
    scorer tie bit-exactly).
    """
    if k < 1:
        raise ScorerError(f"beam width must be >= 1, got {k}")
    if max_len < 1:
        raise ScorerError(f"max_len must be >= 1, got {max_len}")
    vocab = scorer.vocab
    if EOS not in vocab:
        raise ScorerError(f"vocabulary must contain {EOS}")
    eos_idx = vocab.index(EOS)

    live: list[_Beam] = [_Beam(words=(), path=(), log_score=0.0, finished=False)]
    completed: list[_Beam] = []

    for _ in range(max_len):
        if not live:
            break
        pool: list[_Beam] = list(completed)
        expanded_any = False
        for beam in live:
            probs = validate_distribution(
                scorer.next_distribution((BOS, *beam.words)), vocab.size
            )
            if not beam.words:
                # The empty answer is not a valid candidate: the root expands
                # its top-k word tokens and never terminates immediately.
                probs = probs.copy()
                probs[eos_idx] = 0.0
            top = np.argsort(-probs, kind="stable")[:k]
            for token_idx in top:
                idx = int(token_idx)
                p = float(probs[idx])
                if p <= 0.0:
                    continue
                expanded_any = True
                step_score = beam.log_score + math.log(p)
                if idx == eos_idx:
                    pool.append(_Beam(beam.words, beam.path + (idx,), step_score, True))
                else:
                    pool.append(_Beam(
                        beam.words + (vocab.entries[idx],),
                        beam.path + (idx,),
                        step_score,
                        False,
                    ))
        if not expanded_any and not completed:
            raise ScorerError("every expansion had zero probability; nothing to decode")
        pool.sort(key=lambda b: (-b.log_score, b.path))
        kept = pool[:k]
        completed = [b for b in kept if b.finished]
        live = [b for b in kept if not b.finished]

    for beam in live:  # reached max_len without EOS
        beam.finished = True
        completed.append(beam)

    merged: dict[str, tuple[AnswerCandidate, tuple[int, ...]]] = {}
    for beam in completed:
        answer = " ".join(beam.words)
        if not answer:
            continue
        confidence = math.exp(beam.log_score / beam.scored_tokens)
        cand = AnswerCandidate(answer, confidence, log_score=beam.log_score)
        kept = merged.get(answer)
        if kept is None or confidence > kept[0].score or (
            confidence == kept[0].score and beam.path < kept[1]
        ):
            merged[answer] = (cand, beam.path)
    ranked = sorted(merged.values(), key=lambda item: (-item[0].score, item[1]))
    return [cand for cand, _ in ranked]
