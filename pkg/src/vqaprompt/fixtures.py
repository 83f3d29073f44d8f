"""Deterministic synthetic dataset generator for tests and dry runs.

Gold answers are planted in the feature geometry: every vocabulary answer owns
a random unit "cluster center" and each sample's fused feature is its gold
center plus bounded noise, so nearest-neighbor search in the fused bank
recovers same-answer samples far more often than chance. Question and image
features use the same centers with progressively more noise, which reproduces
the expected ordering of selection strategies (fused > question+image >
random). Logit vectors put the planted winner on top with probability
``stage1_correct_rate`` so stage-1 accuracy and the hit-rate curve are
non-trivial.

Everything derives from one seed; regenerating with the same parameters is
byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artifacts import (
    BOS,
    EOS,
    AnswerVocabulary,
    Dataset,
    FeatureBank,
    GroupedFeatureBank,
    BankRef,
    Sample,
    save_feature_bank,
    save_grouped_bank,
    save_manifest,
    save_vocabulary,
    write_canonical_json,
)

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"

FUSED_NOISE = 0.5
QUESTION_NOISE = 1.2
IMAGE_NOISE = 2.5
GROUP_NOISE = 0.5
CATEGORY_COUNT = 5


@dataclass
class FixtureSpec:
    seed: int = 7
    test_count: int = 200
    train_count: int | None = None  # defaults to 5x test_count
    dim: int = 64
    vocab_size: int = 120
    stage1_correct_rate: float = 0.65
    multiword_rate: float = 0.25

    @property
    def resolved_train_count(self) -> int:
        return self.train_count if self.train_count is not None else 5 * self.test_count


def _make_word(rng: np.random.Generator) -> str:
    n = int(rng.integers(2, 4))
    return "".join(
        _CONSONANTS[int(rng.integers(len(_CONSONANTS)))]
        + _VOWELS[int(rng.integers(len(_VOWELS)))]
        for _ in range(n)
    )


def _make_answers(rng: np.random.Generator, spec: FixtureSpec) -> list[str]:
    answers: list[str] = []
    seen: set[str] = set()
    while len(answers) < spec.vocab_size:
        answer = _make_word(rng)
        if rng.random() < spec.multiword_rate:
            answer = f"{answer} {_make_word(rng)}"
        if answer not in seen:
            seen.add(answer)
            answers.append(answer)
    return answers


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _noisy_center(rng: np.random.Generator, center: np.ndarray, radius: float) -> np.ndarray:
    direction = _unit(rng.normal(size=center.shape[0]))
    return _unit(center + radius * direction)


def _sample_logits(
    rng: np.random.Generator, gold_idx: int, vocab_size: int, correct: bool
) -> np.ndarray:
    """Confidence scores in (0, 1) with the planted winner on top."""
    scores = rng.beta(0.6, 6.0, size=vocab_size) * 0.6 + 1e-4
    winner = gold_idx
    if not correct:
        winner = int(rng.integers(vocab_size - 1))
        if winner >= gold_idx:
            winner += 1
        # The gold answer lands anywhere below the winner, so hit rate keeps
        # climbing between k=1 and k=10 instead of saturating at k=2.
        scores[gold_idx] = rng.uniform(0.005, 0.55)
    scores[winner] = rng.uniform(0.55, 0.95)
    return np.clip(scores, 1e-5, 1.0 - 1e-5)


def _annotator_answers(
    rng: np.random.Generator, gold: str, others: list[str]
) -> list[str]:
    # Gold appears >= 4 times and fillers cap at 3 apiece, so gold stays
    # strictly modal under any annotator ordering.
    gold_count = int(rng.integers(4, 11))
    fillers: list[str] = []
    fill_counts: dict[str, int] = {}
    while len(fillers) < 10 - gold_count:
        pick = others[int(rng.integers(len(others)))]
        if fill_counts.get(pick, 0) >= 3:
            continue
        fill_counts[pick] = fill_counts.get(pick, 0) + 1
        fillers.append(pick)
    answers = [gold] * gold_count + fillers
    return [answers[int(i)] for i in rng.permutation(10)]


def generate_fixtures(spec: FixtureSpec, out_dir: str | Path) -> Dataset:
    """Write the synthetic dataset tree and return the loaded-equivalent handle."""
    out = Path(out_dir)
    (out / "banks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)

    answers = _make_answers(rng, spec)
    vocab = AnswerVocabulary(answers, kind="discriminative")
    centers = np.stack([_unit(rng.normal(size=spec.dim)) for _ in answers])

    words = sorted({w for a in answers for w in a.split()})
    word_centers = {w: _unit(rng.normal(size=spec.dim)) for w in words}
    word_vocab = AnswerVocabulary([BOS, EOS, *words], kind="generative")

    train_count = spec.resolved_train_count
    # Round-robin gold assignment guarantees every answer has training
    # representatives; test golds are uniform draws.
    train_golds = [answers[i % len(answers)] for i in range(train_count)]
    train_golds = [train_golds[int(i)] for i in rng.permutation(train_count)]
    test_golds = [answers[int(i)] for i in rng.integers(len(answers), size=spec.test_count)]

    samples: list[Sample] = []
    ids: list[str] = []
    golds: dict[str, str] = {}
    fused_rows, question_rows, image_rows, logit_rows = [], [], [], []
    group_rows: list[np.ndarray] = []
    group_lengths: list[int] = []

    def add_sample(sid: str, gold: str, split: str, idx: int) -> None:
        gold_idx = vocab.index(gold)
        center = centers[gold_idx]
        fused_rows.append(_noisy_center(rng, center, FUSED_NOISE))
        question_rows.append(_noisy_center(rng, center, QUESTION_NOISE))
        image_rows.append(_noisy_center(rng, center, IMAGE_NOISE))
        correct = bool(rng.random() < spec.stage1_correct_rate)
        logit_rows.append(_sample_logits(rng, gold_idx, len(answers), correct))
        group = np.stack([
            _noisy_center(rng, word_centers[w], GROUP_NOISE) for w in gold.split()
        ])
        group_rows.append(group)
        group_lengths.append(group.shape[0])
        scene = answers[int(rng.integers(len(answers)))].split()[0]
        if split == "train":
            sample_answers = [gold] * int(rng.integers(1, 4))
        else:
            others = [a for a in answers if a != gold]
            sample_answers = _annotator_answers(rng, gold, others)
        samples.append(Sample(
            id=sid,
            question=f"What is associated with item {idx:05d} in this scene?",
            caption=f"a photo of a scene near a {scene}.",
            answers=tuple(sample_answers),
            split=split,
            category=f"category_{idx % CATEGORY_COUNT}",
        ))
        ids.append(sid)
        golds[sid] = gold

    for i, gold in enumerate(train_golds):
        add_sample(f"train_{i:05d}", gold, "train", i)
    for i, gold in enumerate(test_golds):
        add_sample(f"test_{i:05d}", gold, "test", train_count + i)

    fused = FeatureBank("fused", ids, np.stack(fused_rows))
    question = FeatureBank("question", ids, np.stack(question_rows))
    image = FeatureBank("image", ids, np.stack(image_rows))
    logits = FeatureBank("answer_logits", ids, np.stack(logit_rows))
    offsets = np.zeros(len(ids) + 1, dtype=np.uint64)
    offsets[1:] = np.cumsum(group_lengths)
    grouped = GroupedFeatureBank("fused", ids, offsets, np.concatenate(group_rows))

    save_feature_bank(fused, out / "banks" / "fused.prfb")
    save_feature_bank(question, out / "banks" / "question.prfb")
    save_feature_bank(image, out / "banks" / "image.prfb")
    save_feature_bank(logits, out / "banks" / "logits.prfb")
    save_grouped_bank(grouped, out / "banks" / "answer_words.prfg")
    save_vocabulary(vocab, out / "vocab.txt")
    save_vocabulary(word_vocab, out / "word_vocab.txt")

    dataset = Dataset(
        name=f"synthetic-{spec.seed}",
        root=out,
        samples=samples,
        banks={
            ("fused", False): fused,
            ("question", False): question,
            ("image", False): image,
            ("answer_logits", False): logits,
            ("fused", True): grouped,
        },
        bank_refs=[
            BankRef("fused", "banks/fused.prfb"),
            BankRef("question", "banks/question.prfb"),
            BankRef("image", "banks/image.prfb"),
            BankRef("answer_logits", "banks/logits.prfb"),
            BankRef("fused", "banks/answer_words.prfg", grouped=True),
        ],
        vocab=vocab,
        vocab_path="vocab.txt",
        candidates_source="logits",
    )
    save_manifest(dataset, out / "manifest.json")

    write_canonical_json(
        {
            "by_id": golds,
            "by_question": {s.question: golds[s.id] for s in samples},
        },
        out / "oracle_answers.json",
    )
    write_canonical_json(_chain_scorer_doc(word_vocab, golds, samples), out / "scorer.json")
    write_canonical_json(
        {
            "seed": spec.seed,
            "dim": spec.dim,
            "vocab_size": spec.vocab_size,
            "test_count": spec.test_count,
            "train_count": train_count,
            "stage1_correct_rate": spec.stage1_correct_rate,
            "noise": {
                "fused": FUSED_NOISE,
                "question": QUESTION_NOISE,
                "image": IMAGE_NOISE,
                "group": GROUP_NOISE,
            },
            "group_lengths": group_lengths,
            "group_total_rows": int(offsets[-1]),
            "planted_golds": golds,
        },
        out / "fixture_ledger.json",
    )
    return dataset


def _chain_scorer_doc(word_vocab: AnswerVocabulary, golds: dict[str, str],
                      samples: list[Sample]) -> dict:
    """Scorer whose greedy chain decodes the first test sample's gold answer."""
    first_test = next(s for s in samples if s.split == "test")
    gold_words = golds[first_test.id].split()
    table: dict[str, dict[str, float]] = {}
    prefix = [BOS]
    for i, word in enumerate(gold_words):
        remaining = 1.0 - 0.05 * (i + 1)
        table[" ".join(prefix)] = {word: round(remaining, 10), EOS: round(1.0 - remaining, 10)}
        prefix.append(word)
    return {
        "vocab": list(word_vocab.entries),
        "table": table,
        "default": {EOS: 1.0},
        "decodes_sample": first_test.id,
    }
