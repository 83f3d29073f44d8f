"""Prompt assembly: head, in-context example blocks, testing block.

Prompts are plain text. Every adjacent pair of lines is separated by a
``===`` line, so a full prompt is ``"\\n===\\n".join(lines)``. An example
block contributes the lines

    Context / [Tags] / [OCR] / Question / [Candidates] / [Choices] / Answer: <gold>

in that order, with the optional lines controlled by the task format and the
config toggles; the testing block is identical except its Answer line is left
blank for the model to complete. Confidence scores render with fixed decimals
and half-up rounding, so 1.0 appears as ``1.00``.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Sequence

from .artifacts import AnswerCandidate, Sample
from .errors import PromptError
from .heuristics import ExampleSelection
from .voting import project_to_choice

SEPARATOR = "==="
TASK_FORMATS = ("standard", "multiple_choice", "science_hint", "ocr")

_ANSWER_HEAD = (
    "Please answer the question according to the context and the answer candidates. "
    "Each answer candidate is associated with a confidence score within a bracket. "
    "The true answer may not be included in the candidates."
)
_CHOICE_HEAD = (
    "Please choose the correct answer in the choices according to the context, "
    "the question and the answer candidates. Each answer candidate is associated "
    "with a confidence score within a bracket. The true answer may not be included "
    "in the candidates."
)
# Degraded heads for candidate-free prompts, in the style of the plain
# caption+question baseline.
_ANSWER_HEAD_NO_CAND = "Please answer the question according to the context."
_CHOICE_HEAD_NO_CAND = (
    "Please choose the correct answer in the choices according to the context "
    "and the question."
)

_CHOICE_FORMATS = ("multiple_choice", "science_hint")


@dataclass(frozen=True)
class PromptConfig:
    task_format: str = "standard"
    k: int = 10
    n_examples: int = 16
    queries: int = 5
    include_head: bool = True
    include_scores: bool = True
    include_caption: bool = True
    include_tags: bool = False
    score_decimals: int = 2
    max_prompt_chars: int | None = None

    def __post_init__(self) -> None:
        if self.task_format not in TASK_FORMATS:
            raise PromptError(f"unknown task format {self.task_format!r}")
        if self.k < 0 or self.n_examples < 0:
            raise PromptError("k and n_examples must be non-negative")
        if self.queries < 1:
            raise PromptError("queries must be >= 1")
        if self.score_decimals < 0:
            raise PromptError("score_decimals must be >= 0")


@dataclass(frozen=True)
class PromptBundle:
    test_sample_id: str
    prompts: tuple[str, ...]
    example_ids_per_prompt: tuple[tuple[str, ...], ...]


def format_score(score: float, decimals: int) -> str:
    quantum = Decimal(1).scaleb(-decimals)
    return str(Decimal(repr(float(score))).quantize(quantum, rounding=ROUND_HALF_UP))


def prompt_head(cfg: PromptConfig) -> str:
    if cfg.task_format in _CHOICE_FORMATS:
        return _CHOICE_HEAD if cfg.k > 0 else _CHOICE_HEAD_NO_CAND
    return _ANSWER_HEAD if cfg.k > 0 else _ANSWER_HEAD_NO_CAND


def partition_examples(
    selection: ExampleSelection | None, n: int, t: int
) -> list[list[str]]:
    """Split the ranked selection into t prompts of n examples each.

    Prompt j receives ranks {j, j+t, j+2t, ...} and lists them by ascending
    similarity, so the most similar example sits adjacent to the testing
    block.
    """
    if t < 1:
        raise PromptError("t must be >= 1")
    if n == 0:
        return [[] for _ in range(t)]
    if selection is None or len(selection.neighbor_ids) < n * t:
        have = 0 if selection is None else len(selection.neighbor_ids)
        raise PromptError(f"need {n * t} selected examples, have {have}")
    return [
        [selection.neighbor_ids[j + i * t] for i in range(n)][::-1]
        for j in range(t)
    ]


def _candidates_line(candidates: Sequence[AnswerCandidate], cfg: PromptConfig) -> str:
    if cfg.include_scores:
        parts = [f"{c.answer}({format_score(c.score, cfg.score_decimals)})" for c in candidates]
    else:
        parts = [c.answer for c in candidates]
    return "Candidates: " + ", ".join(parts)


def _choices_line(choices: Sequence[str]) -> str:
    return "Choices: " + ", ".join(f"({chr(ord('A') + i)}) {c}" for i, c in enumerate(choices))


def _block_lines(
    sample: Sample,
    candidates: Sequence[AnswerCandidate],
    cfg: PromptConfig,
    gold: str | None,
) -> list[str]:
    lines: list[str] = []
    context = sample.caption if cfg.include_caption else ""
    if cfg.task_format == "science_hint" and sample.hint:
        context = f"{context} {sample.hint}".strip() if context else sample.hint
    if context:
        lines.append(f"Context: {context}")
    if cfg.include_tags and sample.tags:
        lines.append("Tags: " + ", ".join(sample.tags))
    if cfg.task_format == "ocr":
        if not sample.ocr_tokens:
            raise PromptError(f"sample {sample.id!r}: ocr format needs OCR tokens")
        lines.append("OCR: " + ", ".join(sample.ocr_tokens) + ".")
    lines.append(f"Question: {sample.question}")
    if cfg.k > 0:
        if len(candidates) != cfg.k:
            raise PromptError(
                f"sample {sample.id!r}: expected {cfg.k} candidates, got {len(candidates)}"
            )
        lines.append(_candidates_line(candidates, cfg))
    if cfg.task_format in _CHOICE_FORMATS:
        if sample.choices:
            lines.append(_choices_line(sample.choices))
        elif cfg.task_format == "multiple_choice":
            raise PromptError(f"sample {sample.id!r}: multiple_choice format needs choices")
    if gold is None:
        lines.append("Answer:")
    else:
        lines.append(f"Answer: {gold}")
    return lines


def _gold_answer(sample: Sample, cfg: PromptConfig) -> str:
    if not sample.answers:
        raise PromptError(f"sample {sample.id!r}: example needs at least one answer")
    gold = sample.modal_answer()
    if cfg.task_format in _CHOICE_FORMATS and sample.choices:
        idx = project_to_choice(gold, sample.choices)
        return f"({chr(ord('A') + idx)})"
    return gold


def render_example_block(
    sample: Sample, candidates: Sequence[AnswerCandidate], cfg: PromptConfig
) -> str:
    lines = _block_lines(sample, candidates, cfg, gold=_gold_answer(sample, cfg))
    return f"\n{SEPARATOR}\n".join(lines)


def render_test_block(
    sample: Sample, candidates: Sequence[AnswerCandidate], cfg: PromptConfig
) -> str:
    lines = _block_lines(sample, candidates, cfg, gold=None)
    return f"\n{SEPARATOR}\n".join(lines)


def build_prompts(
    sample: Sample,
    candidates: Sequence[AnswerCandidate],
    selection: ExampleSelection | None,
    examples: Mapping[str, tuple[Sample, Sequence[AnswerCandidate]]],
    cfg: PromptConfig,
) -> PromptBundle:
    """Render the T parallel prompts for one testing sample.

    ``examples`` maps training ids to their sample and stage-1 candidates.
    When ``max_prompt_chars`` is set, examples drop from the low-similarity
    end of each prompt until the rendered text fits.
    """
    groups = partition_examples(selection, cfg.n_examples, cfg.queries)
    test_lines = _block_lines(sample, candidates, cfg, gold=None)
    head = [prompt_head(cfg)] if cfg.include_head else []

    prompts: list[str] = []
    kept_ids: list[tuple[str, ...]] = []
    for example_ids in groups:
        ids = list(example_ids)
        while True:
            lines = list(head)
            for ex_id in ids:
                if ex_id not in examples:
                    raise PromptError(f"no example data for selected id {ex_id!r}")
                ex_sample, ex_cands = examples[ex_id]
                lines.extend(_block_lines(ex_sample, ex_cands, cfg, gold=_gold_answer(ex_sample, cfg)))
            lines.extend(test_lines)
            text = f"\n{SEPARATOR}\n".join(lines)
            if cfg.max_prompt_chars is None or len(text) <= cfg.max_prompt_chars:
                break
            if not ids:
                raise PromptError(
                    f"sample {sample.id!r}: prompt exceeds {cfg.max_prompt_chars} chars "
                    "even with zero examples"
                )
            ids.pop(0)  # lowest-similar example sits first
        prompts.append(text)
        kept_ids.append(tuple(ids))
    return PromptBundle(
        test_sample_id=sample.id,
        prompts=tuple(prompts),
        example_ids_per_prompt=tuple(kept_ids),
    )
