"""Multi-query ensemble voting and the shared answer normalization rules.

``normalize_answer`` is the single source of truth for string comparison;
the evaluator imports it from here so voting and scoring can never disagree.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .artifacts import AnswerCandidate
from .errors import VqaPromptError

_ARTICLES = {"a", "an", "the"}
_NUMBER_WORDS = {
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4",
    "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9", "ten": "10",
}
_CHOICE_LETTER = re.compile(r"^\(([a-d])\)$", re.IGNORECASE)


def normalize_answer(text: str) -> str:
    """Canonical answer form: lowercase, collapsed whitespace, no trailing
    periods, leading articles removed, number words zero-ten as digits."""
    collapsed = " ".join(text.lower().split())
    # One rstrip over ". " is the fixpoint of alternately dropping trailing
    # periods and whitespace, which keeps normalization idempotent.
    tokens = collapsed.rstrip(". ").split()
    while tokens and tokens[0] in _ARTICLES:
        tokens = tokens[1:]
    tokens = [_NUMBER_WORDS.get(tok, tok) for tok in tokens]
    return " ".join(tokens)


@dataclass(frozen=True)
class QueryAnswer:
    query_index: int
    parsed_answer: str
    normalized_answer: str


@dataclass(frozen=True)
class VoteRecord:
    sample_id: str
    per_query: tuple[QueryAnswer, ...]
    final_answer: str
    tie_broken: bool


def majority_vote(
    answers: Sequence[str],
    candidates: Sequence[AnswerCandidate] = (),
) -> tuple[str, bool]:
    """Majority answer among normalized query replies.

    Count ties break by the higher stage-1 candidate confidence among the tied
    answers (answers with no matching candidate score 0), then by the lowest
    first-occurring query index. Returns ``(final_answer, tie_broken)``.
    """
    if not answers:
        raise VqaPromptError("majority_vote needs at least one answer")
    counts = Counter(answers)
    best_count = max(counts.values())
    tied = [a for a in counts if counts[a] == best_count]
    if len(tied) == 1:
        return tied[0], False

    confidence: dict[str, float] = {}
    for cand in candidates:
        key = normalize_answer(cand.answer)
        confidence[key] = max(confidence.get(key, 0.0), cand.score)
    first_index = {}
    for i, a in enumerate(answers):
        if a not in first_index:
            first_index[a] = i
    tied.sort(key=lambda a: (-confidence.get(a, 0.0), first_index[a]))
    return tied[0], True


def vote(
    sample_id: str,
    parsed_answers: Sequence[str],
    candidates: Sequence[AnswerCandidate] = (),
    raw_voting: bool = False,
) -> VoteRecord:
    """Build the full vote record for one sample's T parsed replies.

    ``raw_voting`` votes on the parsed strings as-is (an ablation knob); the
    default votes on normalized strings.
    """
    per_query = tuple(
        QueryAnswer(i, parsed, normalize_answer(parsed))
        for i, parsed in enumerate(parsed_answers)
    )
    ballots = [q.parsed_answer if raw_voting else q.normalized_answer for q in per_query]
    final, tie_broken = majority_vote(ballots, candidates)
    if raw_voting:
        final = normalize_answer(final)
    return VoteRecord(sample_id, per_query, final, tie_broken)


def token_f1(a_tokens: Sequence[str], b_tokens: Sequence[str]) -> float:
    """F1 overlap between two token multisets."""
    if not a_tokens or not b_tokens:
        return 0.0
    overlap = sum((Counter(a_tokens) & Counter(b_tokens)).values())
    if overlap == 0:
        return 0.0
    return 2.0 * overlap / (len(a_tokens) + len(b_tokens))


def project_to_choice(answer: str, choices: Sequence[str]) -> int:
    """Index of the choice nearest to the answer.

    A bare parenthesized letter (A)-(D) maps straight to its index when in
    range; otherwise the choice with the highest token-F1 overlap against the
    normalized answer wins, ties by lowest choice index.
    """
    if not choices:
        raise VqaPromptError("project_to_choice needs a non-empty choice list")
    m = _CHOICE_LETTER.match(answer.strip())
    if m:
        idx = ord(m.group(1).lower()) - ord("a")
        if idx < len(choices):
            return idx
    answer_tokens = normalize_answer(answer).split()
    scores = [
        token_f1(answer_tokens, normalize_answer(choice).split()) for choice in choices
    ]
    return int(max(range(len(choices)), key=lambda i: (scores[i], -i)))
