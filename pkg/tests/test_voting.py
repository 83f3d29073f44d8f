from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vqaprompt.artifacts import AnswerCandidate
from vqaprompt.errors import VqaPromptError
from vqaprompt.voting import (
    majority_vote,
    normalize_answer,
    project_to_choice,
    token_f1,
    vote,
)

# Hand-applied rule table: lowercase, collapse whitespace, strip trailing
# periods, drop leading articles, map zero-ten to digits.
NORMALIZATION_TABLE = [
    ("The Helium.", "helium"),
    ("two", "2"),
    ("  a dog ", "dog"),
    ("AN APPLE", "apple"),
    ("the   blue   car", "blue car"),
    ("ten", "10"),
    ("Ten years", "10 years"),
    ("zero.", "0"),
    ("U.S.", "u.s"),
    ("dirt bike", "dirt bike"),
    ("A", ""),
    ("the the cat", "cat"),
    ("An an owl", "owl"),
    ("three dogs.", "3 dogs"),
    ("FOUR", "4"),
    ("the one", "1"),
    (".", ""),
    ("...", ""),
    ("  ", ""),
    ("", ""),
    ("Motorcross", "motorcross"),
    ("mixed CASE Words", "mixed case words"),
    ("five.", "5"),
    ("a.m.", "a.m"),
    ("an", ""),
    ("one two three", "1 2 3"),
    ("the. dog", "the. dog"),
    ("no U-turn.", "no u-turn"),
    ("2", "2"),
    ("(B)", "(b)"),
    ("THE END.", "end"),
    ("eleven", "eleven"),
    ("nine lives", "9 lives"),
    ("A an the thing", "thing"),
    ("café au lait", "café au lait"),
    ("CAFÉ", "café"),
    ("  spaced   out  ", "spaced out"),
    ("answer...", "answer"),
    ("one.", "1"),
    ("the 2nd", "2nd"),
    ("An Apple a day", "apple a day"),
    ("ZERO zero", "0 0"),
    ("six-pack", "six-pack"),
    ("seven ", "7"),
    ("Answer: yes", "answer: yes"),
    ("THE", ""),
    ("a b", "b"),
    ("an elephant.", "elephant"),
    ("eight eight", "8 8"),
    ("ten.", "10"),
]


def test_normalization_reference_table():
    for raw, expected in NORMALIZATION_TABLE:
        assert normalize_answer(raw) == expected, raw


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=40))
def test_normalize_idempotent(text):
    once = normalize_answer(text)
    assert normalize_answer(once) == once


def test_majority_strict():
    final, tie = majority_vote(["x", "x", "x", "y", "z"])
    assert (final, tie) == ("x", False)


def test_majority_tie_broken_by_candidate_confidence():
    candidates = [AnswerCandidate("y", 0.6), AnswerCandidate("x", 0.3)]
    final, tie = majority_vote(["x", "x", "y", "y", "z"], candidates)
    assert (final, tie) == ("y", True)


def test_majority_tie_falls_back_to_query_index():
    final, tie = majority_vote(["b", "a", "a", "b"])
    assert (final, tie) == ("b", True)  # both count 2, no candidates, b seen first


def test_majority_single_query():
    assert majority_vote(["lone"]) == ("lone", False)


def test_majority_requires_answers():
    with pytest.raises(VqaPromptError):
        majority_vote([])


def test_vote_record_final_among_ballots():
    record = vote("s1", ["The Cat", "cat", "dog.", "a cat", "two"])
    assert record.final_answer == "cat"
    assert record.final_answer in {q.normalized_answer for q in record.per_query}
    assert not record.tie_broken
    assert [q.query_index for q in record.per_query] == [0, 1, 2, 3, 4]


def test_vote_permutation_invariant_without_ties():
    ballots = ["x", "x", "x", "y", "z"]
    rotated = ballots[2:] + ballots[:2]
    assert majority_vote(ballots)[0] == majority_vote(rotated)[0]


def test_project_parsed_letter():
    assert project_to_choice("(B)", ["back", "lungs", "feet", "eyes"]) == 1
    assert project_to_choice("(b)", ["back", "lungs", "feet", "eyes"]) == 1


def test_project_exact_match():
    assert project_to_choice("knee", ["knee", "elbow", "rear", "board"]) == 0


def test_project_token_f1():
    # "dirt bike" vs "bike": overlap 1, F1 = 2/3; vs "car": 0.
    assert token_f1(["dirt", "bike"], ["bike"]) == pytest.approx(2 / 3)
    assert project_to_choice("dirt bike", ["bike", "car"]) == 0


def test_project_tie_takes_lowest_index():
    assert project_to_choice("red shirt", ["red pants", "red shoes"]) == 0


def test_project_letter_out_of_range_falls_back_to_f1():
    assert project_to_choice("(D)", ["dog food", "(d) thing"]) == 1


def test_project_requires_choices():
    with pytest.raises(VqaPromptError):
        project_to_choice("x", [])
