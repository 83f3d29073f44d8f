from __future__ import annotations

import hashlib
import json
from pathlib import Path


from vqaprompt.artifacts import load_manifest
from vqaprompt.beam import TableScorer, beam_search
from vqaprompt.fixtures import FixtureSpec, generate_fixtures


def tree_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_same_seed_gives_byte_identical_trees(tmp_path):
    spec = FixtureSpec(seed=7, test_count=6, train_count=40, dim=16, vocab_size=12)
    generate_fixtures(spec, tmp_path / "one")
    generate_fixtures(spec, tmp_path / "two")
    assert tree_digest(tmp_path / "one") == tree_digest(tmp_path / "two")


def test_different_seed_differs(tmp_path):
    generate_fixtures(FixtureSpec(seed=1, test_count=4, train_count=20, dim=8,
                                  vocab_size=12), tmp_path / "a")
    generate_fixtures(FixtureSpec(seed=2, test_count=4, train_count=20, dim=8,
                                  vocab_size=12), tmp_path / "b")
    assert tree_digest(tmp_path / "a") != tree_digest(tmp_path / "b")


def test_default_train_count_is_five_times_test():
    assert FixtureSpec(test_count=200).resolved_train_count == 1000


def test_counts_match_spec(fixture_dataset_dir):
    dataset = load_manifest(fixture_dataset_dir / "manifest.json")
    assert len(dataset.split_samples("test")) == 24
    assert len(dataset.split_samples("train")) == 150


def test_fixture_tree_loads_and_cross_validates(fixture_dataset_dir):
    dataset = load_manifest(fixture_dataset_dir / "manifest.json")
    for kind in ("fused", "question", "image", "answer_logits"):
        assert dataset.bank(kind).count == len(dataset.samples)
    assert dataset.bank("fused", grouped=True).count == len(dataset.samples)


def test_planted_golds_are_modal_answers(fixture_dataset_dir):
    dataset = load_manifest(fixture_dataset_dir / "manifest.json")
    golds = json.loads((fixture_dataset_dir / "oracle_answers.json").read_text())["by_id"]
    for sample in dataset.samples:
        assert sample.modal_answer() == golds[sample.id]
        if sample.split == "test":
            assert len(sample.answers) == 10
            assert sample.answers.count(golds[sample.id]) >= 4


def test_questions_unique(fixture_dataset_dir):
    dataset = load_manifest(fixture_dataset_dir / "manifest.json")
    questions = [s.question for s in dataset.samples]
    assert len(set(questions)) == len(questions)


def test_ledger_group_lengths_match_bank(fixture_dataset_dir):
    ledger = json.loads((fixture_dataset_dir / "fixture_ledger.json").read_text())
    dataset = load_manifest(fixture_dataset_dir / "manifest.json")
    grouped = dataset.bank("fused", grouped=True)
    assert sum(ledger["group_lengths"]) == ledger["group_total_rows"]
    assert int(grouped.offsets[-1]) == ledger["group_total_rows"]
    for i, sample in enumerate(dataset.samples):
        assert len(ledger["planted_golds"][sample.id].split()) == ledger["group_lengths"][i]


def test_scorer_decodes_planted_answer(fixture_dataset_dir):
    doc = json.loads((fixture_dataset_dir / "scorer.json").read_text())
    golds = json.loads((fixture_dataset_dir / "oracle_answers.json").read_text())["by_id"]
    scorer = TableScorer.from_file(fixture_dataset_dir / "scorer.json")
    top = beam_search(scorer, 1, 6)[0]
    assert top.answer == golds[doc["decodes_sample"]]


def test_logits_in_open_unit_interval(fixture_dataset_dir):
    dataset = load_manifest(fixture_dataset_dir / "manifest.json")
    rows = dataset.bank("answer_logits").rows
    assert rows.min() > 0.0
    assert rows.max() < 1.0
    assert rows.shape[1] == dataset.vocab.size
