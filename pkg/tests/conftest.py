from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vqaprompt.artifacts import (
    AnswerVocabulary,
    FeatureBank,
    save_feature_bank,
    save_vocabulary,
)


def write_manifest(path: Path, doc: dict) -> Path:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def ten_answers(gold: str, filler: str = "other") -> list[str]:
    return [gold] * 7 + [filler] * 3


@pytest.fixture
def tiny_tree(tmp_path: Path) -> Path:
    """Smallest valid dataset: 1 train + 1 test sample, one fused bank."""
    root = tmp_path / "tiny"
    root.mkdir()
    vocab = AnswerVocabulary(["helium", "neon", "argon"])
    save_vocabulary(vocab, root / "vocab.txt")
    bank = FeatureBank(
        "fused", ["train_0", "test_0"], np.array([[1.0, 0.0], [0.0, 1.0]], np.float32)
    )
    save_feature_bank(bank, root / "fused.prfb")
    write_manifest(root / "manifest.json", {
        "version": 1,
        "dataset_name": "tiny",
        "samples": [
            {
                "id": "train_0",
                "question": "What gas is in the balloon?",
                "caption": "a red balloon on a string.",
                "answers": ["helium"],
                "split": "train",
            },
            {
                "id": "test_0",
                "question": "What gas makes this float?",
                "caption": "a shiny balloon at a party.",
                "answers": ten_answers("helium", "neon"),
                "split": "test",
            },
        ],
        "banks": [{"kind": "fused", "path": "fused.prfb", "grouped": False}],
        "vocab": {"type": "discriminative", "path": "vocab.txt"},
    })
    return root / "manifest.json"


@pytest.fixture(scope="session")
def fixture_dataset_dir(tmp_path_factory) -> Path:
    """A small planted fixture tree shared by pipeline-level tests."""
    from vqaprompt.fixtures import FixtureSpec, generate_fixtures

    out = tmp_path_factory.mktemp("fixture_small")
    generate_fixtures(FixtureSpec(seed=11, test_count=24, train_count=150,
                                  dim=32, vocab_size=30), out)
    return out
