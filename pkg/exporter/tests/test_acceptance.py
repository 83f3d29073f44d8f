"""Exporter acceptance: round-trip fidelity and live-scorer equivalence."""

from __future__ import annotations

import json

import numpy as np

from vqa_exporter.adapters import ChainAdapter, TinyRandomAdapter
from vqa_exporter.export import ExportJob, export
from vqa_exporter.server import ScorerServer

from vqaprompt.artifacts import load_feature_bank
from vqaprompt.beam import HttpScorer, TableScorer, beam_search
from vqaprompt.heuristics import cosine_knn

KNN_COSINE_TOL = 1e-5


def _ok(name: str) -> None:
    print(f"[PASS] {name}")


def test_roundtrip_knn_matches_in_memory_computation(tmp_path):
    adapter = TinyRandomAdapter(seed=11, feature_dim=16,
                                sample_ids=[f"s{i:04d}" for i in range(200)])
    written = export(ExportJob(adapter, tmp_path))
    bank = load_feature_bank(written["fused"])  # load implies CRC validation

    in_memory = np.stack([adapter.forward(sid)["fused"] for sid in adapter.sample_ids])
    norms = np.linalg.norm(in_memory, axis=1)
    for qi in (0, 17, 42, 133, 199):
        query = in_memory[qi]
        sims = in_memory @ query / (norms * np.linalg.norm(query))
        sims[qi] = -np.inf  # the loaded-bank path excludes the query itself
        order = np.argsort(-sims, kind="stable")[:10]
        expected_ids = [adapter.sample_ids[int(i)] for i in order]
        expected_sims = [float(sims[int(i)]) for i in order]

        got = cosine_knn(bank.row(adapter.sample_ids[qi]), bank, 10,
                         exclude={adapter.sample_ids[qi]})
        assert list(got.neighbor_ids) == expected_ids
        np.testing.assert_allclose(got.similarities, expected_sims,
                                   atol=KNN_COSINE_TOL)
    _ok("exported banks load, pass CRC, and reproduce in-memory kNN within 1e-5 cosine")


def test_http_scorer_drives_beam_to_file_scorer_candidates(tmp_path):
    chain = ["dirt", "bike"]
    adapter = ChainAdapter(chain, continue_p=0.9)

    scorer_path = tmp_path / "scorer.json"
    scorer_path.write_text(json.dumps(adapter.scorer_doc()))
    file_scorer = TableScorer.from_file(scorer_path)
    via_file = beam_search(file_scorer, 3, 4)

    with ScorerServer(adapter) as server:
        http_scorer = HttpScorer(server.url, file_scorer.vocab)
        via_http = beam_search(http_scorer, 3, 4)

    assert [(c.answer, c.score, c.log_score) for c in via_http] == \
        [(c.answer, c.score, c.log_score) for c in via_file]
    assert via_http[0].answer == "dirt bike"
    _ok("HTTP scorer drives beam search to the same candidates as the file scorer")
