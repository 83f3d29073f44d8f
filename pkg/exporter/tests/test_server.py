from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
import requests

from vqa_exporter.adapters import ChainAdapter, TinyRandomAdapter
from vqa_exporter.formats import BOS, EOS
from vqa_exporter.server import ScorerServer


@pytest.fixture
def random_server():
    adapter = TinyRandomAdapter(seed=2, feature_dim=4, sample_ids=["s0"])
    with ScorerServer(adapter) as server:
        yield adapter, server


def _post(server, prefix):
    return requests.post(server.url, json={"prefix": prefix}, timeout=5)


def test_distributions_sum_to_one(random_server):
    adapter, server = random_server
    rng = np.random.default_rng(0)
    for _ in range(10):
        depth = int(rng.integers(0, 3))
        prefix = [BOS] + [adapter.words[int(rng.integers(len(adapter.words)))]
                          for _ in range(depth)]
        resp = _post(server, prefix)
        assert resp.status_code == 200
        probs = resp.json()["probs"]
        assert abs(sum(probs) - 1.0) < 1e-6
        assert all(p >= 0 for p in probs)


def test_unknown_token_is_http_400(random_server):
    _, server = random_server
    resp = _post(server, [BOS, "not-a-token"])
    assert resp.status_code == 400
    assert "not-a-token" in resp.json()["error"]


def test_malformed_body_is_http_400(random_server):
    _, server = random_server
    resp = requests.post(server.url, data=b"nonsense", timeout=5)
    assert resp.status_code == 400


def test_concurrent_identical_requests_identical_vectors(random_server):
    adapter, server = random_server
    prefix = [BOS, adapter.words[0]]
    with ThreadPoolExecutor(max_workers=8) as pool:
        replies = list(pool.map(lambda _: _post(server, prefix).json()["probs"],
                                range(16)))
    assert all(r == replies[0] for r in replies)


def test_chain_adapter_end_of_chain_emits_eos():
    adapter = ChainAdapter(["helium"])
    probs = adapter.next_distribution((BOS, "helium"))
    assert probs[adapter.word_vocab.index(EOS)] == 1.0
