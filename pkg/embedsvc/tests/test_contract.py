"""Contract test: the extraction pipeline's remote provider consumes this service.

Runs the app in a real uvicorn thread and drives it only through HTTP, the
same way the pipeline does in production.
"""

from __future__ import annotations

import math
import threading
import time

import pytest
import requests
import uvicorn

from embedsvc import create_app


@pytest.fixture(scope="module")
def service_url():
    config = uvicorn.Config(
        create_app(), host="127.0.0.1", port=0, log_level="warning"
    )
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("service did not start")
        time.sleep(0.02)
    host, port = server.servers[0].sockets[0].getsockname()[:2]
    yield f"http://{host}:{port}"
    server.should_exit = True
    thread.join(timeout=5)


class TestWireContract:
    def test_health_then_embed_round_trip(self, service_url):
        health = requests.get(f"{service_url}/health", timeout=5).json()
        assert health["status"] == "ok"
        response = requests.post(
            f"{service_url}/embed", json={"texts": ["one", "two"]}, timeout=5
        ).json()
        assert response["provider_id"] == health["provider_id"]
        assert response["dim"] == health["dim"]
        assert len(response["vectors"]) == 2
        for vector in response["vectors"]:
            assert len(vector) == health["dim"]
            assert abs(math.sqrt(sum(v * v for v in vector)) - 1.0) <= 1e-6


class TestPrimaryConsumesService:
    def test_remote_provider_selects_neighbors(self, service_url):
        docie = pytest.importorskip("docie")
        from docie.fixtures import funsd_fixture
        from docie.similarity import RemoteEmbeddingProvider, select_nearest_neighbors

        provider = RemoteEmbeddingProvider(service_url)
        assert provider.provider_id.startswith("embedsvc:")
        train, test = funsd_fixture()
        nmap = select_nearest_neighbors(train, test, provider)
        assert set(nmap.pairs) == {doc.doc_id for doc in test}
        for train_id, score in nmap.pairs.values():
            assert train_id in {doc.doc_id for doc in train}
            assert -1.0 <= score <= 1.0

    def test_vectors_match_batch_splitting(self, service_url):
        from docie.similarity import RemoteEmbeddingProvider

        provider = RemoteEmbeddingProvider(service_url, batch_size=2)
        texts = [f"text number {i}" for i in range(5)]
        split = provider.embed(texts)
        whole = RemoteEmbeddingProvider(service_url).embed(texts)
        assert split == whole
