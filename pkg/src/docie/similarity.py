"""Document embeddings and nearest-neighbor training-document selection.

Three providers share one contract: a deterministic local hashed-ngram
embedder (so the whole suite runs offline), the remote embedding sidecar, and
any OpenAI-compatible embeddings endpoint. Only the cosine argmax structure
matters downstream, so providers are freely interchangeable per run — but
vectors from different providers are never compared.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import requests

from ._util import atomic_write_text, bounded_map, canonical_json, sha256_hex
from .core import Document
from .errors import (
    DimensionMismatchError,
    ProviderUnavailableError,
    ZeroVectorError,
)


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    dim: int
    provider_id: str

    def __post_init__(self) -> None:
        if not isinstance(self.values, tuple):
            object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) != self.dim:
            raise DimensionMismatchError(
                f"vector length {len(self.values)} != declared dim {self.dim}"
            )
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding values must be finite")


class EmbeddingProvider(Protocol):
    provider_id: str

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class LocalHashProvider:
    """Hashed character-ngram frequency vectors, L2-normalized, dim 256.

    Fully deterministic and dependency-free; stands in for a sentence encoder
    when running offline. Empty text maps to a pinned unit vector (1 in the
    first component).
    """

    def __init__(self, dim: int = 256, ngram: int = 3) -> None:
        self.dim = dim
        self.ngram = ngram
        self.provider_id = f"local-ngram{dim}-v1"

    def _bucket(self, gram: str) -> int:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            counts = [0.0] * self.dim
            lowered = text.lower()
            padded = f" {lowered} "
            for start in range(max(0, len(padded) - self.ngram + 1)):
                counts[self._bucket(padded[start : start + self.ngram])] += 1.0
            norm = math.sqrt(sum(c * c for c in counts))
            if norm == 0.0:
                unit = [0.0] * self.dim
                unit[0] = 1.0
                vectors.append(unit)
            else:
                vectors.append([c / norm for c in counts])
        return vectors


class RemoteEmbeddingProvider:
    """Client for the embedding sidecar: GET /health, POST /embed."""

    def __init__(
        self,
        base_url: str,
        *,
        timeout: tuple[float, float] = (15.0, 120.0),
        batch_size: int = 128,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.batch_size = batch_size
        self._session = session or requests.Session()
        try:
            response = self._session.get(f"{self.base_url}/health", timeout=timeout)
        except requests.RequestException as exc:
            raise ProviderUnavailableError(f"embedding service unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProviderUnavailableError(
                f"embedding service not ready (status {response.status_code})"
            )
        health = response.json()
        self.provider_id = str(health["provider_id"])
        self.dim = int(health["dim"])

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors: list[list[float]] = []
        for start in range(0, len(texts), self.batch_size):
            batch = list(texts[start : start + self.batch_size])
            try:
                response = self._session.post(
                    f"{self.base_url}/embed", json={"texts": batch}, timeout=self.timeout
                )
            except requests.RequestException as exc:
                raise ProviderUnavailableError(f"embed request failed: {exc}") from exc
            if response.status_code != 200:
                raise ProviderUnavailableError(
                    f"embed request failed with status {response.status_code}"
                )
            payload = response.json()
            got = payload.get("vectors", [])
            if len(got) != len(batch):
                raise DimensionMismatchError(
                    f"service returned {len(got)} vectors for {len(batch)} texts"
                )
            for vector in got:
                if len(vector) != self.dim:
                    raise DimensionMismatchError(
                        f"service returned dim {len(vector)}, expected {self.dim}"
                    )
            vectors.extend([list(map(float, vector)) for vector in got])
        return vectors


class OpenAICompatProvider:
    """Any OpenAI-compatible /v1/embeddings endpoint."""

    def __init__(
        self,
        base_url: str,
        model: str,
        *,
        path: str = "/v1/embeddings",
        api_key_env: str = "OPENAI_API_KEY",
        timeout: tuple[float, float] = (15.0, 120.0),
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.path = path
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._session = session or requests.Session()
        self.provider_id = f"openai:{model}"
        self.dim: int | None = None

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            response = self._session.post(
                f"{self.base_url}{self.path}",
                json={"model": self.model, "input": list(texts)},
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderUnavailableError(f"embeddings request failed: {exc}") from exc
        if response.status_code != 200:
            raise ProviderUnavailableError(
                f"embeddings request failed with status {response.status_code}"
            )
        data = response.json()["data"]
        vectors = [list(map(float, row["embedding"])) for row in data]
        if len(vectors) != len(texts):
            raise DimensionMismatchError(
                f"endpoint returned {len(vectors)} vectors for {len(texts)} texts"
            )
        for vector in vectors:
            if self.dim is None:
                self.dim = len(vector)
            elif len(vector) != self.dim:
                raise DimensionMismatchError("inconsistent embedding dimensions")
        return vectors


_SAFE_COMPONENT = re.compile(r"[^A-Za-z0-9._-]+")


class EmbeddingCache:
    """Disk cache keyed by (provider_id, content hash); one file per hash."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self._lock = threading.Lock()

    def _path(self, provider_id: str, text: str) -> Path:
        safe = _SAFE_COMPONENT.sub("_", provider_id)
        return self.directory / safe / f"{sha256_hex(text)}.json"

    def get(self, provider_id: str, text: str) -> list[float] | None:
        path = self._path(provider_id, text)
        if not path.exists():
            return None
        payload = json.loads(path.read_text(encoding="utf-8"))
        return [float(v) for v in payload["values"]]

    def put(self, provider_id: str, text: str, values: Sequence[float]) -> None:
        path = self._path(provider_id, text)
        record = {"provider_id": provider_id, "values": list(values)}
        with self._lock:
            atomic_write_text(path, canonical_json(record))


def embed_documents(
    docs: Sequence[Document],
    provider: EmbeddingProvider,
    *,
    cache: EmbeddingCache | None = None,
    max_workers: int = 1,
    batch_size: int = 32,
) -> list[EmbeddingVector]:
    """One vector per document, over its full reading-order text."""
    for doc in docs:
        if not doc.ordered:
            raise ValueError(f"document {doc.doc_id!r} must be ordered before embedding")
    texts = [doc.full_text() for doc in docs]
    values: list[list[float] | None] = [None] * len(texts)
    missing: list[int] = []
    for index, text in enumerate(texts):
        cached = cache.get(provider.provider_id, text) if cache else None
        if cached is None:
            missing.append(index)
        else:
            values[index] = cached
    if missing:
        batches = [missing[i : i + batch_size] for i in range(0, len(missing), batch_size)]

        def run(batch: list[int]) -> list[list[float]]:
            return provider.embed([texts[i] for i in batch])

        for batch, result in zip(batches, bounded_map(run, batches, max_workers)):
            for index, vector in zip(batch, result):
                values[index] = vector
                if cache:
                    cache.put(provider.provider_id, texts[index], vector)
    dims = {len(v) for v in values if v is not None}
    if len(dims) > 1:
        raise DimensionMismatchError(f"provider returned mixed dimensions {sorted(dims)}")
    return [
        EmbeddingVector(tuple(vector), len(vector), provider.provider_id)
        for vector in values  # type: ignore[union-attr,arg-type]
    ]


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity; exact symmetry in its arguments."""
    if a.provider_id != b.provider_id:
        raise ValueError(
            f"vectors from different providers are never compared "
            f"({a.provider_id!r} vs {b.provider_id!r})"
        )
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dim {a.dim} vs {b.dim}")
    norm_a = math.sqrt(sum(x * x for x in a.values))
    norm_b = math.sqrt(sum(x * x for x in b.values))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine undefined for an all-zero vector")
    dot = sum(x * y for x, y in zip(a.values, b.values))
    return max(-1.0, min(1.0, dot / (norm_a * norm_b)))


@dataclass(frozen=True)
class NeighborMap:
    """test doc_id -> (nearest train doc_id, cosine score)."""

    pairs: Mapping[str, tuple[str, float]]

    def pool(self) -> tuple[str, ...]:
        """Deduplicated selected training documents, for demo construction."""
        return tuple(sorted({train_id for train_id, _ in self.pairs.values()}))

    def to_json(self) -> str:
        payload = {
            "format": "docie/neighbors",
            "version": 1,
            "pairs": {
                test_id: {"train_doc": train_id, "score": score}
                for test_id, (train_id, score) in sorted(self.pairs.items())
            },
        }
        return canonical_json(payload)

    @classmethod
    def from_json(cls, text: str) -> "NeighborMap":
        payload = json.loads(text)
        pairs = {
            test_id: (entry["train_doc"], float(entry["score"]))
            for test_id, entry in payload["pairs"].items()
        }
        return cls(pairs)


def select_nearest_neighbors(
    train_docs: Sequence[Document],
    test_docs: Sequence[Document],
    provider: EmbeddingProvider,
    *,
    cache: EmbeddingCache | None = None,
    max_workers: int = 1,
) -> NeighborMap:
    """Argmax-cosine training document per test document.

    Ties break toward the lexicographically smallest train doc_id; the same
    training document may serve many test documents.
    """
    if not train_docs or not test_docs:
        raise ValueError("both train and test sets must be non-empty")
    ordered_train = sorted(train_docs, key=lambda d: d.doc_id)
    vectors = embed_documents(
        [*ordered_train, *test_docs], provider, cache=cache, max_workers=max_workers
    )
    train_vectors = vectors[: len(ordered_train)]
    test_vectors = vectors[len(ordered_train) :]
    pairs: dict[str, tuple[str, float]] = {}
    for test_doc, test_vec in zip(test_docs, test_vectors):
        best: tuple[str, float] | None = None
        for train_doc, train_vec in zip(ordered_train, train_vectors):
            score = cosine(test_vec, train_vec)
            if best is None or score > best[1]:
                best = (train_doc.doc_id, score)
        assert best is not None
        pairs[test_doc.doc_id] = best
    return NeighborMap(pairs)
