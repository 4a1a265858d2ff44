"""Embedding model implementations behind one small interface.

Every model returns one L2-normalized vector per input text and is
deterministic for a fixed checkpoint. The hashed-ngram model needs no
downloads, so the service works on an air-gapped box; any other model name is
treated as a sentence-transformers checkpoint.
"""

from __future__ import annotations

import hashlib
import math
from typing import Protocol, Sequence

HASH_MODEL_NAME = "hash-ngram-256"


class EmbeddingModel(Protocol):
    name: str
    dim: int

    def encode(self, texts: Sequence[str]) -> list[list[float]]: ...


class HashNgramModel:
    """Character trigram counts hashed into a fixed-width vector."""

    def __init__(self, dim: int = 256, ngram: int = 3) -> None:
        self.name = HASH_MODEL_NAME
        self.dim = dim
        self.ngram = ngram

    def _bucket(self, gram: str) -> int:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            counts = [0.0] * self.dim
            padded = f" {text.lower()} "
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


class SentenceTransformerModel:
    """Adapter around a sentence-transformers checkpoint."""

    def __init__(self, checkpoint: str) -> None:
        from sentence_transformers import SentenceTransformer

        self.name = checkpoint
        self._model = SentenceTransformer(checkpoint)
        probe = self._model.encode(["probe"], normalize_embeddings=True)
        self.dim = int(probe.shape[1])

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = self._model.encode(list(texts), normalize_embeddings=True)
        return [[float(v) for v in vector] for vector in vectors]


def load_model(name: str) -> EmbeddingModel:
    if name == HASH_MODEL_NAME:
        return HashNgramModel()
    return SentenceTransformerModel(name)
