from __future__ import annotations

import random

import pytest

from docie.core import BBox, Document, Segment, funsd_schema
from docie.fixtures import funsd_fixture
from docie.llm import OracleBackend
from docie.ordering import order_document


@pytest.fixture
def schema():
    return funsd_schema()


@pytest.fixture
def fixture_corpus():
    return funsd_fixture()


@pytest.fixture
def oracle(fixture_corpus):
    train, test = fixture_corpus
    return OracleBackend(train + test)


def random_document(
    rng: random.Random,
    doc_id: str,
    *,
    dataset: str = "FUNSD",
    split: str = "train",
    labels: tuple[str, ...] = ("question", "answer", "header", "other"),
    max_segments: int = 12,
    ordered: bool = True,
) -> Document:
    """Small random document with non-degenerate boxes and unique texts."""
    n = rng.randint(1, max_segments)
    segments = []
    for index in range(n):
        x0 = rng.randrange(0, 900)
        y0 = rng.randrange(0, 900)
        box = BBox(x0, y0, x0 + rng.randrange(5, 100), y0 + rng.randrange(5, 60))
        segments.append(
            Segment(
                id=f"{doc_id}:{index}",
                text=f"{doc_id.upper()} FIELD {index} {rng.randrange(1000)}",
                box=box,
                gold_label=labels[rng.randrange(len(labels))],
            )
        )
    doc = Document(doc_id=doc_id, dataset=dataset, split=split, segments=tuple(segments))
    return order_document(doc) if ordered else doc
