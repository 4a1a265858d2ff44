"""Construction of the four in-context demonstration kinds.

Hard demonstrations come from the reading-order windows the backend currently
labels worst under zero-shot prompting; layout demonstrations capture a
model-generated description of spatial relations over a region of those
windows; formatting demonstrations teach the exact answer serialization on
randomly sampled segments; the label mapping translates label tokens into the
answer space. All construction is deterministic given (pool, scores, seed,
backend transcript).
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ._util import atomic_write_text, canonical_json, derive_seed, sha256_hex
from .core import Document, LabelSchema, Segment
from .errors import BackendError, EmptyPoolError, RegionTooSmallError
from .extraction import align_predictions, parse_labeled_segments
from .llm import Backend, CompletionRequest
from .prompting import (
    DEFAULT_BUDGET,
    DEFAULT_ESTIMATOR,
    DEFAULT_QUESTION,
    LAYOUT_QUESTION,
    TokenEstimator,
    chunk_query,
    render_answer_line,
    render_labeled_entries,
    render_query_block,
    render_query_entries,
)

DEMO_KINDS = ("mapping", "hard", "layout", "formatting")
DEFAULT_COUNTS = (4, 4, 4)
DEFAULT_HALF_WIDTH = 3
DEFAULT_REGION_BOUNDS = (6, 20)

_NUMBER_WORDS = {
    1: "one", 2: "two", 3: "three", 4: "four", 5: "five", 6: "six",
    7: "seven", 8: "eight", 9: "nine", 10: "ten", 11: "eleven", 12: "twelve",
}


@dataclass(frozen=True)
class Demonstration:
    """One in-context example with its rendered block and provenance."""

    kind: str
    rendered: str
    source_doc: str | None
    source_segments: tuple[str, ...] = ()
    created_by: str = "gold"
    iteration: int = 0
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in DEMO_KINDS:
            raise ValueError(f"unknown demonstration kind {self.kind!r}")
        if not self.rendered or not self.rendered.endswith("\n"):
            raise ValueError("rendered block must be non-empty and newline-terminated")
        if self.kind == "mapping" and self.source_doc is not None:
            raise ValueError("mapping demonstrations carry no source document")
        if self.kind != "mapping" and self.source_doc is None:
            raise ValueError(f"{self.kind} demonstrations need a source document")
        if self.kind == "layout" and self.created_by != "llm":
            raise ValueError("layout descriptions are model-generated")
        if self.created_by not in ("gold", "llm"):
            raise ValueError(f"unknown creator {self.created_by!r}")


@dataclass(frozen=True)
class DemoSet:
    """A complete set of demonstrations ready for prompt assembly."""

    mapping: Demonstration
    hard: tuple[Demonstration, ...]
    layout: tuple[Demonstration, ...]
    formatting: tuple[Demonstration, ...]

    def __post_init__(self) -> None:
        for name in ("hard", "layout", "formatting"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    @property
    def counts(self) -> tuple[int, int, int]:
        return (len(self.hard), len(self.layout), len(self.formatting))

    def is_complete(self) -> bool:
        return bool(self.hard) and bool(self.layout) and bool(self.formatting)


@dataclass(frozen=True)
class SegmentScore:
    """Binary per-segment correctness from a prediction pass."""

    doc_id: str
    segment_id: str
    f1: float

    def __post_init__(self) -> None:
        if self.f1 not in (0.0, 1.0):
            raise ValueError("segment-level score is binary")


def scores_to_map(scores: Iterable[SegmentScore]) -> dict[tuple[str, str], float]:
    return {(s.doc_id, s.segment_id): s.f1 for s in scores}


def zero_shot_score(
    doc: Document,
    schema: LabelSchema,
    backend: Backend,
    *,
    budget: int = DEFAULT_BUDGET,
    estimator: TokenEstimator = DEFAULT_ESTIMATOR,
    question: str = DEFAULT_QUESTION,
    model: str = "scripted",
) -> list[SegmentScore]:
    """Ask for labels with the bare question and score each segment 0/1.

    Segments the parser could not match score 0 regardless of their gold
    label, so garbage output never looks like a correct "other" call.
    """
    if not doc.ordered:
        raise ValueError(f"document {doc.doc_id!r} must be ordered before scoring")
    scores: list[SegmentScore] = []
    for index, chunk in enumerate(chunk_query(doc, budget, 0, estimator=estimator, question=question)):
        prompt = render_query_block(chunk, question)
        request = CompletionRequest(
            prompt, model=model, tag=f"zero-shot:{doc.doc_id}:{index}"
        )
        try:
            response = backend.complete(request)
        except BackendError as exc:
            raise type(exc)(f"zero-shot chunk {index} of {doc.doc_id!r}: {exc}") from exc
        entities, _ = parse_labeled_segments(response.text)
        labeled, diagnostics = align_predictions(entities, chunk, schema)
        unmatched = {d.segment_id for d in diagnostics if d.code == "Unmatched"}
        for segment in labeled:
            if segment.id in unmatched:
                value = 0.0
            else:
                value = 1.0 if segment.predicted_label == segment.gold_label else 0.0
            scores.append(SegmentScore(doc.doc_id, segment.id, value))
    return scores


@dataclass(frozen=True)
class WindowCandidate:
    """A contiguous reading-order window with its mean correctness."""

    mean_score: float
    doc_id: str
    center: int
    segments: tuple[Segment, ...]


def rank_windows(
    pool_docs: Sequence[Document],
    scores: Mapping[tuple[str, str], float],
    half_width: int = DEFAULT_HALF_WIDTH,
) -> list[WindowCandidate]:
    """All deduplicated windows, worst mean score first, ties by (doc, index)."""
    if not pool_docs:
        raise EmptyPoolError("no documents in the demonstration pool")
    candidates: list[WindowCandidate] = []
    for doc in sorted(pool_docs, key=lambda d: d.doc_id):
        n = len(doc.segments)
        seen_spans: set[tuple[int, int]] = set()
        for center in range(n):
            lo = max(0, center - half_width)
            hi = min(n, center + half_width + 1)
            if (lo, hi) in seen_spans:
                continue
            seen_spans.add((lo, hi))
            window = doc.segments[lo:hi]
            try:
                total = math.fsum(scores[(doc.doc_id, s.id)] for s in window)
            except KeyError as exc:
                raise ValueError(
                    f"score missing for segment {exc.args[0]!r}; "
                    "scores must cover the whole pool"
                ) from None
            candidates.append(
                WindowCandidate(total / len(window), doc.doc_id, center, window)
            )
    if not candidates:
        raise EmptyPoolError("pool documents contain no segments")
    candidates.sort(key=lambda c: (c.mean_score, c.doc_id, c.center))
    return candidates


def hard_demo_from_window(
    candidate: WindowCandidate,
    *,
    question: str = DEFAULT_QUESTION,
    iteration: int = 0,
    notes: tuple[str, ...] = (),
) -> Demonstration:
    rendered = (
        "Context:"
        + render_query_entries(candidate.segments)
        + ","
        + question
        + "\n"
        + render_answer_line(candidate.segments)
        + "\n"
    )
    return Demonstration(
        kind="hard",
        rendered=rendered,
        source_doc=candidate.doc_id,
        source_segments=tuple(s.id for s in candidate.segments),
        created_by="gold",
        iteration=iteration,
        notes=notes,
    )


def build_initial_hard(
    pool_docs: Sequence[Document],
    scores: Mapping[tuple[str, str], float] | Iterable[SegmentScore],
    k_hard: int,
    *,
    question: str = DEFAULT_QUESTION,
    half_width: int = DEFAULT_HALF_WIDTH,
) -> list[Demonstration]:
    """Select the k lowest-scoring windows and render them as hard demos."""
    if k_hard < 1:
        raise ValueError("k_hard must be at least 1")
    if not isinstance(scores, Mapping):
        scores = scores_to_map(scores)
    candidates = rank_windows(pool_docs, scores, half_width)
    all_perfect = all(score == 1.0 for score in scores.values())
    notes = ("no-hard-found",) if all_perfect else ()
    return [
        hard_demo_from_window(candidate, question=question, iteration=0, notes=notes)
        for candidate in candidates[:k_hard]
    ]


def build_layout_demo(
    region: Sequence[Segment],
    backend: Backend,
    *,
    source_doc: str,
    question: str = LAYOUT_QUESTION,
    model: str = "scripted",
) -> Demonstration:
    """Ask the backend to describe the region; its answer is kept verbatim."""
    if len(region) < 2:
        raise RegionTooSmallError(
            f"layout region needs at least 2 segments, got {len(region)}"
        )
    query = "Q:" + render_labeled_entries(region) + ", " + question
    request = CompletionRequest(query, model=model, tag=f"layout:{source_doc}")
    response = backend.complete(request)
    answer = response.text
    rendered = query + "\nA:" + answer + ("" if answer.endswith("\n") else "\n")
    return Demonstration(
        kind="layout",
        rendered=rendered,
        source_doc=source_doc,
        source_segments=tuple(s.id for s in region),
        created_by="llm",
    )


def build_formatting_demos(
    pool_docs: Sequence[Document],
    rng_seed: int,
    k_fmt: int,
    *,
    question: str = DEFAULT_QUESTION,
    max_group: int = 2,
) -> list[Demonstration]:
    """Uniformly sample segments (seeded) and render Q/A formatting pairs."""
    if k_fmt < 1:
        raise ValueError("k_fmt must be at least 1")
    flat: list[tuple[Document, int]] = []
    for doc in sorted(pool_docs, key=lambda d: d.doc_id):
        flat.extend((doc, index) for index in range(len(doc.segments)))
    if not flat:
        raise EmptyPoolError("no segments to sample formatting demonstrations from")
    rng = random.Random(rng_seed)
    if len(flat) >= k_fmt:
        picks = rng.sample(range(len(flat)), k_fmt)
    else:
        picks = [rng.randrange(len(flat)) for _ in range(k_fmt)]
    demos: list[Demonstration] = []
    for pick in picks:
        doc, index = flat[pick]
        size = min(rng.randint(1, max_group), len(doc.segments) - index)
        group = doc.segments[index : index + size]
        rendered = (
            render_query_block(group, question)
            + "\nA:"
            + render_answer_line(group)
            + "\n"
        )
        demos.append(
            Demonstration(
                kind="formatting",
                rendered=rendered,
                source_doc=doc.doc_id,
                source_segments=tuple(s.id for s in group),
                created_by="gold",
            )
        )
    return demos


def build_label_mapping(schema: LabelSchema) -> Demonstration:
    """Render the label space: an enumeration sentence for natural labels,
    otherwise one "LABEL : description" line per label."""
    labels = schema.prompt_labels()
    natural = all(schema.descriptions[label] == label for label in labels)
    if natural:
        rendered = _enumeration_sentence(labels) + "\n"
    else:
        rendered = "\n".join(f"{label} : {schema.descriptions[label]}" for label in labels) + "\n"
    return Demonstration(kind="mapping", rendered=rendered, source_doc=None)


def _enumeration_sentence(labels: Sequence[str]) -> str:
    count = len(labels)
    word = _NUMBER_WORDS.get(count, str(count))
    quoted = [f'"{label}"' for label in labels]
    if count == 1:
        return f"There is one label for selection, {quoted[0]}."
    if count == 2:
        listing = f"{quoted[0]} and {quoted[1]}"
    else:
        listing = ", ".join(quoted[:-1]) + f", and {quoted[-1]}"
    return f"There are {word} labels for selection, {listing}."


def build_layout_demos(
    pool_docs: Sequence[Document],
    hard_demos: Sequence[Demonstration],
    backend: Backend,
    *,
    n_layout: int,
    seed: int,
    question: str = LAYOUT_QUESTION,
    region_bounds: tuple[int, int] = DEFAULT_REGION_BOUNDS,
    model: str = "scripted",
) -> list[Demonstration]:
    """Grow seeded regions around hard windows and describe each one."""
    if n_layout < 1:
        raise ValueError("n_layout must be at least 1")
    if not hard_demos:
        raise EmptyPoolError("layout regions are drawn from hard demonstrations")
    docs_by_id = {doc.doc_id: doc for doc in pool_docs}
    rng = random.Random(seed)
    demos: list[Demonstration] = []
    attempts = 0
    while len(demos) < n_layout:
        attempts += 1
        if attempts > n_layout * 10:
            raise RegionTooSmallError(
                "could not draw enough layout regions from the hard windows"
            )
        hard = hard_demos[rng.randrange(len(hard_demos))]
        doc = docs_by_id.get(hard.source_doc or "")
        if doc is None or len(doc.segments) < 2:
            continue
        positions = [
            i for i, s in enumerate(doc.segments) if s.id in set(hard.source_segments)
        ]
        lo, hi = (min(positions), max(positions) + 1) if positions else (0, len(doc.segments))
        size = rng.randint(*region_bounds)
        size = max(2, min(size, len(doc.segments)))
        center = (lo + hi) // 2
        start = max(0, center - size // 2)
        end = min(len(doc.segments), start + size)
        start = max(0, end - size)
        region = doc.segments[start:end]
        demos.append(
            build_layout_demo(
                region, backend, source_doc=doc.doc_id, question=question, model=model
            )
        )
    return demos


def build_demo_set(
    pool_docs: Sequence[Document],
    schema: LabelSchema,
    backend: Backend,
    *,
    counts: tuple[int, int, int] = DEFAULT_COUNTS,
    seed: int = 0,
    question: str = DEFAULT_QUESTION,
    layout_question: str = LAYOUT_QUESTION,
    half_width: int = DEFAULT_HALF_WIDTH,
    region_bounds: tuple[int, int] = DEFAULT_REGION_BOUNDS,
    budget: int = DEFAULT_BUDGET,
    estimator: TokenEstimator = DEFAULT_ESTIMATOR,
    model: str = "scripted",
    scores: Mapping[tuple[str, str], float] | None = None,
) -> DemoSet:
    """Zero-shot score the pool and construct all four demonstration kinds."""
    if not pool_docs:
        raise EmptyPoolError("cannot build demonstrations from an empty pool")
    pool = sorted(pool_docs, key=lambda d: d.doc_id)
    n_hard, n_layout, n_fmt = counts
    if scores is None:
        merged: dict[tuple[str, str], float] = {}
        for doc in pool:
            merged.update(
                scores_to_map(
                    zero_shot_score(
                        doc, schema, backend,
                        budget=budget, estimator=estimator, question=question, model=model,
                    )
                )
            )
        scores = merged
    mapping = build_label_mapping(schema)
    hard = build_initial_hard(
        pool, scores, n_hard, question=question, half_width=half_width
    )
    layout = build_layout_demos(
        pool, hard, backend,
        n_layout=n_layout,
        seed=derive_seed(seed, "layout"),
        question=layout_question,
        region_bounds=region_bounds,
        model=model,
    )
    formatting = build_formatting_demos(
        pool, derive_seed(seed, "formatting"), n_fmt, question=question
    )
    return DemoSet(mapping, tuple(hard), tuple(layout), tuple(formatting))


def demoset_hash(demoset: DemoSet) -> str:
    return sha256_hex(canonical_json(_demoset_payload(demoset)))


def _demo_payload(demo: Demonstration) -> dict:
    return {
        "kind": demo.kind,
        "rendered": demo.rendered,
        "source_doc": demo.source_doc,
        "source_segments": list(demo.source_segments),
        "created_by": demo.created_by,
        "iteration": demo.iteration,
        "notes": list(demo.notes),
    }


def _demo_from_payload(payload: dict) -> Demonstration:
    return Demonstration(
        kind=payload["kind"],
        rendered=payload["rendered"],
        source_doc=payload["source_doc"],
        source_segments=tuple(payload["source_segments"]),
        created_by=payload["created_by"],
        iteration=payload["iteration"],
        notes=tuple(payload.get("notes", ())),
    )


def _demoset_payload(demoset: DemoSet) -> dict:
    return {
        "mapping": _demo_payload(demoset.mapping),
        "hard": [_demo_payload(d) for d in demoset.hard],
        "layout": [_demo_payload(d) for d in demoset.layout],
        "formatting": [_demo_payload(d) for d in demoset.formatting],
        "counts": list(demoset.counts),
    }


def save_demoset(
    demoset: DemoSet,
    path: str | Path,
    *,
    seed: int | None = None,
    provenance: Mapping[str, object] | None = None,
) -> None:
    payload = {
        "format": "docie/demoset",
        "version": 1,
        "hash": demoset_hash(demoset),
        "seed": seed,
        "provenance": dict(provenance or {}),
        **_demoset_payload(demoset),
    }
    atomic_write_text(Path(path), canonical_json(payload) + "\n")


def load_demoset(path: str | Path) -> tuple[DemoSet, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != "docie/demoset" or payload.get("version") != 1:
        raise ValueError(f"not a demo-set file: {path}")
    demoset = DemoSet(
        mapping=_demo_from_payload(payload["mapping"]),
        hard=tuple(_demo_from_payload(d) for d in payload["hard"]),
        layout=tuple(_demo_from_payload(d) for d in payload["layout"]),
        formatting=tuple(_demo_from_payload(d) for d in payload["formatting"]),
    )
    meta = {
        "seed": payload.get("seed"),
        "provenance": payload.get("provenance", {}),
        "hash": payload.get("hash"),
    }
    return demoset, meta
