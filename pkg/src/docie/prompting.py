"""Prompt assembly: block rendering, demonstration ordering, token budget.

The record grammar used everywhere is
``{text:"...",Box:[x0 y0 x1 y1]}`` for unlabeled entries and
``{text:"...",Box:[x0 y0 x1 y1],entity:LABEL}`` for labeled ones; answer
lines terminate with a period. Query blocks open with "Q:" and close with the
label question, and the assembled prompt always ends with the query block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol, Sequence

from .core import BBox, Document, Segment
from .errors import QueryTooLargeError, SegmentTooLargeError

if TYPE_CHECKING:  # demos imports this module; annotation only
    from .demos import DemoSet

DEFAULT_QUESTION = "What are the labels for these texts?"
LAYOUT_QUESTION = "Please describe the positional relationship of these texts?"
SROIE_GROUPED_QUESTION = "Return text labeled as company, original address, total, and date?"

DEFAULT_BUDGET = 3600

ORDER_POLICIES: dict[str, tuple[str, ...]] = {
    "M-H-L-F": ("mapping", "hard", "layout", "formatting"),
    "M-L-H-F": ("mapping", "layout", "hard", "formatting"),
}


class TokenEstimator(Protocol):
    def estimate(self, text: str) -> int: ...


class CharBudgetEstimator:
    """Character-count heuristic; exact tokenizers plug in via the protocol."""

    def __init__(self, chars_per_token: int = 4) -> None:
        if chars_per_token < 1:
            raise ValueError("chars_per_token must be positive")
        self.chars_per_token = chars_per_token

    def estimate(self, text: str) -> int:
        return (len(text) + self.chars_per_token - 1) // self.chars_per_token


DEFAULT_ESTIMATOR = CharBudgetEstimator()


def render_entry(text: str, box: BBox, label: str | None = None) -> str:
    if label is None:
        return f'{{text:"{text}",Box:{box.render()}}}'
    return f'{{text:"{text}",Box:{box.render()},entity:{label}}}'


def render_query_entries(segments: Sequence[Segment]) -> str:
    return "".join(render_entry(s.text, s.box) for s in segments)


def render_labeled_entries(segments: Sequence[Segment], which: str = "gold") -> str:
    parts = []
    for segment in segments:
        label = segment.gold_label if which == "gold" else segment.predicted_label
        if label is None:
            raise ValueError(f"segment {segment.id!r} has no {which} label to render")
        parts.append(render_entry(segment.text, segment.box, label))
    return "".join(parts)


def render_query_block(segments: Sequence[Segment], question: str = DEFAULT_QUESTION) -> str:
    return "Q:" + render_query_entries(segments) + "," + question


def render_answer_line(segments: Sequence[Segment], which: str = "gold") -> str:
    return render_labeled_entries(segments, which) + "."


@dataclass(frozen=True)
class PromptBundle:
    """A fully assembled prompt plus bookkeeping for budget decisions."""

    text: str
    order: tuple[str, ...]
    query_segments: tuple[str, ...]
    token_estimate: int
    budget: int
    dropped: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.token_estimate > self.budget:
            raise ValueError("prompt bundle exceeds its budget")


def _joined(blocks: Sequence[str], query_block: str) -> str:
    stripped = [block.rstrip("\n") for block in blocks]
    return "\n\n".join([*stripped, query_block])


def assemble_prompt(
    demoset: "DemoSet",
    query_segments: Sequence[Segment],
    *,
    order_policy: str = "M-H-L-F",
    budget: int = DEFAULT_BUDGET,
    estimator: TokenEstimator = DEFAULT_ESTIMATOR,
    question: str = DEFAULT_QUESTION,
) -> PromptBundle:
    """Concatenate demonstration blocks in the given order ahead of the query.

    When the prompt overflows the budget, demonstrations are sacrificed in a
    fixed order (oldest hard, then extra layout, then extra formatting); the
    mapping block and the query are never dropped.
    """
    if order_policy not in ORDER_POLICIES:
        raise ValueError(f"unknown order policy {order_policy!r}")
    if not query_segments:
        raise ValueError("query chunk must be non-empty")
    query_block = render_query_block(query_segments, question)
    if estimator.estimate(query_block) > budget:
        raise QueryTooLargeError(
            f"query block alone estimates over the budget of {budget}"
        )

    groups = {
        "mapping": [demoset.mapping],
        "hard": list(demoset.hard),
        "layout": list(demoset.layout),
        "formatting": list(demoset.formatting),
    }
    # oldest hard first, then extra (non-first) layout and formatting demos
    # newest-first; the last layout/formatting exemplars go only as a last
    # resort, and the mapping and query are never candidates
    sacrifice: list[tuple[str, int]] = [("hard", i) for i in range(len(groups["hard"]))]
    sacrifice += [("layout", i) for i in reversed(range(1, len(groups["layout"])))]
    sacrifice += [("formatting", i) for i in reversed(range(1, len(groups["formatting"])))]
    if groups["layout"]:
        sacrifice.append(("layout", 0))
    if groups["formatting"]:
        sacrifice.append(("formatting", 0))

    removed: set[tuple[str, int]] = set()
    dropped: list[str] = []

    def current() -> tuple[str, tuple[str, ...]]:
        blocks: list[str] = []
        kinds: list[str] = []
        for kind in ORDER_POLICIES[order_policy]:
            for index, demo in enumerate(groups[kind]):
                if (kind, index) in removed:
                    continue
                blocks.append(demo.rendered)
                kinds.append(kind)
        return _joined(blocks, query_block), (*kinds, "query")

    text, kinds = current()
    queue = iter(sacrifice)
    while estimator.estimate(text) > budget:
        try:
            victim = next(queue)
        except StopIteration:
            raise QueryTooLargeError(
                "prompt exceeds budget even after dropping every droppable demonstration"
            ) from None
        removed.add(victim)
        dropped.append(f"{victim[0]}[{victim[1]}]")
        text, kinds = current()

    return PromptBundle(
        text=text,
        order=kinds,
        query_segments=tuple(s.id for s in query_segments),
        token_estimate=estimator.estimate(text),
        budget=budget,
        dropped=tuple(dropped),
    )


def chunk_query(
    doc: Document,
    budget: int,
    demos_overhead: int,
    *,
    estimator: TokenEstimator = DEFAULT_ESTIMATOR,
    question: str = DEFAULT_QUESTION,
) -> list[tuple[Segment, ...]]:
    """Split a document into consecutive reading-order chunks that fit.

    The concatenation of the chunks is exactly the document's segment list.
    """
    if not doc.ordered:
        raise ValueError(f"document {doc.doc_id!r} must be ordered before chunking")
    residual = budget - demos_overhead
    chunks: list[tuple[Segment, ...]] = []
    current: list[Segment] = []
    for segment in doc.segments:
        if estimator.estimate(render_query_block([*current, segment], question)) <= residual:
            current.append(segment)
            continue
        if not current:
            raise SegmentTooLargeError(
                f"segment {segment.id!r} alone exceeds the residual budget {residual}"
            )
        chunks.append(tuple(current))
        current = [segment]
        if estimator.estimate(render_query_block(current, question)) > residual:
            raise SegmentTooLargeError(
                f"segment {segment.id!r} alone exceeds the residual budget {residual}"
            )
    if current:
        chunks.append(tuple(current))
    return chunks
