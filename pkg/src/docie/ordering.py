"""Reading-order recovery via recursive XY-cut.

At every node the widest qualifying whitespace gap wins, with ties going to
the horizontal cut so rows come before columns; groups that no qualifying gap
can split are sorted by (y0, x0, id). The output is always a permutation of
the input ids and is invariant under translation of all boxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import Document, Segment

AXIS_X = "x"
AXIS_Y = "y"


@dataclass(frozen=True)
class OrderingParams:
    """Knobs for the cut recursion; gaps are in 0-1000 grid units."""

    min_gap_x: int = 10
    min_gap_y: int = 10
    max_depth: int = 32

    def __post_init__(self) -> None:
        if self.min_gap_x < 0 or self.min_gap_y < 0:
            raise ValueError("minimum gaps must be non-negative")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


DEFAULT_PARAMS = OrderingParams()


def _interval(segment: Segment, axis: str) -> tuple[int, int]:
    box = segment.box
    return (box.x0, box.x1) if axis == AXIS_X else (box.y0, box.y1)


def _widest_gap(
    segments: Sequence[Segment], axis: str, min_gap: int
) -> tuple[int, int, int] | None:
    """Return (width, gap_start, gap_end) of the widest qualifying gap, if any."""
    intervals = sorted(_interval(segment, axis) for segment in segments)
    merged: list[tuple[int, int]] = []
    for start, end in intervals:
        if merged and start < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    best: tuple[int, int, int] | None = None
    for (_, prev_end), (next_start, _) in zip(merged, merged[1:]):
        width = next_start - prev_end
        if width >= min_gap and (best is None or width > best[0]):
            best = (width, prev_end, next_start)
    return best


def _leaf_sort(segments: Sequence[Segment]) -> list[Segment]:
    return sorted(segments, key=lambda s: (s.box.y0, s.box.x0, s.id))


def _split(
    segments: Sequence[Segment], axis: str, gap_start: int, gap_end: int
) -> tuple[list[Segment], list[Segment]]:
    mid = (gap_start + gap_end) / 2
    first: list[Segment] = []
    second: list[Segment] = []
    for segment in segments:
        start, end = _interval(segment, axis)
        (first if (start + end) / 2 < mid else second).append(segment)
    return first, second


def _cut_node(
    segments: list[Segment], params: OrderingParams, depth: int
):
    """One recursion step: a leaf list, or (axis, gap, first, second)."""
    if len(segments) <= 1 or depth >= params.max_depth:
        return _leaf_sort(segments)
    gap_y = _widest_gap(segments, AXIS_Y, params.min_gap_y)
    gap_x = _widest_gap(segments, AXIS_X, params.min_gap_x)
    if gap_y is None and gap_x is None:
        return _leaf_sort(segments)
    if gap_x is None or (gap_y is not None and gap_y[0] >= gap_x[0]):
        axis, gap = AXIS_Y, gap_y
    else:
        axis, gap = AXIS_X, gap_x
    assert gap is not None
    first, second = _split(segments, axis, gap[1], gap[2])
    if not first or not second:
        return _leaf_sort(segments)
    return (axis, gap, first, second)


def _order(segments: list[Segment], params: OrderingParams, depth: int) -> list[Segment]:
    node = _cut_node(segments, params, depth)
    if isinstance(node, list):
        return node
    _axis, _gap, first, second = node
    return _order(first, params, depth + 1) + _order(second, params, depth + 1)


def xy_cut(segments: Sequence[Segment], params: OrderingParams = DEFAULT_PARAMS) -> list[str]:
    """Order segments by recursive XY-cut; returns the permuted segment ids."""
    return [segment.id for segment in _order(list(segments), params, 0)]


def order_document(doc: Document, params: OrderingParams = DEFAULT_PARAMS) -> Document:
    """Reorder a document's segments into reading order and mark it ordered."""
    by_id = {segment.id: segment for segment in doc.segments}
    ordered_ids = xy_cut(doc.segments, params)
    return doc.with_segments((by_id[sid] for sid in ordered_ids), ordered=True)


def cut_tree(segments: Sequence[Segment], params: OrderingParams = DEFAULT_PARAMS) -> str:
    """Indented text dump of the cut tree, for debugging layouts."""
    lines: list[str] = []

    def walk(group: list[Segment], depth: int) -> None:
        pad = "  " * depth
        node = _cut_node(group, params, depth)
        if isinstance(node, list):
            lines.append(pad + "leaf: " + " ".join(s.id for s in node))
            return
        axis, gap, first, second = node
        kind = "hcut" if axis == AXIS_Y else "vcut"
        lines.append(f"{pad}{kind} gap=[{gap[1]},{gap[2]}] width={gap[0]}")
        walk(first, depth + 1)
        walk(second, depth + 1)

    walk(list(segments), 0)
    return "\n".join(lines) + "\n"
