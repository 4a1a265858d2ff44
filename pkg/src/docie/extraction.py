"""Parsers for model output and alignment back onto query segments.

Parsers are total: any input yields a (possibly empty) result plus a list of
diagnostics, never an exception. The aligner is the strict side: it maps
parsed entities onto query segments and degrades unknown labels to the
schema's non-entity label.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .core import BBox, LabelSchema, Segment
from .errors import DegenerateBoxError, OutOfBoundsError

_RECORD = re.compile(
    r'\{\s*text\s*:\s*"(?P<text>(?:[^"\\]|\\.)*)"\s*,\s*Box\s*:\s*\[(?P<box>[^\]{}]*)\]\s*'
    r"(?:,\s*entity\s*:\s*(?P<label>[^{}]*?)\s*)?\}"
)
_RECORD_OPEN = re.compile(r"\{\s*text\s*:")
_GROUP_TOKEN = re.compile(r'\{\s*"(?P<item>(?:[^"\\]|\\.)*)"\s*\}|(?P<dot>\.)')
_KEYWORD_LINE = re.compile(r"^\s*(company|address|total|date)\b\s*[:\-]?", re.IGNORECASE)

BOX_ALIGN_TOLERANCE = 2


@dataclass(frozen=True)
class ParsedEntity:
    """One labeled record recovered from raw model output."""

    text: str
    box: BBox | None
    label: str
    span: tuple[int, int]


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    segment_id: str | None = None


def _parse_box(raw: str) -> BBox | None | str:
    """Return a BBox, None for value-invalid boxes, or "malformed" for bad syntax."""
    tokens = raw.replace(",", " ").split()
    if len(tokens) != 4:
        return "malformed"
    try:
        coords = [int(token) for token in tokens]
    except ValueError:
        return "malformed"
    try:
        return BBox(*coords)
    except (OutOfBoundsError, DegenerateBoxError):
        return None


def parse_labeled_segments(raw: str) -> tuple[list[ParsedEntity], list[Diagnostic]]:
    """Greedy scan for well-formed labeled records.

    Records without an entity field (the query grammar) are skipped silently;
    records whose Box is syntactically broken are skipped with a MalformedBox
    diagnostic; boxes with out-of-range values keep the entity but carry no
    box. Leftover "{text:" fragments outside any match are reported.
    """
    entities: list[ParsedEntity] = []
    diagnostics: list[Diagnostic] = []
    matched_spans: list[tuple[int, int]] = []
    for match in _RECORD.finditer(raw):
        matched_spans.append(match.span())
        label = match.group("label")
        if label is None:
            continue
        label = label.strip().strip('"').strip()
        if not label:
            diagnostics.append(
                Diagnostic("EmptyLabel", f"record at {match.start()} has an empty entity")
            )
            continue
        box = _parse_box(match.group("box"))
        if box == "malformed":
            diagnostics.append(
                Diagnostic(
                    "MalformedBox",
                    f"record at {match.start()} has a malformed box [{match.group('box').strip()}]",
                )
            )
            continue
        if box is None:
            diagnostics.append(
                Diagnostic(
                    "InvalidBox",
                    f"record at {match.start()} has out-of-range box values; kept without box",
                )
            )
        entities.append(
            ParsedEntity(text=match.group("text"), box=box, label=label, span=match.span())
        )
    for fragment in _RECORD_OPEN.finditer(raw):
        inside = any(start <= fragment.start() < end for start, end in matched_spans)
        if not inside:
            diagnostics.append(
                Diagnostic(
                    "UnparsedFragment",
                    f"unparseable record fragment at offset {fragment.start()}",
                )
            )
    return entities, diagnostics


def parse_query_entries(raw: str) -> list[tuple[str, BBox]]:
    """Extract (text, box) pairs of well-formed records, labeled or not."""
    entries: list[tuple[str, BBox]] = []
    for match in _RECORD.finditer(raw):
        box = _parse_box(match.group("box"))
        if isinstance(box, BBox):
            entries.append((match.group("text"), box))
    return entries


@dataclass(frozen=True)
class SroieAnswer:
    """The four-line grouped receipt answer: quoted values per field."""

    company: tuple[str, ...] = ()
    address: tuple[str, ...] = ()
    date: tuple[str, ...] = ()
    total: tuple[str, ...] = ()


# groups appear in the demonstrated answer order
_SROIE_GROUP_ORDER = ("company", "address", "total", "date")


def parse_sroie_grouped(raw: str) -> tuple[SroieAnswer, list[Diagnostic]]:
    """Parse period-terminated groups of quoted values.

    Groups map positionally to company/address/total/date; a keyword-prefixed
    variant (lines starting with a field name) is detected automatically.
    """
    diagnostics: list[Diagnostic] = []
    fields: dict[str, list[str]] = {name: [] for name in _SROIE_GROUP_ORDER}

    keyword_lines = [
        line for line in raw.splitlines() if _KEYWORD_LINE.match(line) is not None
    ]
    if keyword_lines:
        diagnostics.append(Diagnostic("KeywordMode", "keyword-prefixed answer detected"))
        for line in keyword_lines:
            key_match = _KEYWORD_LINE.match(line)
            assert key_match is not None
            field = key_match.group(1).lower()
            for token in _GROUP_TOKEN.finditer(line):
                if token.group("item") is not None:
                    fields[field].append(token.group("item"))
        return _to_answer(fields), diagnostics

    groups: list[list[str]] = []
    current: list[str] = []
    closed = True
    for token in _GROUP_TOKEN.finditer(raw):
        if token.group("item") is not None:
            current.append(token.group("item"))
            closed = False
        else:
            groups.append(current)
            current = []
            closed = True
    if not closed or current:
        groups.append(current)
        diagnostics.append(Diagnostic("UnterminatedGroup", "final group missing its period"))
    if len(groups) > len(_SROIE_GROUP_ORDER):
        diagnostics.append(
            Diagnostic(
                "ExtraGroup",
                f"{len(groups) - len(_SROIE_GROUP_ORDER)} extra group(s) ignored",
            )
        )
    if groups and len(groups) < len(_SROIE_GROUP_ORDER):
        diagnostics.append(
            Diagnostic("MissingGroup", f"only {len(groups)} group(s) present")
        )
    for name, values in zip(_SROIE_GROUP_ORDER, groups):
        fields[name] = values
    return _to_answer(fields), diagnostics


def _to_answer(fields: dict[str, list[str]]) -> SroieAnswer:
    return SroieAnswer(
        company=tuple(fields["company"]),
        address=tuple(fields["address"]),
        date=tuple(fields["date"]),
        total=tuple(fields["total"]),
    )


def _box_close(a: BBox, b: BBox, tolerance: int) -> bool:
    return (
        abs(a.x0 - b.x0) <= tolerance
        and abs(a.y0 - b.y0) <= tolerance
        and abs(a.x1 - b.x1) <= tolerance
        and abs(a.y1 - b.y1) <= tolerance
    )


def align_predictions(
    entities: Sequence[ParsedEntity],
    query_segments: Sequence[Segment],
    schema: LabelSchema,
) -> tuple[list[Segment], list[Diagnostic]]:
    """Attach predicted labels to query segments.

    Match by exact (text, box) first, then by exact text with the box off by
    at most BOX_ALIGN_TOLERANCE per coordinate. Unmatched segments and
    unknown label tokens degrade to the schema's non-entity label, each with
    a diagnostic. Every returned segment carries a predicted label.
    """
    for segment in query_segments:
        if segment.predicted_label is not None:
            raise ValueError(f"segment {segment.id!r} already has a prediction")
    diagnostics: list[Diagnostic] = []
    consumed = [False] * len(entities)
    chosen: dict[int, int] = {}

    for seg_index, segment in enumerate(query_segments):
        for ent_index, entity in enumerate(entities):
            if consumed[ent_index] or entity.box is None:
                continue
            if entity.text == segment.text and entity.box == segment.box:
                consumed[ent_index] = True
                chosen[seg_index] = ent_index
                break

    for seg_index, segment in enumerate(query_segments):
        if seg_index in chosen:
            continue
        for ent_index, entity in enumerate(entities):
            if consumed[ent_index] or entity.box is None:
                continue
            if entity.text == segment.text and _box_close(
                entity.box, segment.box, BOX_ALIGN_TOLERANCE
            ):
                consumed[ent_index] = True
                chosen[seg_index] = ent_index
                break

    labeled: list[Segment] = []
    for seg_index, segment in enumerate(query_segments):
        ent_index = chosen.get(seg_index)
        if ent_index is None:
            diagnostics.append(
                Diagnostic(
                    "Unmatched",
                    f"no prediction matched segment {segment.id!r}",
                    segment.id,
                )
            )
            labeled.append(segment.with_predicted_label(schema.other_label))
            continue
        label = entities[ent_index].label
        if label not in schema.labels:
            diagnostics.append(
                Diagnostic(
                    "UnknownLabel",
                    f"label {label!r} not in schema; degraded to {schema.other_label!r}",
                    segment.id,
                )
            )
            label = schema.other_label
        labeled.append(segment.with_predicted_label(label))
    return labeled, diagnostics
