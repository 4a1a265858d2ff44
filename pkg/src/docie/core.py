"""Core domain types: boxes on a 0-1000 grid, segments, documents, label schemas.

Every loader normalizes page coordinates onto a 0-1000 integer grid once at
ingest, so ordering, prompting and snapshots all share one geometry. All types
here are immutable and all operations are pure.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .errors import DegenerateBoxError, OutOfBoundsError

GRID = 1000
DATASET_KINDS = ("FUNSD", "CORD", "SROIE", "CUSTOM")
SPLITS = ("train", "test")

_UNESCAPED_QUOTE = re.compile(r'(?<!\\)"')
_BOX_TEXT = re.compile(r"^\[(-?\d+) (-?\d+) (-?\d+) (-?\d+)\]$")


def _scale_half_up(value: int, size: int) -> int:
    # exact integer half-up rounding of value * GRID / size
    num = value * GRID
    return (2 * num + size) // (2 * size)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in 0-1000 grid coordinates, serialized as "[x0 y0 x1 y1]"."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        for name in ("x0", "y0", "x1", "y1"):
            coord = getattr(self, name)
            if not isinstance(coord, int) or isinstance(coord, bool):
                raise TypeError(f"box coordinate {name} must be an int, got {coord!r}")
            if coord < 0 or coord > GRID:
                raise OutOfBoundsError(f"coordinate {name}={coord} outside 0..{GRID}")
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise DegenerateBoxError(
                f"degenerate box [{self.x0} {self.y0} {self.x1} {self.y1}]"
            )

    def render(self) -> str:
        return f"[{self.x0} {self.y0} {self.x1} {self.y1}]"

    @classmethod
    def parse(cls, text: str) -> "BBox":
        match = _BOX_TEXT.match(text)
        if match is None:
            raise ValueError(f"not a box literal: {text!r}")
        return cls(*(int(g) for g in match.groups()))

    def shift(self, dx: int, dy: int) -> "BBox":
        return BBox(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)


def normalize_box(
    raw: Sequence[int], page_width: int, page_height: int
) -> BBox:
    """Scale raw page coordinates onto the 0-1000 grid, rounding half-up."""
    if page_width <= 0 or page_height <= 0:
        raise ValueError(f"page dimensions must be positive, got {page_width}x{page_height}")
    if len(raw) != 4:
        raise ValueError(f"expected four coordinates, got {len(raw)}")
    x0, y0, x1, y1 = (int(c) for c in raw)
    for coord, size, name in ((x0, page_width, "x0"), (x1, page_width, "x1"),
                              (y0, page_height, "y0"), (y1, page_height, "y1")):
        if coord < 0 or coord > size:
            raise OutOfBoundsError(f"{name}={coord} outside page dimension {size}")
    if x0 > x1 or y0 > y1:
        raise DegenerateBoxError(f"degenerate raw box [{x0} {y0} {x1} {y1}]")
    return BBox(
        _scale_half_up(x0, page_width),
        _scale_half_up(y0, page_height),
        _scale_half_up(x1, page_width),
        _scale_half_up(y1, page_height),
    )


def normalize_text(raw: str) -> str:
    """Collapse whitespace runs, strip control characters, escape bare quotes.

    The result is safe to embed inside the text:"..." record grammar: it holds
    no newlines and every double quote is backslash-escaped.
    """
    cleaned = "".join(
        " " if ch.isspace() or unicodedata.category(ch) == "Cc" else ch for ch in raw
    )
    collapsed = " ".join(cleaned.split())
    return _UNESCAPED_QUOTE.sub(r"\"", collapsed)


def has_unescaped_quote(text: str) -> bool:
    return _UNESCAPED_QUOTE.search(text) is not None


@dataclass(frozen=True)
class Segment:
    """One text span with its box; the unit of extraction and labeling."""

    id: str
    text: str
    box: BBox
    gold_label: str | None = None
    predicted_label: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("segment id must be non-empty")
        if not self.text:
            raise ValueError(f"segment {self.id}: text must be non-empty")

    def with_predicted_label(self, label: str) -> "Segment":
        return replace(self, predicted_label=label)


@dataclass(frozen=True)
class Document:
    """Ordered collection of segments with dataset/split identity.

    ``ordered`` is set only after reading-order recovery; loaders produce
    documents in file order with ordered=False.
    """

    doc_id: str
    dataset: str
    split: str
    segments: tuple[Segment, ...]
    ordered: bool = False

    def __post_init__(self) -> None:
        if self.dataset not in DATASET_KINDS:
            raise ValueError(f"unknown dataset kind {self.dataset!r}")
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if not isinstance(self.segments, tuple):
            object.__setattr__(self, "segments", tuple(self.segments))

    def full_text(self) -> str:
        return " ".join(segment.text for segment in self.segments)

    def segment_ids(self) -> tuple[str, ...]:
        return tuple(segment.id for segment in self.segments)

    def with_segments(self, segments: Iterable[Segment], ordered: bool | None = None) -> "Document":
        return replace(
            self,
            segments=tuple(segments),
            ordered=self.ordered if ordered is None else ordered,
        )


@dataclass(frozen=True)
class LabelSchema:
    """Label tokens of a dataset plus their natural-language descriptions.

    ``prompt_includes_other`` controls whether the non-entity label is shown
    in the label-mapping prompt block; FUNSD advertises "other" as a real
    class while the receipt datasets keep it out of the answer space.
    """

    dataset: str
    labels: tuple[str, ...]
    descriptions: Mapping[str, str]
    other_label: str = "other"
    prompt_includes_other: bool = True

    def __post_init__(self) -> None:
        if self.dataset not in DATASET_KINDS:
            raise ValueError(f"unknown dataset kind {self.dataset!r}")
        if not isinstance(self.labels, tuple):
            object.__setattr__(self, "labels", tuple(self.labels))
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate label tokens in schema")
        missing = [label for label in self.labels if label not in self.descriptions]
        if missing:
            raise ValueError(f"labels without a description: {missing}")
        extra = [key for key in self.descriptions if key not in self.labels]
        if extra:
            raise ValueError(f"descriptions for unknown labels: {extra}")
        if self.other_label not in self.labels:
            raise ValueError(f"other_label {self.other_label!r} not in labels")

    def is_natural(self) -> bool:
        return all(self.descriptions[label] == label for label in self.labels)

    def prompt_labels(self) -> tuple[str, ...]:
        if self.prompt_includes_other:
            return self.labels
        return tuple(label for label in self.labels if label != self.other_label)


@dataclass(frozen=True)
class Violation:
    """One validation finding; validation reports instead of raising."""

    code: str
    message: str
    segment_id: str | None = None


def validate_document(doc: Document, schema: LabelSchema) -> list[Violation]:
    """Check segment/document invariants and schema membership of labels."""
    violations: list[Violation] = []
    seen: set[str] = set()
    for segment in doc.segments:
        if segment.id in seen:
            violations.append(
                Violation("DuplicateId", f"duplicate segment id {segment.id!r}", segment.id)
            )
        seen.add(segment.id)
        if "\n" in segment.text or has_unescaped_quote(segment.text):
            violations.append(
                Violation(
                    "InvalidText",
                    f"segment {segment.id!r} text holds a newline or unescaped quote",
                    segment.id,
                )
            )
        for which, label in (("gold", segment.gold_label), ("predicted", segment.predicted_label)):
            if label is not None and label not in schema.labels:
                violations.append(
                    Violation(
                        "UnknownLabel",
                        f"segment {segment.id!r} {which} label {label!r} not in schema",
                        segment.id,
                    )
                )
    return violations


def _natural(labels: Sequence[str]) -> dict[str, str]:
    return {label: label for label in labels}


_CORD_DESCRIPTIONS = {
    "MENU.NM": "name of menu",
    "MENU.NUM": "identification of menu",
    "MENU.UNITPRICE": "unit price of menu",
    "MENU.CNT": "quantity of menu",
    "MENU.DISCOUNTPRICE": "discounted price of menu",
    "MENU.PRICE": "price of menu",
    "MENU.ITEMSUBTOTAL": "price of each menu after discount applied",
    "MENU.VATYN": '"Sales included PB1"',
    "MENU.ETC": '"TMBHN CUP"',
    "MENU.SUB_NM": "name of submenu",
    "MENU.SUB_UNITPRICE": "unit price of submenu",
    "MENU.SUB_CNT": "quantity of submenu",
    "MENU.SUB_PRICE": "price of submenu",
    "MENU.SUB_ETC": '"Gula Murni 100%"',
    "VOID_MENU.NM": '"SOP AYM BNG"',
    "VOID_MENU.PRICE": "price of voided menu",
    "SUB_TOTAL.SUBTOTAL_PRICE": "subtotal price",
    "SUB_TOTAL.DISCOUNT_PRICE": "discounted price in total",
    "SUB_TOTAL.SERVICE_PRICE": "service charge",
    "SUB_TOTAL.OTHERSVC_PRICE": '"BIAYA TAMBAHAN 27,300"',
    "SUB_TOTAL.TAX_PRICE": "tax amount",
    "SUB_TOTAL.ETC": '"(Rounding)"',
    "TOTAL.TOTAL_PRICE": "total price",
    "TOTAL.TOTAL_ETC": '"Coupon 100,000"',
    "TOTAL.CASHPRICE": "amount of price paid in cash",
    "TOTAL.CHANGEPRICE": "amount of change in cash",
    "TOTAL.CREDITCARDPRICE": "amount of price paid in credit/debit card",
    "TOTAL.EMONEYPRICE": "amount of price paid in e-money",
    "TOTAL.MENUTYPE_CNT": "total count of type of menu",
    "TOTAL.MENUQTY_CNT": "total count of quantity",
    "other": "other",
}


def funsd_schema() -> LabelSchema:
    labels = ("question", "answer", "header", "other")
    return LabelSchema("FUNSD", labels, _natural(labels))


def sroie_schema() -> LabelSchema:
    labels = ("company", "address", "date", "total", "other")
    return LabelSchema("SROIE", labels, _natural(labels), prompt_includes_other=False)


def cord_schema() -> LabelSchema:
    labels = tuple(_CORD_DESCRIPTIONS)
    return LabelSchema(
        "CORD", labels, dict(_CORD_DESCRIPTIONS), prompt_includes_other=False
    )


_BUILTIN_SCHEMAS = {
    "FUNSD": funsd_schema,
    "CORD": cord_schema,
    "SROIE": sroie_schema,
}


def schema_for(dataset: str) -> LabelSchema:
    try:
        return _BUILTIN_SCHEMAS[dataset.upper()]()
    except KeyError:
        raise ValueError(f"no built-in schema for dataset {dataset!r}") from None
