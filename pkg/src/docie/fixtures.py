"""Tiny deterministic document corpus used by tests and demo runs.

Six form-style documents (four train, two test) plus small receipt corpora
for the other two schemas. Texts are unique per document so scripted oracle
answer keys never collide, and layouts are chosen so reading-order recovery
is unambiguous.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from .core import BBox, Document, Segment, normalize_text
from .ordering import order_document

Row = tuple[str, tuple[int, int, int, int], str]


def make_document(
    doc_id: str, dataset: str, split: str, rows: Sequence[Row], *, ordered: bool = True
) -> Document:
    segments = tuple(
        Segment(
            id=f"{doc_id}:{index}",
            text=normalize_text(text),
            box=BBox(*box),
            gold_label=label,
        )
        for index, (text, box, label) in enumerate(rows)
    )
    doc = Document(doc_id=doc_id, dataset=dataset, split=split, segments=segments)
    return order_document(doc) if ordered else doc


_FUNSD_TRAIN: dict[str, list[Row]] = {
    "fix-train-000": [
        ("MEMORANDUM", (400, 30, 600, 55), "header"),
        ("TO:", (80, 90, 130, 110), "question"),
        ("R. HOLLOWAY", (150, 90, 300, 110), "answer"),
        ("FROM:", (80, 130, 150, 150), "question"),
        ("D. WINTERS", (170, 130, 320, 150), "answer"),
        ("DATE:", (80, 170, 140, 190), "question"),
        ("MARCH 3, 1994", (160, 170, 330, 190), "answer"),
        ("SUBJECT:", (80, 210, 170, 230), "question"),
        ("QUARTERLY SALES REVIEW", (190, 210, 520, 230), "answer"),
        ("CC:", (80, 250, 120, 270), "question"),
        ("FILE COPY", (140, 250, 260, 270), "answer"),
        ("PAGE 1 OF 1", (420, 940, 580, 965), "other"),
    ],
    "fix-train-001": [
        ("ACUTE TOXICITY STUDY", (300, 40, 640, 65), "header"),
        ("COMPOUND:", (70, 100, 180, 120), "question"),
        ("B-201", (200, 100, 280, 120), "answer"),
        ("SPECIES:", (70, 140, 160, 160), "question"),
        ("MICE", (200, 140, 260, 160), "answer"),
        ("DOSE LEVEL:", (70, 180, 190, 200), "question"),
        ("40 MG/KG", (210, 180, 330, 200), "answer"),
        ("OBSERVED:", (70, 220, 175, 240), "question"),
        ("NO ADVERSE EFFECT", (200, 220, 430, 240), "answer"),
        ("LAB REFERENCE 88-104", (60, 930, 300, 955), "other"),
        ("APPROVED", (600, 930, 720, 955), "other"),
    ],
    "fix-train-002": [
        ("SHIPPING ORDER", (340, 35, 660, 60), "header"),
        ("CARRIER:", (60, 100, 160, 125), "question"),
        ("EASTERN FREIGHT", (180, 100, 400, 125), "answer"),
        ("ROUTE:", (60, 165, 140, 190), "question"),
        ("ALBANY DEPOT", (180, 165, 380, 190), "answer"),
        ("QUANTITY:", (560, 100, 680, 125), "question"),
        ("240 CASES", (700, 100, 840, 125), "answer"),
        ("WEIGHT:", (560, 165, 660, 190), "question"),
        ("1900 LB", (700, 165, 800, 190), "answer"),
        ("FORM 7 REV B", (60, 930, 240, 955), "other"),
    ],
    "fix-train-003": [
        ("CONSUMER PANEL SURVEY", (310, 40, 690, 65), "header"),
        ("CITY:", (75, 105, 135, 125), "question"),
        ("DALLAS", (160, 105, 260, 125), "answer"),
        ("PANEL SIZE:", (75, 145, 195, 165), "question"),
        ("150 HOUSEHOLDS", (215, 145, 420, 165), "answer"),
        ("BRAND PREFERENCE:", (75, 185, 270, 205), "question"),
        ("KITE FILTERS", (290, 185, 450, 205), "answer"),
        ("INTERVIEWER:", (75, 225, 215, 245), "question"),
        ("M. SANTOS", (235, 225, 360, 245), "answer"),
        ("SOURCE: FIELD OFFICE", (60, 935, 320, 960), "other"),
        ("66-0412", (640, 935, 730, 960), "other"),
    ],
}

_FUNSD_TEST: dict[str, list[Row]] = {
    "fix-test-000": [
        ("INTEROFFICE MEMO", (360, 30, 640, 55), "header"),
        ("TO:", (85, 95, 130, 115), "question"),
        ("L. BECKER", (150, 95, 280, 115), "answer"),
        ("FROM:", (85, 135, 150, 155), "question"),
        ("C. NILES", (170, 135, 280, 155), "answer"),
        ("DATE:", (85, 175, 145, 195), "question"),
        ("JULY 12, 1995", (165, 175, 330, 195), "answer"),
        ("RE:", (85, 215, 125, 235), "question"),
        ("ANNUAL BUDGET PLAN", (145, 215, 420, 235), "answer"),
        ("PAGE 1 OF 2", (430, 940, 580, 962), "other"),
    ],
    "fix-test-001": [
        ("DERMAL TOXICITY STUDY", (290, 40, 650, 65), "header"),
        ("COMPOUND:", (72, 102, 182, 122), "question"),
        ("C-77", (202, 102, 262, 122), "answer"),
        ("SPECIES:", (72, 142, 162, 162), "question"),
        ("RABBITS", (202, 142, 302, 162), "answer"),
        ("DOSE LEVEL:", (72, 182, 192, 202), "question"),
        ("15 MG/KG", (212, 182, 332, 202), "answer"),
        ("EXPOSURE:", (72, 222, 182, 242), "question"),
        ("24 HOURS", (202, 222, 312, 242), "answer"),
        ("LAB REFERENCE 89-201", (62, 932, 302, 957), "other"),
    ],
}

_CORD_TRAIN: dict[str, list[Row]] = {
    "fix-cord-000": [
        ("2", (60, 440, 90, 470), "MENU.CNT"),
        ("NASI CAMPUR", (140, 440, 360, 470), "MENU.NM"),
        ("50,000", (700, 440, 860, 470), "MENU.PRICE"),
        ("1", (60, 500, 90, 530), "MENU.CNT"),
        ("ES TEH MANIS", (140, 500, 340, 530), "MENU.NM"),
        ("8,000", (720, 500, 860, 530), "MENU.PRICE"),
        ("SUBTOTAL 58,000", (300, 600, 860, 635), "SUB_TOTAL.SUBTOTAL_PRICE"),
        ("TOTAL 58,000", (300, 650, 860, 685), "TOTAL.TOTAL_PRICE"),
        ("CASH 60,000", (300, 700, 860, 735), "TOTAL.CASHPRICE"),
        ("CHANGE 2,000", (300, 750, 860, 785), "TOTAL.CHANGEPRICE"),
    ],
    "fix-cord-001": [
        ("1", (62, 430, 92, 460), "MENU.CNT"),
        ("AYAM GORENG", (142, 430, 352, 460), "MENU.NM"),
        ("22,000", (702, 430, 862, 460), "MENU.PRICE"),
        ("1", (62, 490, 92, 520), "MENU.CNT"),
        ("SOTO AYAM BESAR", (142, 490, 412, 520), "MENU.NM"),
        ("18,000", (702, 490, 862, 520), "MENU.PRICE"),
        ("SUBTOTAL 40,000", (302, 590, 862, 625), "SUB_TOTAL.SUBTOTAL_PRICE"),
        ("TAX 10% 4,000", (302, 640, 862, 675), "SUB_TOTAL.TAX_PRICE"),
        ("TOTAL 44,000", (302, 690, 862, 725), "TOTAL.TOTAL_PRICE"),
        ("CASH 50,000", (302, 740, 862, 775), "TOTAL.CASHPRICE"),
    ],
}

_CORD_TEST: dict[str, list[Row]] = {
    "fix-cord-100": [
        ("1", (64, 436, 94, 466), "MENU.CNT"),
        ("MIE GORENG SPESIAL", (144, 436, 444, 466), "MENU.NM"),
        ("25,000", (704, 436, 864, 466), "MENU.PRICE"),
        ("TOTAL 25,000", (304, 606, 864, 641), "TOTAL.TOTAL_PRICE"),
        ("CASH 30,000", (304, 656, 864, 691), "TOTAL.CASHPRICE"),
        ("CHANGE 5,000", (304, 706, 864, 741), "TOTAL.CHANGEPRICE"),
    ],
}

_SROIE_TRAIN: dict[str, list[Row]] = {
    "fix-sroie-000": [
        ("MAJU JAYA TRADING", (200, 40, 760, 80), "company"),
        ("NO 12 JALAN MERANTI", (220, 95, 740, 130), "address"),
        ("55100 KUALA LUMPUR", (230, 140, 730, 175), "address"),
        ("TAX INVOICE", (350, 210, 610, 245), "other"),
        ("1 X PENCIL 2B", (80, 280, 420, 315), "other"),
        ("4.50", (760, 280, 880, 315), "other"),
        ("1 X NOTEBOOK A5", (80, 330, 460, 365), "other"),
        ("8.40", (760, 330, 880, 365), "other"),
        ("TOTAL", (80, 420, 220, 455), "other"),
        ("12.90", (760, 420, 880, 455), "total"),
        ("DATE: 05/04/2018", (80, 500, 440, 535), "date"),
    ],
    "fix-sroie-001": [
        ("SINARAN RESTORAN SDN BHD", (160, 42, 800, 82), "company"),
        ("LOT 8 JALAN CEMPAKA", (210, 96, 750, 131), "address"),
        ("43000 KAJANG SELANGOR", (200, 142, 760, 177), "address"),
        ("RECEIPT", (390, 212, 570, 247), "other"),
        ("NASI LEMAK X2", (82, 282, 422, 317), "other"),
        ("9.00", (762, 282, 882, 317), "other"),
        ("TEH TARIK X2", (82, 332, 402, 367), "other"),
        ("4.40", (762, 332, 882, 367), "other"),
        ("ROUNDING", (82, 382, 302, 417), "other"),
        ("0.00", (762, 382, 882, 417), "other"),
        ("TOTAL", (82, 422, 222, 457), "other"),
        ("13.40", (762, 422, 882, 457), "total"),
        ("12/06/2018", (82, 502, 342, 537), "date"),
    ],
}

_SROIE_TEST: dict[str, list[Row]] = {
    "fix-sroie-100": [
        ("PASARAYA BINTANG", (240, 44, 720, 84), "company"),
        ("2 JALAN DAMAI 3", (250, 98, 710, 133), "address"),
        ("56000 CHERAS", (280, 144, 680, 179), "address"),
        ("CASH BILL", (370, 214, 590, 249), "other"),
        ("MINERAL WATER 500ML", (84, 284, 564, 319), "other"),
        ("2.20", (764, 284, 884, 319), "other"),
        ("TOTAL", (84, 424, 224, 459), "other"),
        ("2.20", (764, 424, 884, 459), "total"),
        ("18/09/2018", (84, 504, 344, 539), "date"),
    ],
}


def _build(dataset: str, split: str, table: dict[str, list[Row]]) -> list[Document]:
    return [make_document(doc_id, dataset, split, rows) for doc_id, rows in table.items()]


def funsd_fixture() -> tuple[list[Document], list[Document]]:
    """The bundled six-document corpus: four train, two test."""
    return _build("FUNSD", "train", _FUNSD_TRAIN), _build("FUNSD", "test", _FUNSD_TEST)


def cord_fixture() -> tuple[list[Document], list[Document]]:
    return _build("CORD", "train", _CORD_TRAIN), _build("CORD", "test", _CORD_TEST)


def sroie_fixture() -> tuple[list[Document], list[Document]]:
    return _build("SROIE", "train", _SROIE_TRAIN), _build("SROIE", "test", _SROIE_TEST)


def write_funsd_layout(docs: Sequence[Document], root: str | Path) -> Path:
    """Materialize documents as a public-layout annotation directory.

    Boxes are written as-is; with no images present the loader treats them as
    grid coordinates, so ingest of this layout reproduces the documents.
    """
    root = Path(root)
    annotations = root / "annotations"
    annotations.mkdir(parents=True, exist_ok=True)
    for doc in docs:
        form = []
        for segment in doc.segments:
            index = int(segment.id.rsplit(":", 1)[1])
            form.append(
                {
                    "id": index,
                    "text": segment.text,
                    "box": [segment.box.x0, segment.box.y0, segment.box.x1, segment.box.y1],
                    "label": segment.gold_label,
                    "words": [
                        {
                            "text": segment.text,
                            "box": [
                                segment.box.x0,
                                segment.box.y0,
                                segment.box.x1,
                                segment.box.y1,
                            ],
                        }
                    ],
                    "linking": [],
                }
            )
        (annotations / f"{doc.doc_id}.json").write_text(
            json.dumps({"form": form}, ensure_ascii=True, indent=1), encoding="utf-8"
        )
    return root
