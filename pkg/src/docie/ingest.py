"""Dataset loaders and the line-delimited normalized interchange format.

Loaders consume the public annotation layouts (form entries, receipt line
files, box/entity file pairs), normalize text and coordinates once, and emit
validated Documents. Page sizes come from image headers when images are
present; otherwise coordinates are assumed to already sit on the grid, with
the page extent padded out to the largest coordinate seen.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Callable, Iterable, Sequence

from ._util import canonical_json
from .core import (
    GRID,
    BBox,
    Document,
    Segment,
    normalize_box,
    normalize_text,
)
from .errors import (
    DegenerateBoxError,
    MalformedAnnotationError,
    OutOfBoundsError,
    SchemaMismatchError,
)

NORMALIZED_FORMAT = "docie/normalized"
PREDICTIONS_FORMAT = "docie/predictions"
FORMAT_VERSION = 1

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".tif", ".tiff")


def _page_size_from_image(stem: str, image_dirs: Sequence[Path]) -> tuple[int, int] | None:
    for directory in image_dirs:
        if not directory.is_dir():
            continue
        for suffix in _IMAGE_SUFFIXES:
            candidate = directory / f"{stem}{suffix}"
            if candidate.exists():
                from PIL import Image  # header read only; pixels never decoded

                with Image.open(candidate) as img:
                    return img.size
    return None


def _fallback_page_size(boxes: Iterable[Sequence[int]]) -> tuple[int, int]:
    # no image to measure: assume grid coordinates, padding to the max seen
    max_x, max_y = GRID, GRID
    for box in boxes:
        max_x = max(max_x, box[0], box[2])
        max_y = max(max_y, box[1], box[3])
    return max_x, max_y


def _sanitize_raw_box(raw: Sequence[int], width: int, height: int) -> list[int]:
    x0, y0, x1, y1 = (int(v) for v in raw)
    x0, x1 = sorted((max(0, min(x0, width)), max(0, min(x1, width))))
    y0, y1 = sorted((max(0, min(y0, height)), max(0, min(y1, height))))
    return [x0, y0, x1, y1]


def _infer_split(root: Path, split: str | None) -> str:
    if split is not None:
        return split
    name = root.name.lower()
    if "train" in name:
        return "train"
    if "test" in name:
        return "test"
    raise ValueError(f"cannot infer split from {root}; pass split explicitly")


def load_funsd(root_path: str | Path, split: str | None = None) -> list[Document]:
    """Load form annotation files: one document per JSON, one segment per entry.

    ``root_path`` is the split directory (holding annotations/ and optionally
    images/) or the annotations directory itself. Entries whose text is empty
    after normalization are dropped.
    """
    root = Path(root_path)
    annotations = root / "annotations" if (root / "annotations").is_dir() else root
    if not annotations.is_dir():
        raise MalformedAnnotationError(f"no annotation directory under {root}")
    resolved_split = _infer_split(root, split)
    image_dirs = [root / "images", root / "img"]
    documents: list[Document] = []
    for path in sorted(annotations.glob("*.json")):
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedAnnotationError(f"{path}: unreadable annotation: {exc}") from exc
        if "form" not in payload:
            raise MalformedAnnotationError(f"{path}: missing key 'form'")
        entries = payload["form"]
        boxes = []
        for entry in entries:
            for key in ("box", "label"):
                if key not in entry:
                    raise MalformedAnnotationError(f"{path}: entry missing key {key!r}")
            boxes.append(entry["box"])
        size = _page_size_from_image(path.stem, image_dirs) or _fallback_page_size(boxes)
        segments = []
        for index, entry in enumerate(entries):
            text = entry.get("text") or " ".join(
                word.get("text", "") for word in entry.get("words", [])
            )
            text = normalize_text(text)
            if not text:
                continue
            raw = _sanitize_raw_box(entry["box"], *size)
            segments.append(
                Segment(
                    id=f"{path.stem}:{entry.get('id', index)}",
                    text=text,
                    box=normalize_box(raw, *size),
                    gold_label=str(entry["label"]).lower(),
                )
            )
        documents.append(
            Document(doc_id=path.stem, dataset="FUNSD", split=resolved_split, segments=tuple(segments))
        )
    return documents


def load_cord(root_path: str | Path, split: str | None = None) -> list[Document]:
    """Load receipt annotations: one segment per valid line, labels flattened
    to dotted uppercase tokens (menu.nm -> MENU.NM)."""
    root = Path(root_path)
    json_dir = root / "json" if (root / "json").is_dir() else root
    if not json_dir.is_dir():
        raise MalformedAnnotationError(f"no annotation directory under {root}")
    resolved_split = _infer_split(root, split)
    documents: list[Document] = []
    for path in sorted(json_dir.glob("*.json")):
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedAnnotationError(f"{path}: unreadable annotation: {exc}") from exc
        if "valid_line" not in payload:
            raise MalformedAnnotationError(f"{path}: missing key 'valid_line'")
        meta = payload.get("meta", {})
        size_info = meta.get("image_size", {})
        lines = payload["valid_line"]
        quads = []
        for line in lines:
            for word in line.get("words", []):
                if "quad" not in word:
                    raise MalformedAnnotationError(f"{path}: word missing key 'quad'")
                quads.append(word["quad"])
        if size_info.get("width") and size_info.get("height"):
            size = (int(size_info["width"]), int(size_info["height"]))
        else:
            extents = [
                [
                    min(q["x1"], q["x2"], q["x3"], q["x4"]),
                    min(q["y1"], q["y2"], q["y3"], q["y4"]),
                    max(q["x1"], q["x2"], q["x3"], q["x4"]),
                    max(q["y1"], q["y2"], q["y3"], q["y4"]),
                ]
                for q in quads
            ]
            size = _fallback_page_size(extents)
        segments = []
        for index, line in enumerate(lines):
            if "category" not in line:
                raise MalformedAnnotationError(f"{path}: line missing key 'category'")
            words = line.get("words", [])
            text = normalize_text(" ".join(word.get("text", "") for word in words))
            if not text or not words:
                continue
            xs = [word["quad"][k] for word in words for k in ("x1", "x2", "x3", "x4")]
            ys = [word["quad"][k] for word in words for k in ("y1", "y2", "y3", "y4")]
            raw = _sanitize_raw_box([min(xs), min(ys), max(xs), max(ys)], *size)
            label = str(line["category"]).replace("/", ".").upper()
            segments.append(
                Segment(
                    id=f"{path.stem}:{line.get('id', index)}",
                    text=text,
                    box=normalize_box(raw, *size),
                    gold_label=label,
                )
            )
        documents.append(
            Document(doc_id=path.stem, dataset="CORD", split=resolved_split, segments=tuple(segments))
        )
    return documents


_NON_ALNUM = re.compile(r"[^A-Z0-9]+")


def _normalize_for_match(text: str) -> str:
    return _NON_ALNUM.sub(" ", text.upper()).strip()


def _value_matches_line(line: str, value: str) -> bool:
    if not line or not value:
        return False
    if line == value:
        return True
    if len(line) >= 3 and line in value:
        return True
    if value in line:
        # boundary guard so "8.50" never matches inside "18.50"
        pattern = r"(?<![A-Z0-9])" + re.escape(value) + r"(?![A-Z0-9])"
        return re.search(pattern, line) is not None
    return False


_SROIE_FIELDS = ("company", "address", "date", "total")


def load_sroie(root_path: str | Path, split: str | None = None) -> list[Document]:
    """Load receipt OCR lines plus key-field values.

    Expects box/ (8-coordinate CSV lines ending in the text) and entities/
    (JSON with company/date/address/total). Key-field values are aligned to
    lines by exact-then-normalized substring match; unmatched lines carry the
    non-entity label.
    """
    root = Path(root_path)
    box_dir = next((root / name for name in ("box",) if (root / name).is_dir()), None)
    entity_dir = next(
        (root / name for name in ("entities", "key", "entity") if (root / name).is_dir()),
        None,
    )
    if box_dir is None:
        raise MalformedAnnotationError(f"no box/ directory under {root}")
    resolved_split = _infer_split(root, split)
    image_dirs = [root / "img", root / "images"]
    documents: list[Document] = []
    for path in sorted(box_dir.glob("*.txt")):
        lines: list[tuple[str, list[int]]] = []
        try:
            content = path.read_text(encoding="utf-8", errors="ignore")
        except OSError as exc:
            raise MalformedAnnotationError(f"{path}: unreadable box file: {exc}") from exc
        for raw_line in content.splitlines():
            parts = raw_line.strip().split(",")
            if len(parts) < 9:
                continue
            try:
                coords = [int(p) for p in parts[:8]]
            except ValueError as exc:
                raise MalformedAnnotationError(
                    f"{path}: non-integer coordinate in {raw_line!r}"
                ) from exc
            text = normalize_text(",".join(parts[8:]))
            if not text:
                continue
            xs, ys = coords[::2], coords[1::2]
            lines.append((text, [min(xs), min(ys), max(xs), max(ys)]))
        values: dict[str, str] = {}
        if entity_dir is not None:
            entity_path = entity_dir / path.name
            if entity_path.exists():
                try:
                    values = {
                        key: str(value)
                        for key, value in json.loads(
                            entity_path.read_text(encoding="utf-8")
                        ).items()
                    }
                except (OSError, json.JSONDecodeError) as exc:
                    raise MalformedAnnotationError(
                        f"{entity_path}: unreadable entity file: {exc}"
                    ) from exc
        size = _page_size_from_image(path.stem, image_dirs) or _fallback_page_size(
            [box for _, box in lines]
        )
        segments = []
        for index, (text, raw) in enumerate(lines):
            label = "other"
            for field in _SROIE_FIELDS:
                value = values.get(field, "")
                if not value:
                    continue
                if _value_matches_line(text, value) or _value_matches_line(
                    _normalize_for_match(text), _normalize_for_match(value)
                ):
                    label = field
                    break
            segments.append(
                Segment(
                    id=f"{path.stem}:{index}",
                    text=text,
                    box=normalize_box(_sanitize_raw_box(raw, *size), *size),
                    gold_label=label,
                )
            )
        documents.append(
            Document(doc_id=path.stem, dataset="SROIE", split=resolved_split, segments=tuple(segments))
        )
    return documents


def _document_payload(doc: Document) -> dict:
    return {
        "doc_id": doc.doc_id,
        "dataset": doc.dataset,
        "split": doc.split,
        "ordered": doc.ordered,
        "segments": [
            {
                "id": segment.id,
                "text": segment.text,
                "box": [segment.box.x0, segment.box.y0, segment.box.x1, segment.box.y1],
                "gold_label": segment.gold_label,
            }
            for segment in doc.segments
        ],
    }


def _document_from_payload(payload: dict) -> Document:
    return Document(
        doc_id=payload["doc_id"],
        dataset=payload["dataset"],
        split=payload["split"],
        ordered=payload.get("ordered", False),
        segments=tuple(
            Segment(
                id=row["id"],
                text=row["text"],
                box=BBox(*row["box"]),
                gold_label=row["gold_label"],
            )
            for row in payload["segments"]
        ),
    )


def write_normalized(docs: Sequence[Document], path: str | Path) -> None:
    """Versioned line-delimited records; bit-stable for identical inputs.

    predicted_label is never persisted here; predictions have their own file.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(canonical_json({"format": NORMALIZED_FORMAT, "version": FORMAT_VERSION}) + "\n")
        for doc in docs:
            handle.write(canonical_json(_document_payload(doc)) + "\n")


def load_normalized(path: str | Path) -> list[Document]:
    source = Path(path)
    with open(source, "r", encoding="utf-8") as handle:
        header_line = handle.readline().strip()
        if not header_line:
            raise SchemaMismatchError(f"{source}: empty file, expected a header line")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise SchemaMismatchError(f"{source}: malformed header: {exc}") from exc
        if header.get("format") != NORMALIZED_FORMAT or header.get("version") != FORMAT_VERSION:
            raise SchemaMismatchError(
                f"{source}: unknown format/version {header.get('format')!r}/{header.get('version')!r}"
            )
        documents = []
        for line in handle:
            line = line.strip()
            if not line:
                continue
            try:
                documents.append(_document_from_payload(json.loads(line)))
            except (json.JSONDecodeError, KeyError, OutOfBoundsError, DegenerateBoxError) as exc:
                raise SchemaMismatchError(f"{source}: malformed record: {exc}") from exc
    return documents


def write_predictions(docs: Sequence[Document], path: str | Path) -> None:
    """One row per segment: doc_id, segment_id, predicted_label."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(canonical_json({"format": PREDICTIONS_FORMAT, "version": FORMAT_VERSION}) + "\n")
        for doc in docs:
            for segment in doc.segments:
                if segment.predicted_label is None:
                    raise ValueError(
                        f"segment {segment.id!r} of {doc.doc_id!r} has no prediction to persist"
                    )
                row = {
                    "doc_id": doc.doc_id,
                    "segment_id": segment.id,
                    "predicted_label": segment.predicted_label,
                }
                handle.write(canonical_json(row) + "\n")


def load_predictions(path: str | Path) -> dict[tuple[str, str], str]:
    source = Path(path)
    with open(source, "r", encoding="utf-8") as handle:
        header = json.loads(handle.readline())
        if header.get("format") != PREDICTIONS_FORMAT or header.get("version") != FORMAT_VERSION:
            raise SchemaMismatchError(f"{source}: not a predictions file")
        rows = {}
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            rows[(row["doc_id"], row["segment_id"])] = row["predicted_label"]
    return rows


def apply_predictions(
    gold_docs: Sequence[Document], predictions: dict[tuple[str, str], str]
) -> list[Document]:
    """Attach persisted predictions onto gold documents for evaluation."""
    out = []
    for doc in gold_docs:
        segments = []
        for segment in doc.segments:
            label = predictions.get((doc.doc_id, segment.id))
            segments.append(segment if label is None else segment.with_predicted_label(label))
        out.append(doc.with_segments(segments))
    return out


LOADERS: dict[str, Callable[..., list[Document]]] = {
    "FUNSD": load_funsd,
    "CORD": load_cord,
    "SROIE": load_sroie,
}
