"""Document information extraction with in-context demonstrations.

Pipeline stages: ingest annotated documents, recover reading order, pick a
nearest training document per test document, construct and iteratively update
four kinds of in-context demonstrations, assemble prompts under a token
budget, query a pluggable completion backend, parse the answers back onto
segments, and score entity-level F1 in ID and OOD settings.
"""

from .core import (
    BBox,
    Document,
    LabelSchema,
    Segment,
    Violation,
    cord_schema,
    funsd_schema,
    normalize_box,
    normalize_text,
    schema_for,
    sroie_schema,
    validate_document,
)

__all__ = [
    "BBox",
    "Document",
    "LabelSchema",
    "Segment",
    "Violation",
    "cord_schema",
    "funsd_schema",
    "normalize_box",
    "normalize_text",
    "schema_for",
    "sroie_schema",
    "validate_document",
]

__version__ = "0.1.0"
