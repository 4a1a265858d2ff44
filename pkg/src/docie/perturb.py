"""Out-of-distribution test generation by word-level typo injection.

Two transforms only: replace a word with a visually similar one from an
editable lexicon, or delete one random non-initial character (so "name" can
become "nme"). Each word receives at most one perturbation; ids, boxes and
gold labels are untouched, so the perturbed corpus stays aligned with the
original for paired evaluation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from ._util import derive_seed
from .core import Document

# common scanner confusions; expand per corpus via the lexicon file
DEFAULT_LEXICON: dict[str, str] = {
    "modern": "modem",
    "corner": "comer",
    "morning": "moming",
    "burn": "bum",
    "turn": "tum",
    "barn": "bam",
    "warning": "waming",
    "internal": "intemal",
    "return": "retum",
    "Ill": "III",
    "Illinois": "lllinois",
    "0ffice": "Office",
    "Office": "0ffice",
    "100": "1OO",
    "OF": "0F",
    "ON": "0N",
    "NO": "N0",
    "TO": "T0",
}


@dataclass(frozen=True)
class PerturbSpec:
    """Knobs for one perturbation run; a word gets at most one transform."""

    seed: int = 0
    p_char_delete: float = 0.15
    p_substitute: float = 0.15
    substitution_table: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_LEXICON))
    min_word_len: int = 3

    def __post_init__(self) -> None:
        for name in ("p_char_delete", "p_substitute"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.min_word_len < 1:
            raise ValueError("min_word_len must be positive")


@dataclass(frozen=True)
class PerturbEvent:
    segment_id: str
    word_index: int
    kind: str  # "substitute" or "delete"
    before: str
    after: str


def delete_char(word: str, index: int) -> str:
    """Drop one character, never the first, never emptying the word."""
    if index < 1 or index >= len(word):
        raise ValueError(f"deletion index {index} out of range for {word!r}")
    return word[:index] + word[index + 1 :]


def _eligible(word: str, spec: PerturbSpec) -> bool:
    # escaped quotes must stay intact; leave such words alone
    return len(word) >= spec.min_word_len and '"' not in word and "\\" not in word


def perturb_document(doc: Document, spec: PerturbSpec) -> tuple[Document, list[PerturbEvent]]:
    """Independently perturb each eligible word; seeded per document."""
    rng = random.Random(derive_seed(spec.seed, doc.doc_id))
    events: list[PerturbEvent] = []
    segments = []
    for segment in doc.segments:
        words = segment.text.split(" ")
        changed = False
        for index, word in enumerate(words):
            if not _eligible(word, spec):
                continue
            draw = rng.random()
            if draw < spec.p_substitute and word in spec.substitution_table:
                replacement = spec.substitution_table[word]
                if replacement and replacement != word:
                    words[index] = replacement
                    changed = True
                    events.append(
                        PerturbEvent(segment.id, index, "substitute", word, replacement)
                    )
            elif draw < spec.p_substitute + spec.p_char_delete and len(word) >= 2:
                position = rng.randrange(1, len(word))
                replacement = delete_char(word, position)
                words[index] = replacement
                changed = True
                events.append(
                    PerturbEvent(segment.id, index, "delete", word, replacement)
                )
        if changed:
            segments.append(replace(segment, text=" ".join(words)))
        else:
            segments.append(segment)
    return doc.with_segments(segments), events


def load_lexicon(path: str | Path) -> dict[str, str]:
    """One "word<TAB>replacement" pair per line; blank lines and # comments skipped."""
    table: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ValueError(f"{path}:{lineno}: expected 'word<TAB>replacement'")
        table[parts[0]] = parts[1]
    return table


def save_lexicon(table: Mapping[str, str], path: str | Path) -> None:
    lines = [f"{word}\t{replacement}" for word, replacement in sorted(table.items())]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
