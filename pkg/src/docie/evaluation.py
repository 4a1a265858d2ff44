"""Entity-level precision/recall/F1 over predicted vs gold documents.

The unit of matching is the segment with its label: a segment is a true
positive for label L when gold and prediction both say L, with the non-entity
label excluded from micro aggregation. Reports serialize stably for diffing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping, Sequence

from ._util import atomic_write_text, canonical_json
from .core import Document, LabelSchema
from .errors import CoverageMismatchError, SchemaMismatchError


@dataclass(frozen=True)
class LabelScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if (p + r) else 0.0


@dataclass(frozen=True)
class EvalReport:
    per_label: Mapping[str, LabelScore]
    micro: LabelScore
    n_documents: int
    n_segments: int
    diagnostics: Mapping[str, int]


def entity_f1(
    pred_docs: Sequence[Document],
    gold_docs: Sequence[Document],
    schema: LabelSchema,
    *,
    diagnostics: Mapping[str, int] | None = None,
) -> EvalReport:
    """Tally tp/fp/fn per label over identically covered documents."""
    gold_by_id = {doc.doc_id: doc for doc in gold_docs}
    pred_by_id = {doc.doc_id: doc for doc in pred_docs}
    missing = sorted(set(gold_by_id) - set(pred_by_id))
    extra = sorted(set(pred_by_id) - set(gold_by_id))
    if missing or extra:
        raise CoverageMismatchError(
            f"document coverage differs; missing={missing} extra={extra}"
        )

    tallies: dict[str, list[int]] = {
        label: [0, 0, 0] for label in schema.labels if label != schema.other_label
    }
    n_segments = 0
    for doc_id in sorted(gold_by_id):
        gold_doc = gold_by_id[doc_id]
        pred_doc = pred_by_id[doc_id]
        pred_segments = {segment.id: segment for segment in pred_doc.segments}
        gold_ids = set(gold_doc.segment_ids())
        if gold_ids != set(pred_segments):
            diff = sorted(gold_ids.symmetric_difference(pred_segments))
            raise CoverageMismatchError(
                f"segment coverage differs in {doc_id!r}: {diff}"
            )
        for gold_segment in gold_doc.segments:
            n_segments += 1
            gold = gold_segment.gold_label
            pred = pred_segments[gold_segment.id].predicted_label
            if gold is None or pred is None:
                raise CoverageMismatchError(
                    f"segment {gold_segment.id!r} in {doc_id!r} is missing a label"
                )
            if gold == pred:
                if gold != schema.other_label:
                    tallies[gold][0] += 1
                continue
            if pred != schema.other_label:
                tallies[pred][1] += 1
            if gold != schema.other_label:
                tallies[gold][2] += 1

    per_label = {label: LabelScore(*counts) for label, counts in tallies.items()}
    micro = LabelScore(
        tp=sum(score.tp for score in per_label.values()),
        fp=sum(score.fp for score in per_label.values()),
        fn=sum(score.fn for score in per_label.values()),
    )
    return EvalReport(
        per_label=per_label,
        micro=micro,
        n_documents=len(gold_by_id),
        n_segments=n_segments,
        diagnostics=dict(diagnostics or {}),
    )


def format_percent(fraction: float) -> str:
    """Two-decimal percentage with half-up rounding, e.g. 0.89515 -> "89.52"."""
    return str(
        (Decimal(repr(fraction)) * 100).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
    )


@dataclass(frozen=True)
class ReportComparison:
    """Per-label and micro F1 deltas plus the ID/OOD average column."""

    per_label_delta: Mapping[str, float]
    micro_delta: float
    average_f1: float
    average_f1_pct: str


def compare_reports(a: EvalReport, b: EvalReport) -> ReportComparison:
    if set(a.per_label) != set(b.per_label):
        missing = sorted(set(a.per_label).symmetric_difference(b.per_label))
        raise SchemaMismatchError(f"reports cover different labels: {missing}")
    deltas = {
        label: a.per_label[label].f1 - b.per_label[label].f1 for label in a.per_label
    }
    average = (Decimal(repr(a.micro.f1)) + Decimal(repr(b.micro.f1))) / 2
    return ReportComparison(
        per_label_delta=deltas,
        micro_delta=a.micro.f1 - b.micro.f1,
        average_f1=float(average),
        average_f1_pct=format_percent(float(average)),
    )


def _score_payload(score: LabelScore) -> dict:
    return {
        "tp": score.tp,
        "fp": score.fp,
        "fn": score.fn,
        "precision": score.precision,
        "recall": score.recall,
        "f1": score.f1,
    }


def report_to_json(report: EvalReport) -> str:
    payload = {
        "format": "docie/report",
        "version": 1,
        "per_label": {
            label: _score_payload(score) for label, score in sorted(report.per_label.items())
        },
        "micro": _score_payload(report.micro),
        "n_documents": report.n_documents,
        "n_segments": report.n_segments,
        "diagnostics": dict(sorted(report.diagnostics.items())),
    }
    return canonical_json(payload)


def report_from_json(text: str) -> EvalReport:
    payload = json.loads(text)
    if payload.get("format") != "docie/report" or payload.get("version") != 1:
        raise SchemaMismatchError("not an evaluation report")
    per_label = {
        label: LabelScore(entry["tp"], entry["fp"], entry["fn"])
        for label, entry in payload["per_label"].items()
    }
    micro = LabelScore(
        payload["micro"]["tp"], payload["micro"]["fp"], payload["micro"]["fn"]
    )
    return EvalReport(
        per_label=per_label,
        micro=micro,
        n_documents=payload["n_documents"],
        n_segments=payload["n_segments"],
        diagnostics=payload.get("diagnostics", {}),
    )


def save_report(report: EvalReport, path: str | Path) -> None:
    atomic_write_text(Path(path), report_to_json(report) + "\n")


def render_report(report: EvalReport) -> str:
    """Human-readable table, stable label order."""
    rows = [("label", "tp", "fp", "fn", "precision", "recall", "f1")]
    for label in sorted(report.per_label):
        score = report.per_label[label]
        rows.append(
            (
                label,
                str(score.tp),
                str(score.fp),
                str(score.fn),
                format_percent(score.precision),
                format_percent(score.recall),
                format_percent(score.f1),
            )
        )
    micro = report.micro
    rows.append(
        (
            "micro",
            str(micro.tp),
            str(micro.fp),
            str(micro.fn),
            format_percent(micro.precision),
            format_percent(micro.recall),
            format_percent(micro.f1),
        )
    )
    widths = [max(len(row[col]) for row in rows) for col in range(len(rows[0]))]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in rows
    ]
    lines.append(f"documents: {report.n_documents}  segments: {report.n_segments}")
    return "\n".join(lines) + "\n"


def sroie_field_values(doc: Document, schema: LabelSchema, which: str = "gold") -> dict[str, str]:
    """Concatenate segment texts per key field, in reading order."""
    fields: dict[str, list[str]] = {
        label: [] for label in schema.labels if label != schema.other_label
    }
    for segment in doc.segments:
        label = segment.gold_label if which == "gold" else segment.predicted_label
        if label in fields:
            fields[label].append(segment.text)
    return {label: " ".join(parts) for label, parts in fields.items()}


def sroie_field_f1(
    pred_docs: Sequence[Document],
    gold_docs: Sequence[Document],
    schema: LabelSchema,
) -> EvalReport:
    """Leaderboard-style scoring: one exact-match value per field per receipt."""
    gold_by_id = {doc.doc_id: doc for doc in gold_docs}
    pred_by_id = {doc.doc_id: doc for doc in pred_docs}
    if set(gold_by_id) != set(pred_by_id):
        diff = sorted(set(gold_by_id).symmetric_difference(pred_by_id))
        raise CoverageMismatchError(f"document coverage differs: {diff}")
    tallies: dict[str, list[int]] = {
        label: [0, 0, 0] for label in schema.labels if label != schema.other_label
    }
    for doc_id in sorted(gold_by_id):
        gold_values = sroie_field_values(gold_by_id[doc_id], schema, "gold")
        pred_values = sroie_field_values(pred_by_id[doc_id], schema, "predicted")
        for label in tallies:
            gold_value = gold_values[label]
            pred_value = pred_values[label]
            if pred_value and pred_value == gold_value:
                tallies[label][0] += 1
            elif pred_value and pred_value != gold_value:
                tallies[label][1] += 1
                if gold_value:
                    tallies[label][2] += 1
            elif gold_value:
                tallies[label][2] += 1
    per_label = {label: LabelScore(*counts) for label, counts in tallies.items()}
    micro = LabelScore(
        tp=sum(s.tp for s in per_label.values()),
        fp=sum(s.fp for s in per_label.values()),
        fn=sum(s.fn for s in per_label.values()),
    )
    return EvalReport(
        per_label=per_label,
        micro=micro,
        n_documents=len(gold_by_id),
        n_segments=sum(len(d.segments) for d in gold_by_id.values()),
        diagnostics={},
    )
