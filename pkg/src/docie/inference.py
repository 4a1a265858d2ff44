"""The shared labeling loop: chunk, assemble, complete, parse, align.

Used by the iterative demonstration updater over the neighbor pool and by the
run command over test documents.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ._util import bounded_map
from .core import Document, LabelSchema
from .demos import DemoSet
from .errors import BackendError
from .extraction import Diagnostic, align_predictions, parse_labeled_segments
from .llm import Backend, CompletionRequest
from .prompting import (
    DEFAULT_BUDGET,
    DEFAULT_ESTIMATOR,
    DEFAULT_QUESTION,
    TokenEstimator,
    assemble_prompt,
    chunk_query,
)


@dataclass
class InferenceOutcome:
    documents: list[Document] = field(default_factory=list)
    diagnostics: dict[str, list[Diagnostic]] = field(default_factory=dict)
    prompts_sent: int = 0
    dropped_demos: int = 0

    def all_diagnostics(self) -> list[Diagnostic]:
        return [diag for diags in self.diagnostics.values() for diag in diags]

    def unmatched_ids(self, doc_id: str) -> set[str]:
        return {
            diag.segment_id
            for diag in self.diagnostics.get(doc_id, [])
            if diag.code == "Unmatched" and diag.segment_id is not None
        }


def demos_overhead(
    demoset: DemoSet, estimator: TokenEstimator = DEFAULT_ESTIMATOR
) -> int:
    """Budget share consumed by the demonstration blocks themselves."""
    blocks = [demoset.mapping, *demoset.hard, *demoset.layout, *demoset.formatting]
    joined = "\n\n".join(block.rendered.rstrip("\n") for block in blocks) + "\n\n"
    return estimator.estimate(joined)


def label_documents(
    docs: Sequence[Document],
    demoset: DemoSet,
    backend: Backend,
    schema: LabelSchema,
    *,
    order_policy: str = "M-H-L-F",
    budget: int = DEFAULT_BUDGET,
    estimator: TokenEstimator = DEFAULT_ESTIMATOR,
    question: str = DEFAULT_QUESTION,
    model: str = "scripted",
    max_workers: int = 1,
) -> InferenceOutcome:
    """Predict a label for every segment of every document.

    The query always keeps at least a quarter of the budget: when the
    demonstration blocks are larger than that allows, chunks are sized
    against the guaranteed share and prompt assembly drops demonstrations
    until each prompt fits.
    """
    overhead = min(demos_overhead(demoset, estimator), budget - budget // 4)

    def run(doc: Document) -> tuple[Document, list[Diagnostic], int, int]:
        if not doc.ordered:
            raise ValueError(f"document {doc.doc_id!r} must be ordered before inference")
        labeled_segments = []
        diagnostics: list[Diagnostic] = []
        prompts = 0
        dropped = 0
        chunks = chunk_query(
            doc, budget, overhead, estimator=estimator, question=question
        )
        for index, chunk in enumerate(chunks):
            bundle = assemble_prompt(
                demoset,
                chunk,
                order_policy=order_policy,
                budget=budget,
                estimator=estimator,
                question=question,
            )
            dropped += len(bundle.dropped)
            request = CompletionRequest(
                bundle.text, model=model, tag=f"run:{doc.doc_id}:{index}"
            )
            try:
                response = backend.complete(request)
            except BackendError as exc:
                raise type(exc)(
                    f"inference chunk {index} of {doc.doc_id!r}: {exc}"
                ) from exc
            prompts += 1
            entities, parse_diags = parse_labeled_segments(response.text)
            labeled, align_diags = align_predictions(entities, chunk, schema)
            labeled_segments.extend(labeled)
            diagnostics.extend(parse_diags)
            diagnostics.extend(align_diags)
        return doc.with_segments(labeled_segments), diagnostics, prompts, dropped

    results = bounded_map(run, list(docs), max_workers)
    outcome = InferenceOutcome()
    for labeled_doc, diagnostics, prompts, dropped in results:
        outcome.documents.append(labeled_doc)
        outcome.diagnostics[labeled_doc.doc_id] = diagnostics
        outcome.prompts_sent += prompts
        outcome.dropped_demos += dropped
    return outcome
