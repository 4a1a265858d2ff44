"""Iterative improvement of hard demonstrations.

Each iteration runs in-context inference with the current demonstration set
over the whole neighbor pool, finds the reading-order window with the lowest
mean correctness, and appends it to the hard list. The list is capped at a
capacity (default: its initial size) with FIFO eviction so prompts stay
inside the budget; unbounded growth is available behind a flag.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from ._util import atomic_write_text, canonical_json, derive_seed
from .core import Document, LabelSchema
from .demos import (
    DEFAULT_HALF_WIDTH,
    DemoSet,
    build_formatting_demos,
    build_layout_demos,
    demoset_hash,
    hard_demo_from_window,
    rank_windows,
)
from .errors import BackendError, DocieError
from .evaluation import entity_f1
from .inference import label_documents
from .llm import Backend
from .prompting import (
    DEFAULT_BUDGET,
    DEFAULT_ESTIMATOR,
    DEFAULT_QUESTION,
    LAYOUT_QUESTION,
    TokenEstimator,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class UpdateStep:
    iteration: int
    pool_micro_f1: float
    appended_doc: str
    appended_segments: tuple[str, ...]
    demoset_hash: str


@dataclass(frozen=True)
class UpdateTrace:
    steps: tuple[UpdateStep, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.steps, tuple):
            object.__setattr__(self, "steps", tuple(self.steps))

    def to_json(self) -> str:
        payload = {
            "format": "docie/trace",
            "version": 1,
            "steps": [
                {
                    "iteration": step.iteration,
                    "pool_micro_f1": step.pool_micro_f1,
                    "appended_doc": step.appended_doc,
                    "appended_segments": list(step.appended_segments),
                    "demoset_hash": step.demoset_hash,
                }
                for step in self.steps
            ],
        }
        return canonical_json(payload)

    @classmethod
    def from_json(cls, text: str) -> "UpdateTrace":
        payload = json.loads(text)
        if payload.get("format") != "docie/trace" or payload.get("version") != 1:
            raise ValueError("not an update trace")
        return cls(
            tuple(
                UpdateStep(
                    iteration=row["iteration"],
                    pool_micro_f1=row["pool_micro_f1"],
                    appended_doc=row["appended_doc"],
                    appended_segments=tuple(row["appended_segments"]),
                    demoset_hash=row["demoset_hash"],
                )
                for row in payload["steps"]
            )
        )

    def save(self, path: str | Path) -> None:
        atomic_write_text(Path(path), self.to_json() + "\n")


class UpdateFailedError(DocieError):
    """Backend failure mid-update; carries the trace up to the failure."""

    def __init__(self, message: str, iteration: int, trace: UpdateTrace) -> None:
        super().__init__(message)
        self.iteration = iteration
        self.trace = trace


def update_hard_demos(
    demoset: DemoSet,
    pool_docs: Sequence[Document],
    backend: Backend,
    k: int,
    schema: LabelSchema,
    *,
    capacity: int | None | str = "auto",
    half_width: int = DEFAULT_HALF_WIDTH,
    order_policy: str = "M-H-L-F",
    budget: int = DEFAULT_BUDGET,
    estimator: TokenEstimator = DEFAULT_ESTIMATOR,
    question: str = DEFAULT_QUESTION,
    layout_question: str = LAYOUT_QUESTION,
    model: str = "scripted",
    max_workers: int = 1,
    refresh_layout: bool = False,
    refresh_formatting: bool = False,
    refresh_seed: int = 0,
) -> tuple[DemoSet, UpdateTrace]:
    """Run k update iterations; k=0 returns the inputs unchanged.

    ``capacity="auto"`` keeps the hard list at its initial size; None lets it
    grow without bound. Layout/formatting demos stay fixed unless the refresh
    flags are set.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if not demoset.is_complete():
        raise ValueError("demo set must hold all four demonstration kinds")
    resolved_capacity = len(demoset.hard) if capacity == "auto" else capacity
    pool = sorted(pool_docs, key=lambda d: d.doc_id)
    steps: list[UpdateStep] = []

    for iteration in range(k):
        try:
            outcome = label_documents(
                pool,
                demoset,
                backend,
                schema,
                order_policy=order_policy,
                budget=budget,
                estimator=estimator,
                question=question,
                model=model,
                max_workers=max_workers,
            )
        except BackendError as exc:
            raise UpdateFailedError(
                f"iteration {iteration} failed: {exc}", iteration, UpdateTrace(tuple(steps))
            ) from exc
        report = entity_f1(outcome.documents, pool, schema)

        scores: dict[tuple[str, str], float] = {}
        for pred_doc in outcome.documents:
            unmatched = outcome.unmatched_ids(pred_doc.doc_id)
            for segment in pred_doc.segments:
                if segment.id in unmatched:
                    value = 0.0
                else:
                    value = 1.0 if segment.predicted_label == segment.gold_label else 0.0
                scores[(pred_doc.doc_id, segment.id)] = value

        worst = rank_windows(pool, scores, half_width)[0]
        appended = hard_demo_from_window(
            worst, question=question, iteration=iteration + 1
        )
        hard = [*demoset.hard, appended]
        if resolved_capacity is not None:
            while len(hard) > resolved_capacity:
                hard.pop(0)
        demoset = replace(demoset, hard=tuple(hard))

        if refresh_layout:
            demoset = replace(
                demoset,
                layout=tuple(
                    build_layout_demos(
                        pool,
                        demoset.hard,
                        backend,
                        n_layout=len(demoset.layout),
                        seed=derive_seed(refresh_seed, f"layout:{iteration}"),
                        question=layout_question,
                        model=model,
                    )
                ),
            )
        if refresh_formatting:
            demoset = replace(
                demoset,
                formatting=tuple(
                    build_formatting_demos(
                        pool,
                        derive_seed(refresh_seed, f"formatting:{iteration}"),
                        len(demoset.formatting),
                        question=question,
                    )
                ),
            )

        step = UpdateStep(
            iteration=iteration,
            pool_micro_f1=report.micro.f1,
            appended_doc=worst.doc_id,
            appended_segments=tuple(s.id for s in worst.segments),
            demoset_hash=demoset_hash(demoset),
        )
        steps.append(step)
        log.info(
            "update %d: pool micro F1 %.4f, appended %s window of %d segments",
            iteration,
            report.micro.f1,
            worst.doc_id,
            len(worst.segments),
        )

    return demoset, UpdateTrace(tuple(steps))
