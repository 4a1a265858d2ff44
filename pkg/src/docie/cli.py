"""Operator surface: ingest -> order -> neighbors -> demos -> run -> eval.

Every command writes its outputs plus a manifest.json into a run directory
(default: runs/<timestamp>-<hash>), and a manifest from a scripted-backend
run can be re-executed with ``docie rerun`` to reproduce outputs byte for
byte. Configuration precedence is flags > environment (DOCIE_*) > config
file; API keys come only from the environment.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import yaml

from . import demos as demos_mod
from . import evaluation, ingest, updating
from ._util import atomic_write_text, canonical_json, file_sha256, sha256_hex
from .core import Document, schema_for, validate_document
from .errors import DocieError
from .inference import label_documents
from .llm import (
    Backend,
    CachingBackend,
    HttpBackend,
    OracleBackend,
    ResponseCache,
    TemplateBackend,
    TranscriptBackend,
    TranscriptRecorder,
)
from .ordering import OrderingParams, cut_tree, order_document
from .perturb import PerturbSpec, load_lexicon, perturb_document
from .prompting import DEFAULT_BUDGET
from .similarity import (
    EmbeddingCache,
    LocalHashProvider,
    NeighborMap,
    OpenAICompatProvider,
    RemoteEmbeddingProvider,
    select_nearest_neighbors,
)

log = logging.getLogger("docie")

MANIFEST_FORMAT = "docie/manifest"


def _utc_stamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def _default_run_dir(command: str, args: dict[str, Any]) -> Path:
    digest = sha256_hex(canonical_json({"command": command, "args": {k: str(v) for k, v in args.items()}}))
    return Path("runs") / f"{_utc_stamp()}-{digest[:8]}"


CONFIG_VERSION = 1


def _load_config(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    payload = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(payload, dict):
        raise DocieError(f"config file {path} must hold a mapping")
    version = payload.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise DocieError(
            f"config file {path} has version {version!r}; expected {CONFIG_VERSION}"
        )
    return payload


def _resolve(args: argparse.Namespace, config: dict[str, Any], name: str, default: Any, cast: Callable[[Any], Any] = lambda v: v) -> Any:
    """flags > environment > config file > built-in default."""
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    env = os.environ.get(f"DOCIE_{name.upper()}")
    if env is not None:
        return cast(env)
    if name in config:
        return cast(config[name])
    return default


def _parse_counts(value: str | Sequence[int]) -> tuple[int, int, int]:
    if isinstance(value, str):
        parts = [int(p) for p in value.split(",")]
    else:
        parts = [int(p) for p in value]
    if len(parts) != 3:
        raise DocieError(f"counts must be three integers, got {value!r}")
    return (parts[0], parts[1], parts[2])


def _build_backend(
    args: argparse.Namespace, config: dict[str, Any]
) -> tuple[Backend, dict[str, Any]]:
    """Returns the backend plus the resolved flags that reconstruct it."""
    kind = _resolve(args, config, "backend", "oracle")
    cache_dir = _resolve(args, config, "response_cache", None)
    resolved: dict[str, Any] = {"backend": kind, "response_cache": cache_dir}
    backend: Backend
    if kind == "http":
        endpoint = _resolve(args, config, "endpoint", None)
        if not endpoint:
            raise DocieError("http backend needs --endpoint")
        api_key_env = _resolve(args, config, "api_key_env", "OPENAI_API_KEY")
        resolved.update(endpoint=endpoint, api_key_env=api_key_env)
        backend = HttpBackend(endpoint, api_key_env=api_key_env)
    elif kind == "oracle":
        key_paths = _resolve(args, config, "oracle_docs", None)
        if not key_paths:
            raise DocieError("oracle backend needs --oracle-docs")
        resolved.update(oracle_docs=list(key_paths))
        documents: list[Document] = []
        for path in key_paths:
            documents.extend(ingest.load_normalized(path))
        backend = OracleBackend(documents)
    elif kind == "template":
        backend = TemplateBackend()
    elif kind == "transcript":
        path = _resolve(args, config, "transcript", None)
        if not path:
            raise DocieError("transcript backend needs --transcript")
        resolved.update(transcript=path)
        backend = TranscriptBackend.from_file(path)
    else:
        raise DocieError(f"unknown backend kind {kind!r}")
    if cache_dir:
        backend = CachingBackend(backend, ResponseCache(cache_dir))
    record_path = _resolve(args, config, "record_transcript", None)
    if record_path:
        resolved.update(record_transcript=record_path)
        backend = TranscriptRecorder(backend, record_path)
    return backend, resolved


def _build_provider(args: argparse.Namespace, config: dict[str, Any]):
    kind = _resolve(args, config, "provider", "local")
    if kind == "local":
        return LocalHashProvider()
    if kind == "remote":
        endpoint = _resolve(args, config, "endpoint", None)
        if not endpoint:
            raise DocieError("remote provider needs --endpoint")
        return RemoteEmbeddingProvider(endpoint)
    if kind == "openai":
        endpoint = _resolve(args, config, "endpoint", None)
        model = _resolve(args, config, "model", None)
        if not endpoint or not model:
            raise DocieError("openai provider needs --endpoint and --model")
        return OpenAICompatProvider(endpoint, model)
    raise DocieError(f"unknown provider kind {kind!r}")


class _Manifest:
    """Collects resolved args, input hashes and timings for one command."""

    def __init__(self, command: str, out_dir: Path) -> None:
        self.command = command
        self.out_dir = out_dir
        self.args: dict[str, Any] = {}
        self.inputs: dict[str, str] = {}
        self.outputs: dict[str, str] = {}
        self.extra: dict[str, Any] = {}
        self.timings: dict[str, float] = {}
        self._t0 = time.monotonic()

    def record_input(self, path: str | Path) -> None:
        p = Path(path)
        if p.exists():
            self.inputs[str(p)] = file_sha256(p)

    def record_output(self, name: str, path: Path) -> None:
        self.outputs[name] = str(path)

    def stage(self, name: str) -> None:
        now = time.monotonic()
        self.timings[name] = round(now - self._t0, 6)
        self._t0 = now

    def write(self) -> Path:
        payload = {
            "format": MANIFEST_FORMAT,
            "version": 1,
            "command": self.command,
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "args": self.args,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings_s": self.timings,
            **self.extra,
        }
        path = self.out_dir / "manifest.json"
        atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def _out_dir(args: argparse.Namespace, command: str, resolved: dict[str, Any]) -> Path:
    out = getattr(args, "out", None)
    directory = Path(out) if out else _default_run_dir(command, resolved)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _load_docs(path: str) -> list[Document]:
    return ingest.load_normalized(path)


# ---------------------------------------------------------------- commands


def cmd_ingest(args: argparse.Namespace, config: dict[str, Any]) -> int:
    dataset = _resolve(args, config, "dataset", None)
    if not dataset:
        raise DocieError("--dataset is required")
    dataset = dataset.upper()
    loader = ingest.LOADERS.get(dataset)
    if loader is None:
        raise DocieError(f"no loader for dataset {dataset!r}")
    resolved = {"dataset": dataset, "root": args.root, "split": args.split}
    out_dir = _out_dir(args, "ingest", resolved)
    manifest = _Manifest("ingest", out_dir)
    manifest.args = resolved
    documents = loader(args.root, args.split)
    manifest.stage("load")
    schema = schema_for(dataset)
    bad = [
        (doc.doc_id, violation)
        for doc in documents
        for violation in validate_document(doc, schema)
    ]
    if bad:
        for doc_id, violation in bad[:20]:
            log.error("%s: %s %s", doc_id, violation.code, violation.message)
        raise DocieError(f"{len(bad)} validation violations in loaded documents")
    out_path = out_dir / "documents.jsonl"
    ingest.write_normalized(documents, out_path)
    manifest.stage("write")
    manifest.record_output("documents", out_path)
    manifest.extra["n_documents"] = len(documents)
    manifest.write()
    log.info("ingested %d documents -> %s", len(documents), out_path)
    return 0


def cmd_order(args: argparse.Namespace, config: dict[str, Any]) -> int:
    params = OrderingParams(
        min_gap_x=int(_resolve(args, config, "min_gap_x", 10, int)),
        min_gap_y=int(_resolve(args, config, "min_gap_y", 10, int)),
        max_depth=int(_resolve(args, config, "max_depth", 32, int)),
    )
    resolved = {
        "in": args.input,
        "min_gap_x": params.min_gap_x,
        "min_gap_y": params.min_gap_y,
        "max_depth": params.max_depth,
        "dump_tree": bool(args.dump_tree),
    }
    out_dir = _out_dir(args, "order", resolved)
    manifest = _Manifest("order", out_dir)
    manifest.args = resolved
    manifest.record_input(args.input)
    documents = [order_document(doc, params) for doc in _load_docs(args.input)]
    manifest.stage("order")
    out_path = out_dir / "documents.jsonl"
    ingest.write_normalized(documents, out_path)
    manifest.record_output("documents", out_path)
    if args.dump_tree:
        dump_path = out_dir / "cut-trees.txt"
        chunks = []
        for doc in documents:
            chunks.append(f"# {doc.doc_id}\n" + cut_tree(doc.segments, params))
        atomic_write_text(dump_path, "\n".join(chunks))
        manifest.record_output("cut_trees", dump_path)
    manifest.stage("write")
    manifest.write()
    log.info("ordered %d documents -> %s", len(documents), out_path)
    return 0


def cmd_neighbors(args: argparse.Namespace, config: dict[str, Any]) -> int:
    provider = _build_provider(args, config)
    kind = _resolve(args, config, "provider", "local")
    resolved = {
        "train": args.train,
        "test": args.test,
        "provider": kind,
        "endpoint": _resolve(args, config, "endpoint", None),
        "model": _resolve(args, config, "model", None),
        "embedding_cache": args.embedding_cache,
    }
    out_dir = _out_dir(args, "neighbors", resolved)
    manifest = _Manifest("neighbors", out_dir)
    manifest.args = resolved
    manifest.extra["provider_id"] = provider.provider_id
    manifest.record_input(args.train)
    manifest.record_input(args.test)
    cache = EmbeddingCache(args.embedding_cache) if args.embedding_cache else None
    neighbor_map = select_nearest_neighbors(
        _load_docs(args.train), _load_docs(args.test), provider, cache=cache
    )
    manifest.stage("select")
    out_path = out_dir / "neighbors.json"
    atomic_write_text(out_path, neighbor_map.to_json() + "\n")
    manifest.record_output("neighbors", out_path)
    manifest.extra["pool"] = list(neighbor_map.pool())
    manifest.write()
    log.info("selected neighbors for %d test documents -> %s", len(neighbor_map.pairs), out_path)
    return 0


def _pool_from_neighbors(train_path: str, neighbors_path: str) -> list[Document]:
    neighbor_map = NeighborMap.from_json(Path(neighbors_path).read_text(encoding="utf-8"))
    pool_ids = set(neighbor_map.pool())
    pool = [doc for doc in ingest.load_normalized(train_path) if doc.doc_id in pool_ids]
    missing = pool_ids - {doc.doc_id for doc in pool}
    if missing:
        raise DocieError(f"neighbor documents missing from train file: {sorted(missing)}")
    return pool


def cmd_demos_init(args: argparse.Namespace, config: dict[str, Any]) -> int:
    backend, backend_args = _build_backend(args, config)
    seed = int(_resolve(args, config, "seed", 0, int))
    counts = _parse_counts(_resolve(args, config, "counts", "4,4,4"))
    budget = int(_resolve(args, config, "budget", DEFAULT_BUDGET, int))
    model = _resolve(args, config, "model", "scripted")
    dataset = _resolve(args, config, "dataset", None)
    resolved = {
        "train": args.train,
        "neighbors": args.neighbors,
        "counts": list(counts),
        "seed": seed,
        "budget": budget,
        "model": model,
        "dataset": dataset,
        **backend_args,
    }
    out_dir = _out_dir(args, "demos-init", resolved)
    manifest = _Manifest("demos-init", out_dir)
    manifest.args = resolved
    manifest.record_input(args.train)
    manifest.record_input(args.neighbors)
    pool = _pool_from_neighbors(args.train, args.neighbors)
    schema = schema_for(dataset or pool[0].dataset)
    demoset = demos_mod.build_demo_set(
        pool, schema, backend, counts=counts, seed=seed, budget=budget, model=model
    )
    manifest.stage("build")
    out_path = out_dir / "demoset.json"
    provenance: dict[str, Any] = {"backend": backend.backend_id, "model": model}
    record_path = resolved.get("record_transcript")
    if record_path:
        provenance["transcript_sha256"] = file_sha256(Path(record_path))
    demos_mod.save_demoset(demoset, out_path, seed=seed, provenance=provenance)
    manifest.record_output("demoset", out_path)
    manifest.extra["demoset_hash"] = demos_mod.demoset_hash(demoset)
    manifest.extra["backend_id"] = backend.backend_id
    manifest.write()
    log.info("built demo set %s -> %s", demos_mod.demoset_hash(demoset)[:12], out_path)
    return 0


def _parse_capacity(value: str) -> int | None | str:
    if value == "auto":
        return "auto"
    if value == "none":
        return None
    try:
        return int(value)
    except ValueError:
        raise DocieError(f"--hard-capacity must be an integer, 'auto' or 'none', got {value!r}") from None


def cmd_demos_update(args: argparse.Namespace, config: dict[str, Any]) -> int:
    backend, backend_args = _build_backend(args, config)
    k = int(_resolve(args, config, "k", 20, int))
    budget = int(_resolve(args, config, "budget", DEFAULT_BUDGET, int))
    model = _resolve(args, config, "model", "scripted")
    order_policy = _resolve(args, config, "order_policy", "M-H-L-F")
    dataset = _resolve(args, config, "dataset", None)
    capacity = _parse_capacity(_resolve(args, config, "hard_capacity", "auto", str))
    resolved = {
        "demoset": args.demoset,
        "train": args.train,
        "neighbors": args.neighbors,
        "k": k,
        "budget": budget,
        "model": model,
        "order_policy": order_policy,
        "dataset": dataset,
        "hard_capacity": "none" if capacity is None else str(capacity),
        **backend_args,
    }
    out_dir = _out_dir(args, "demos-update", resolved)
    manifest = _Manifest("demos-update", out_dir)
    manifest.args = resolved
    for path in (args.demoset, args.train, args.neighbors):
        manifest.record_input(path)
    demoset, _meta = demos_mod.load_demoset(args.demoset)
    pool = _pool_from_neighbors(args.train, args.neighbors)
    schema = schema_for(dataset or pool[0].dataset)
    updated, trace = updating.update_hard_demos(
        demoset,
        pool,
        backend,
        k,
        schema,
        capacity=capacity,
        order_policy=order_policy,
        budget=budget,
        model=model,
    )
    manifest.stage("update")
    out_path = out_dir / "demoset.json"
    provenance: dict[str, Any] = {"backend": backend.backend_id, "k": k}
    record_path = resolved.get("record_transcript")
    if record_path:
        provenance["transcript_sha256"] = file_sha256(Path(record_path))
    demos_mod.save_demoset(updated, out_path, provenance=provenance)
    trace_path = out_dir / "trace.json"
    trace.save(trace_path)
    manifest.record_output("demoset", out_path)
    manifest.record_output("trace", trace_path)
    manifest.extra["demoset_hash"] = demos_mod.demoset_hash(updated)
    manifest.extra["backend_id"] = backend.backend_id
    manifest.write()
    for step in trace.steps:
        log.info(
            "iteration %d: pool micro F1 %.4f appended %s",
            step.iteration,
            step.pool_micro_f1,
            step.appended_doc,
        )
    log.info("updated demo set -> %s", out_path)
    return 0


def cmd_run(args: argparse.Namespace, config: dict[str, Any]) -> int:
    backend, backend_args = _build_backend(args, config)
    budget = int(_resolve(args, config, "budget", DEFAULT_BUDGET, int))
    model = _resolve(args, config, "model", "scripted")
    order_policy = _resolve(args, config, "order_policy", "M-H-L-F")
    dataset = _resolve(args, config, "dataset", None)
    resolved = {
        "demoset": args.demoset,
        "test": args.test,
        "budget": budget,
        "model": model,
        "order_policy": order_policy,
        "dataset": dataset,
        **backend_args,
    }
    out_dir = _out_dir(args, "run", resolved)
    manifest = _Manifest("run", out_dir)
    manifest.args = resolved
    manifest.record_input(args.demoset)
    manifest.record_input(args.test)
    demoset, _meta = demos_mod.load_demoset(args.demoset)
    test_docs = _load_docs(args.test)
    schema = schema_for(dataset or test_docs[0].dataset)
    outcome = label_documents(
        test_docs,
        demoset,
        backend,
        schema,
        order_policy=order_policy,
        budget=budget,
        model=model,
    )
    manifest.stage("infer")
    out_path = out_dir / "predictions.jsonl"
    ingest.write_predictions(outcome.documents, out_path)
    manifest.record_output("predictions", out_path)
    diag_counts: dict[str, int] = {}
    for diagnostic in outcome.all_diagnostics():
        diag_counts[diagnostic.code] = diag_counts.get(diagnostic.code, 0) + 1
    manifest.extra["diagnostics"] = diag_counts
    manifest.extra["prompts_sent"] = outcome.prompts_sent
    manifest.extra["demoset_hash"] = demos_mod.demoset_hash(demoset)
    manifest.extra["backend_id"] = backend.backend_id
    manifest.write()
    log.info(
        "labeled %d documents (%d prompts) -> %s",
        len(outcome.documents),
        outcome.prompts_sent,
        out_path,
    )
    return 0


def _report_for(pred_path: str, gold_path: str, schema, mode: str):
    gold_docs = ingest.load_normalized(gold_path)
    predictions = ingest.load_predictions(pred_path)
    pred_docs = ingest.apply_predictions(gold_docs, predictions)
    if mode == "sroie-fields":
        return evaluation.sroie_field_f1(pred_docs, gold_docs, schema)
    return evaluation.entity_f1(pred_docs, gold_docs, schema)


def cmd_eval(args: argparse.Namespace, config: dict[str, Any]) -> int:
    dataset = _resolve(args, config, "dataset", None)
    if not dataset:
        raise DocieError("--dataset is required for eval")
    schema = schema_for(dataset)
    mode = _resolve(args, config, "mode", "segment")
    resolved = {
        "pred": args.pred,
        "gold": args.gold,
        "ood_pred": args.ood_pred,
        "ood_gold": args.ood_gold,
        "dataset": dataset.upper(),
        "mode": mode,
    }
    out_dir = _out_dir(args, "eval", resolved)
    manifest = _Manifest("eval", out_dir)
    manifest.args = resolved
    for path in (args.pred, args.gold, args.ood_pred, args.ood_gold):
        if path:
            manifest.record_input(path)
    report = _report_for(args.pred, args.gold, schema, mode)
    manifest.stage("score")
    report_path = out_dir / "report.json"
    evaluation.save_report(report, report_path)
    manifest.record_output("report", report_path)
    table = evaluation.render_report(report)
    if args.ood_pred and args.ood_gold:
        ood_report = _report_for(args.ood_pred, args.ood_gold, schema, mode)
        ood_path = out_dir / "report_ood.json"
        evaluation.save_report(ood_report, ood_path)
        manifest.record_output("report_ood", ood_path)
        comparison = evaluation.compare_reports(report, ood_report)
        comparison_path = out_dir / "comparison.json"
        atomic_write_text(
            comparison_path,
            canonical_json(
                {
                    "format": "docie/comparison",
                    "version": 1,
                    "id_micro_f1": report.micro.f1,
                    "ood_micro_f1": ood_report.micro.f1,
                    "average_f1": comparison.average_f1,
                    "average_f1_pct": comparison.average_f1_pct,
                    "micro_delta": comparison.micro_delta,
                }
            )
            + "\n",
        )
        manifest.record_output("comparison", comparison_path)
        table += (
            f"ID micro F1: {evaluation.format_percent(report.micro.f1)}  "
            f"OOD micro F1: {evaluation.format_percent(ood_report.micro.f1)}  "
            f"Average: {comparison.average_f1_pct}\n"
        )
    table_path = out_dir / "report.txt"
    atomic_write_text(table_path, table)
    manifest.record_output("table", table_path)
    manifest.write()
    sys.stdout.write(table)
    return 0


def cmd_perturb(args: argparse.Namespace, config: dict[str, Any]) -> int:
    seed = int(_resolve(args, config, "seed", 0, int))
    p_sub = float(_resolve(args, config, "p_substitute", 0.15, float))
    p_del = float(_resolve(args, config, "p_char_delete", 0.15, float))
    min_word_len = int(_resolve(args, config, "min_word_len", 3, int))
    extra = {"substitution_table": load_lexicon(args.lexicon)} if args.lexicon else {}
    spec = PerturbSpec(
        seed=seed,
        p_substitute=p_sub,
        p_char_delete=p_del,
        min_word_len=min_word_len,
        **extra,
    )
    resolved = {
        "in": args.input,
        "seed": seed,
        "p_substitute": p_sub,
        "p_char_delete": p_del,
        "min_word_len": min_word_len,
        "lexicon": args.lexicon,
    }
    out_dir = _out_dir(args, "perturb", resolved)
    manifest = _Manifest("perturb", out_dir)
    manifest.args = resolved
    manifest.record_input(args.input)
    documents = []
    events = []
    for doc in _load_docs(args.input):
        perturbed, doc_events = perturb_document(doc, spec)
        documents.append(perturbed)
        events.extend(
            {
                "doc_id": doc.doc_id,
                "segment_id": event.segment_id,
                "word_index": event.word_index,
                "kind": event.kind,
                "before": event.before,
                "after": event.after,
            }
            for event in doc_events
        )
    manifest.stage("perturb")
    out_path = out_dir / "documents.jsonl"
    ingest.write_normalized(documents, out_path)
    log_path = out_dir / "perturb-log.json"
    atomic_write_text(
        log_path,
        canonical_json({"format": "docie/perturb-log", "version": 1, "events": events}) + "\n",
    )
    manifest.record_output("documents", out_path)
    manifest.record_output("log", log_path)
    manifest.extra["n_events"] = len(events)
    manifest.write()
    log.info("perturbed %d documents (%d events) -> %s", len(documents), len(events), out_path)
    return 0


def cmd_rerun(args: argparse.Namespace, config: dict[str, Any]) -> int:
    payload = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    if payload.get("format") != MANIFEST_FORMAT:
        raise DocieError(f"{args.manifest} is not a run manifest")
    command = payload["command"]
    stored = payload["args"]
    parser = build_parser()
    argv = [command]
    if args.out:
        argv += ["--out", args.out]
    for key, value in stored.items():
        if value is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, list):
            if key == "counts":
                argv += [flag, ",".join(str(v) for v in value)]
            else:
                for item in value:
                    argv += [flag, str(item)]
        elif isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv += [flag, str(value)]
    reparsed = parser.parse_args(argv)
    return _dispatch(reparsed)


# ---------------------------------------------------------------- parser


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=("http", "oracle", "template", "transcript"))
    parser.add_argument("--endpoint", help="base URL for the http backend")
    parser.add_argument("--model", help="model id sent to the backend")
    parser.add_argument(
        "--oracle-docs",
        action="append",
        dest="oracle_docs",
        help="normalized documents serving as the oracle answer key (repeatable)",
    )
    parser.add_argument("--transcript", help="transcript file for replay")
    parser.add_argument(
        "--record-transcript",
        dest="record_transcript",
        help="append every (prompt hash, prompt, response) row to this file",
    )
    parser.add_argument("--response-cache", dest="response_cache", help="completion cache directory")
    parser.add_argument("--api-key-env", dest="api_key_env", help="env var holding the bearer token")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docie",
        description="Document information extraction with in-context demonstrations",
    )
    parser.add_argument("--config", help="YAML config file")
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a public dataset into normalized records")
    p.add_argument("--dataset", help="funsd, cord or sroie")
    p.add_argument("--root", required=True)
    p.add_argument("--split", choices=("train", "test"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("order", help="recover reading order")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--min-gap-x", dest="min_gap_x", type=int)
    p.add_argument("--min-gap-y", dest="min_gap_y", type=int)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--dump-tree", dest="dump_tree", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("neighbors", help="select a nearest training document per test document")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--provider", choices=("local", "remote", "openai"))
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--embedding-cache", dest="embedding_cache")
    p.add_argument("--out")
    p.set_defaults(func=cmd_neighbors)

    p = sub.add_parser("demos-init", help="construct the initial demonstration set")
    p.add_argument("--train", required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--counts")
    p.add_argument("--seed", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--dataset")
    p.add_argument("--out")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_demos_init)

    p = sub.add_parser("demos-update", help="iteratively update hard demonstrations")
    p.add_argument("--demoset", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--neighbors", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--order-policy", dest="order_policy", choices=("M-H-L-F", "M-L-H-F"))
    p.add_argument(
        "--hard-capacity",
        dest="hard_capacity",
        help="hard-list size cap: an integer, 'auto' (initial size) or 'none' (grow)",
    )
    p.add_argument("--dataset")
    p.add_argument("--out")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_demos_update)

    p = sub.add_parser("run", help="label test documents with the demonstration set")
    p.add_argument("--demoset", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--budget", type=int)
    p.add_argument("--order-policy", dest="order_policy", choices=("M-H-L-F", "M-L-H-F"))
    p.add_argument("--dataset")
    p.add_argument("--out")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="entity-level F1 of predictions against gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--ood-pred", dest="ood_pred")
    p.add_argument("--ood-gold", dest="ood_gold")
    p.add_argument("--dataset")
    p.add_argument("--mode", choices=("segment", "sroie-fields"))
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("perturb", help="generate an OOD copy by typo injection")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--p-substitute", dest="p_substitute", type=float)
    p.add_argument("--p-char-delete", dest="p_char_delete", type=float)
    p.add_argument("--min-word-len", dest="min_word_len", type=int)
    p.add_argument("--lexicon")
    p.add_argument("--out")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("rerun", help="re-execute a command from its manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rerun)

    return parser


def _dispatch(args: argparse.Namespace) -> int:
    config = _load_config(args.config if hasattr(args, "config") else None)
    return args.func(args, config)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except DocieError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
