"""Completion backends: OpenAI-compatible HTTP plus deterministic scripted ones.

Every backend implements ``complete(request) -> CompletionResponse``. The
scripted backends make the whole pipeline bit-reproducible on a desk: the
oracle echoes gold labels for whatever query block it is shown, the transcript
backend replays recorded responses and fails loudly on unknown prompts, and
the template backend generates rule-based positional descriptions.
"""

from __future__ import annotations

import json
import os
import random
import re
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import requests

from ._util import atomic_write_text, canonical_json, sha256_hex
from .core import BBox, Document
from .errors import (
    AuthError,
    RateLimitedError,
    TransportError,
    UnknownTranscriptPromptError,
)
from .extraction import parse_labeled_segments, parse_query_entries
from .prompting import LAYOUT_QUESTION, render_entry

DEFAULT_MAX_OUTPUT_TOKENS = 1024

_QUERY_MARK = re.compile(r"(?m)^Q:")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model: str = "scripted"
    temperature: float = 0.0  # deterministic output unless explicitly overridden
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    stop: tuple[str, ...] = ()
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if not isinstance(self.stop, tuple):
            object.__setattr__(self, "stop", tuple(self.stop))

    def cache_key(self) -> str:
        payload = {
            "prompt": self.prompt,
            "model": self.model,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "stop": list(self.stop),
        }
        return sha256_hex(canonical_json(payload))


@dataclass
class CompletionResponse:
    text: str
    finish_reason: str = "stop"
    latency_s: float = 0.0
    cache_hit: bool = False
    backend_id: str = ""


class Backend(Protocol):
    backend_id: str

    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


def final_query_block(prompt: str) -> str:
    """Text of the last "Q:" block; the whole prompt when none is marked."""
    matches = list(_QUERY_MARK.finditer(prompt))
    if not matches:
        return prompt
    return prompt[matches[-1].end() :]


class HttpBackend:
    """OpenAI-compatible chat-completions client with bounded retries.

    Transient failures (429, 5xx, transport errors) are retried with
    exponential backoff plus jitter; auth failures are never retried. The
    request content is identical across retries.
    """

    def __init__(
        self,
        base_url: str,
        *,
        path: str = "/v1/chat/completions",
        api_key_env: str = "OPENAI_API_KEY",
        connect_timeout: float = 15.0,
        read_timeout: float = 120.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        max_concurrency: int = 4,
        session: requests.Session | None = None,
        rng: random.Random | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.path = path
        self.api_key_env = api_key_env
        self.timeout = (connect_timeout, read_timeout)
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.backend_id = f"http:{self.base_url}"
        self._session = session or requests.Session()
        self._rng = rng or random.Random()
        self._sleep = sleep
        self._inflight = threading.BoundedSemaphore(max_concurrency)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        payload: dict = {
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        if request.stop:
            payload["stop"] = list(request.stop)
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff_base * (2 ** (attempt - 1))
                self._sleep(delay + self._rng.uniform(0.0, self.backoff_base))
            started = time.monotonic()
            try:
                with self._inflight:
                    response = self._session.post(
                        self.base_url + self.path,
                        json=payload,
                        headers=self._headers(),
                        timeout=self.timeout,
                    )
            except requests.RequestException as exc:
                last_error = TransportError(f"transport failure: {exc}")
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"endpoint rejected credentials (status {response.status_code})")
            if response.status_code == 429:
                last_error = RateLimitedError("rate limited (status 429)")
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"server error (status {response.status_code})")
                continue
            if response.status_code != 200:
                raise TransportError(f"unexpected status {response.status_code}")
            body = response.json()
            choice = body["choices"][0]
            text = choice["message"]["content"]
            for stop in request.stop:
                if stop and text.endswith(stop):
                    text = text[: -len(stop)]
                    break
            return CompletionResponse(
                text=text,
                finish_reason=choice.get("finish_reason", "stop"),
                latency_s=time.monotonic() - started,
                backend_id=self.backend_id,
            )
        assert last_error is not None
        raise last_error


RelabelHook = Callable[[str, str, str, BBox, str], str]


class OracleBackend:
    """Echoes gold labels for the trailing query block of any prompt.

    The answer key maps (text, rendered box) to the owning document, segment
    and gold label; fixtures must not reuse a (text, box) pair with different
    labels. A relabel hook lets tests inject targeted corruption while the
    echo structure stays intact.
    """

    def __init__(
        self,
        documents: Sequence[Document],
        *,
        relabel: RelabelHook | None = None,
        unknown_label: str = "other",
        backend_id: str = "oracle",
    ) -> None:
        self.backend_id = backend_id
        self._relabel = relabel
        self._unknown_label = unknown_label
        self._key: dict[tuple[str, str], tuple[str, str, str]] = {}
        for doc in documents:
            for segment in doc.segments:
                if segment.gold_label is None:
                    raise ValueError(
                        f"oracle answer key needs gold labels; {segment.id!r} has none"
                    )
                key = (segment.text, segment.box.render())
                existing = self._key.get(key)
                if existing is not None and existing[2] != segment.gold_label:
                    raise ValueError(
                        f"ambiguous oracle key {key!r}: labels "
                        f"{existing[2]!r} vs {segment.gold_label!r}"
                    )
                self._key[key] = (doc.doc_id, segment.id, segment.gold_label)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        tail = final_query_block(request.prompt)
        if request.prompt.rstrip().endswith(LAYOUT_QUESTION):
            # layout questions get the rule-based positional description
            return CompletionResponse(
                text=TemplateBackend._describe(tail), backend_id=self.backend_id
            )
        entries = parse_query_entries(tail)
        parts: list[str] = []
        for text, box in entries:
            known = self._key.get((text, box.render()))
            if known is None:
                label = self._unknown_label
            else:
                doc_id, segment_id, label = known
                if self._relabel is not None:
                    label = self._relabel(doc_id, segment_id, text, box, label)
            parts.append(render_entry(text, box, label))
        return CompletionResponse(
            text="".join(parts) + ".", backend_id=self.backend_id
        )


class TranscriptBackend:
    """Replays recorded responses keyed by prompt hash; loud on misses."""

    def __init__(self, responses: Mapping[str, str], backend_id: str = "transcript") -> None:
        self.backend_id = backend_id
        self._responses = dict(responses)

    @classmethod
    def from_prompts(cls, pairs: Mapping[str, str]) -> "TranscriptBackend":
        """Build from literal prompt -> response pairs."""
        return cls({sha256_hex(prompt): response for prompt, response in pairs.items()})

    @classmethod
    def from_file(cls, path: str | Path) -> "TranscriptBackend":
        responses: dict[str, str] = {}
        with open(path, "r", encoding="utf-8") as handle:
            header = json.loads(handle.readline())
            if header.get("format") != "docie/transcript" or header.get("version") != 1:
                raise ValueError(f"not a transcript file: {path}")
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                responses[row["prompt_sha256"]] = row["response"]
        return cls(responses)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = sha256_hex(request.prompt)
        if key not in self._responses:
            raise UnknownTranscriptPromptError(
                f"no transcript entry for prompt hash {key} (tag={request.tag!r})"
            )
        return CompletionResponse(text=self._responses[key], backend_id=self.backend_id)


class TranscriptRecorder:
    """Wraps a backend and appends (hash, prompt, response) rows for replay."""

    def __init__(self, inner: Backend, path: str | Path) -> None:
        self.inner = inner
        self.backend_id = inner.backend_id
        self.path = Path(path)
        self._lock = threading.Lock()
        if not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            header = {"format": "docie/transcript", "version": 1}
            self.path.write_text(canonical_json(header) + "\n", encoding="utf-8")

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        response = self.inner.complete(request)
        row = {
            "prompt_sha256": sha256_hex(request.prompt),
            "prompt": request.prompt,
            "response": response.text,
        }
        with self._lock, open(self.path, "a", encoding="utf-8") as handle:
            handle.write(canonical_json(row) + "\n")
        return response


class TemplateBackend:
    """Rule-based generator for desk runs.

    Layout questions get a positional description derived from the boxes in
    the trailing query block; label questions get every entry echoed with the
    fallback label.
    """

    def __init__(self, *, fallback_label: str = "other", backend_id: str = "template") -> None:
        self.backend_id = backend_id
        self.fallback_label = fallback_label

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        tail = final_query_block(request.prompt)
        if request.prompt.rstrip().endswith(LAYOUT_QUESTION):
            text = self._describe(tail)
        else:
            entries = parse_query_entries(tail)
            text = "".join(
                render_entry(entry_text, box, self.fallback_label)
                for entry_text, box in entries
            ) + "."
        return CompletionResponse(text=text, backend_id=self.backend_id)

    @staticmethod
    def _describe(tail: str) -> str:
        entities, _ = parse_labeled_segments(tail)
        lines: list[str] = []
        previous = None
        for entity in entities:
            if entity.box is None:
                continue
            if previous is None:
                corner = (
                    "in the upper left corner"
                    if entity.box.x0 < 500
                    else "at the top right corner"
                )
                relation = corner
            else:
                overlap = min(entity.box.y1, previous.box.y1) - max(
                    entity.box.y0, previous.box.y0
                )
                if overlap > 0 and entity.box.x0 >= previous.box.x0:
                    relation = f'on the right of "{previous.text}"'
                else:
                    relation = f'below "{previous.text}"'
            lines.append(
                f'"{entity.text}" is located {relation} with a Box of '
                f'{entity.box.render()}, so it can be labeled as "{entity.label}".'
            )
            previous = entity
        return "\n".join(lines)


@dataclass(frozen=True)
class CacheStats:
    hits: int
    misses: int
    bytes: int


class ResponseCache:
    """Content-addressed completion cache; eviction is manual."""

    def __init__(self, directory: str | Path) -> None:
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, request: CompletionRequest) -> CompletionResponse | None:
        path = self._path(request.cache_key())
        with self._lock:
            if not path.exists():
                self._misses += 1
                return None
            self._hits += 1
        payload = json.loads(path.read_text(encoding="utf-8"))
        stored = payload["response"]
        return CompletionResponse(
            text=stored["text"],
            finish_reason=stored.get("finish_reason", "stop"),
            backend_id=stored.get("backend_id", ""),
        )

    def put(self, request: CompletionRequest, response: CompletionResponse) -> None:
        payload = {
            "format": "docie/response-cache",
            "version": 1,
            "request": {
                "prompt": request.prompt,
                "model": request.model,
                "temperature": request.temperature,
                "max_output_tokens": request.max_output_tokens,
                "stop": list(request.stop),
            },
            "response": {
                "text": response.text,
                "finish_reason": response.finish_reason,
                "backend_id": response.backend_id,
            },
        }
        with self._lock:
            atomic_write_text(self._path(request.cache_key()), canonical_json(payload))

    def stats(self) -> CacheStats:
        total = sum(f.stat().st_size for f in self.directory.glob("*.json"))
        with self._lock:
            return CacheStats(self._hits, self._misses, total)

    def clear(self) -> None:
        with self._lock:
            for path in self.directory.glob("*.json"):
                path.unlink()
            self._hits = 0
            self._misses = 0


class CachingBackend:
    """Cache interposition: identical requests never reach the inner backend twice."""

    def __init__(self, inner: Backend, cache: ResponseCache) -> None:
        self.inner = inner
        self.cache = cache
        self.backend_id = inner.backend_id

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        cached = self.cache.get(request)
        if cached is not None:
            return replace(cached, cache_hit=True)
        response = self.inner.complete(request)
        self.cache.put(request, response)
        return response
