from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from docie.core import BBox, Segment
from docie.errors import AuthError, RateLimitedError, UnknownTranscriptPromptError
from docie.extraction import parse_labeled_segments
from docie.llm import (
    CachingBackend,
    CompletionRequest,
    HttpBackend,
    OracleBackend,
    ResponseCache,
    TemplateBackend,
    TranscriptBackend,
    TranscriptRecorder,
    final_query_block,
)
from docie.prompting import LAYOUT_QUESTION, render_query_block


class TestCompletionRequest:
    def test_temperature_defaults_to_zero(self):
        assert CompletionRequest("hi").temperature == 0.0

    def test_cache_key_depends_on_content(self):
        a = CompletionRequest("hi", model="m1")
        b = CompletionRequest("hi", model="m2")
        assert a.cache_key() != b.cache_key()
        assert a.cache_key() == CompletionRequest("hi", model="m1").cache_key()

    def test_empty_prompt_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest("")


class TestTranscriptBackend:
    def test_replays_exact_response(self):
        backend = TranscriptBackend.from_prompts({"ping": "pong"})
        assert backend.complete(CompletionRequest("ping")).text == "pong"

    def test_unknown_prompt_fails_loudly(self):
        backend = TranscriptBackend.from_prompts({"ping": "pong"})
        with pytest.raises(UnknownTranscriptPromptError):
            backend.complete(CompletionRequest("other"))

    def test_record_then_replay_round_trip(self, tmp_path):
        inner = TranscriptBackend.from_prompts({"ping": "pong", "x": "y"})
        recorder = TranscriptRecorder(inner, tmp_path / "t.jsonl")
        recorder.complete(CompletionRequest("ping"))
        recorder.complete(CompletionRequest("x"))
        replayed = TranscriptBackend.from_file(tmp_path / "t.jsonl")
        assert replayed.complete(CompletionRequest("ping")).text == "pong"
        assert replayed.complete(CompletionRequest("x")).text == "y"


class TestOracleBackend:
    def test_echo_parses_back_to_gold(self, fixture_corpus, schema):
        train, _ = fixture_corpus
        backend = OracleBackend(train)
        doc = train[0]
        prompt = render_query_block(doc.segments)
        response = backend.complete(CompletionRequest(prompt))
        entities, diagnostics = parse_labeled_segments(response.text)
        assert diagnostics == []
        assert [e.label for e in entities] == [s.gold_label for s in doc.segments]

    def test_conflicting_answer_key_rejected(self):
        a = Segment("a:0", "SAME", BBox(1, 2, 3, 4), gold_label="question")
        b = Segment("b:0", "SAME", BBox(1, 2, 3, 4), gold_label="answer")
        from docie.core import Document

        docs = [
            Document("a", "FUNSD", "train", (a,)),
            Document("b", "FUNSD", "train", (b,)),
        ]
        with pytest.raises(ValueError):
            OracleBackend(docs)

    def test_relabel_hook_applies(self, fixture_corpus):
        train, _ = fixture_corpus
        backend = OracleBackend(
            train, relabel=lambda doc_id, seg_id, text, box, gold: "header"
        )
        prompt = render_query_block(train[0].segments[:2])
        entities, _ = parse_labeled_segments(backend.complete(CompletionRequest(prompt)).text)
        assert {e.label for e in entities} == {"header"}


class TestTemplateBackend:
    def test_positional_description_pattern(self):
        # first two region segments of a form: label question then answer
        region = [
            Segment("q:0", "TO:", BBox(84, 53, 112, 67), gold_label="question"),
            Segment("q:1", "R. B. SPELL", BBox(147, 50, 228, 68), gold_label="answer"),
        ]
        from docie.prompting import render_labeled_entries

        prompt = "Q:" + render_labeled_entries(region) + ", " + LAYOUT_QUESTION
        response = TemplateBackend().complete(CompletionRequest(prompt))
        assert '"TO:" is located in the upper left corner' in response.text
        assert '"R. B. SPELL" is located on the right of "TO:"' in response.text
        assert 'labeled as "answer"' in response.text

    def test_deterministic(self):
        region = [
            Segment("q:0", "A", BBox(10, 10, 50, 30), gold_label="question"),
            Segment("q:1", "B", BBox(10, 60, 50, 90), gold_label="answer"),
        ]
        from docie.prompting import render_labeled_entries

        prompt = "Q:" + render_labeled_entries(region) + ", " + LAYOUT_QUESTION
        backend = TemplateBackend()
        first = backend.complete(CompletionRequest(prompt))
        second = backend.complete(CompletionRequest(prompt))
        assert first.text == second.text
        assert 'is located below "A"' in first.text


class TestFinalQueryBlock:
    def test_takes_last_q_block(self):
        prompt = "Q:first block\nA:whatever\n\nQ:the real query"
        assert final_query_block(prompt) == "the real query"

    def test_whole_prompt_without_marker(self):
        assert final_query_block("no marker here") == "no marker here"


class _ScriptedHttpHandler(BaseHTTPRequestHandler):
    script: list[int] = []
    bodies: list[dict] = []
    response_text = "canned body"

    def log_message(self, *args):
        pass

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        type(self).bodies.append(json.loads(self.rfile.read(length)))
        status = type(self).script.pop(0) if type(self).script else 200
        if status != 200:
            self.send_response(status)
            self.end_headers()
            return
        body = json.dumps(
            {
                "choices": [
                    {
                        "message": {"role": "assistant", "content": type(self).response_text},
                        "finish_reason": "stop",
                    }
                ]
            }
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture
def http_stub():
    _ScriptedHttpHandler.script = []
    _ScriptedHttpHandler.bodies = []
    server = HTTPServer(("127.0.0.1", 0), _ScriptedHttpHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}", _ScriptedHttpHandler
    server.shutdown()


def _fast_backend(url: str) -> HttpBackend:
    return HttpBackend(url, backoff_base=0.0, sleep=lambda s: None)


class TestHttpBackend:
    def test_canned_body_round_trip(self, http_stub):
        url, handler = http_stub
        response = _fast_backend(url).complete(CompletionRequest("hello", model="m"))
        assert response.text == "canned body"
        assert response.finish_reason == "stop"
        assert handler.bodies[0]["messages"] == [{"role": "user", "content": "hello"}]
        assert handler.bodies[0]["temperature"] == 0.0

    def test_retries_on_server_error_with_identical_content(self, http_stub):
        url, handler = http_stub
        handler.script = [500, 500]
        response = _fast_backend(url).complete(CompletionRequest("retry me"))
        assert response.text == "canned body"
        assert len(handler.bodies) == 3
        assert all(body == handler.bodies[0] for body in handler.bodies)

    def test_auth_error_is_not_retried(self, http_stub):
        url, handler = http_stub
        handler.script = [401]
        with pytest.raises(AuthError):
            _fast_backend(url).complete(CompletionRequest("denied"))
        assert len(handler.bodies) == 1

    def test_rate_limit_surfaces_after_retries(self, http_stub):
        url, handler = http_stub
        handler.script = [429, 429, 429, 429]
        with pytest.raises(RateLimitedError):
            _fast_backend(url).complete(CompletionRequest("limited"))
        assert len(handler.bodies) == 4  # initial try plus three retries

    def test_stop_sequence_trimmed_from_tail(self, http_stub):
        url, handler = http_stub
        handler.response_text = "answer###"
        try:
            response = _fast_backend(url).complete(
                CompletionRequest("hello", stop=("###",))
            )
            assert response.text == "answer"
        finally:
            handler.response_text = "canned body"


class TestResponseCache:
    def test_fresh_cache_stats(self, tmp_path):
        cache = ResponseCache(tmp_path / "c")
        stats = cache.stats()
        assert (stats.hits, stats.misses) == (0, 0)

    def test_miss_then_hit(self, tmp_path):
        cache = ResponseCache(tmp_path / "c")
        backend = CachingBackend(TranscriptBackend.from_prompts({"p": "r"}), cache)
        first = backend.complete(CompletionRequest("p"))
        second = backend.complete(CompletionRequest("p"))
        assert first.cache_hit is False
        assert second.cache_hit is True
        assert second.text == "r"
        stats = cache.stats()
        assert (stats.hits, stats.misses) == (1, 1)
        assert stats.bytes > 0

    def test_clear_resets_everything(self, tmp_path):
        cache = ResponseCache(tmp_path / "c")
        backend = CachingBackend(TranscriptBackend.from_prompts({"p": "r"}), cache)
        backend.complete(CompletionRequest("p"))
        cache.clear()
        stats = cache.stats()
        assert (stats.hits, stats.misses, stats.bytes) == (0, 0, 0)

    def test_identical_requests_never_reach_inner_twice(self, tmp_path):
        calls = []

        class Counting:
            backend_id = "counting"

            def complete(self, request):
                calls.append(request.prompt)
                from docie.llm import CompletionResponse

                return CompletionResponse(text="x", backend_id=self.backend_id)

        backend = CachingBackend(Counting(), ResponseCache(tmp_path / "c"))
        for _ in range(3):
            backend.complete(CompletionRequest("same"))
        assert calls == ["same"]
