import hashlib
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from citerag.corpus import Document
from citerag.llm import (GenerationConfig, HttpChatClient, LLMError, PromptTemplate,
                         RecordingClient, ReplayClient, ReplayMiss, TemplateError,
                         TranscriptStore, format_documents, load_template, prompt_hash)
from citerag.llm.templates import BUILTIN_TEMPLATES


class TestTemplates:
    def test_substitution(self):
        t = PromptTemplate("t", "sys", "Q: {question}\n{documents}")
        assert t.render({"question": "why?", "documents": "D"}) == ("sys", "Q: why?\nD")

    def test_missing_binding_names_placeholder(self):
        t = load_template("rag_answer")
        with pytest.raises(TemplateError) as info:
            t.render({"question": "q"})
        assert info.value.args[0] == "documents"

    def test_numbered_document_block(self):
        docs = [Document(str(i), f"T{i}", f"abstract {i}") for i in (11, 22, 33)]
        block = format_documents(docs)
        assert block.splitlines() == [
            "Document [1] (Title: T11, PMID: 11): abstract 11",
            "Document [2] (Title: T22, PMID: 22): abstract 22",
            "Document [3] (Title: T33, PMID: 33): abstract 33",
        ]

    @pytest.mark.parametrize("name", BUILTIN_TEMPLATES)
    def test_builtins_load(self, name):
        assert load_template(name).placeholders

    def test_custom_file(self, tmp_path):
        p = tmp_path / "mine.yaml"
        p.write_text("name: mine\nsystem: be brief\nuser: 'Say {word}'\n")
        assert load_template(str(p)).render({"word": "hi"}) == ("be brief", "Say hi")


class TestPromptHash:
    def test_independent_recomputation(self):
        cfg = GenerationConfig(model_name="m", temperature=0.0, max_tokens=8)
        canon = json.dumps({"max_tokens": 8, "model": "m", "system": "s",
                            "temperature": 0.0, "user": "u"}, separators=(",", ":"))
        assert prompt_hash("s", "u", cfg) == hashlib.sha256(canon.encode()).hexdigest()

    def test_endpoint_excluded_model_included(self):
        a = GenerationConfig(endpoint_url="http://a/v1")
        assert prompt_hash("s", "u", a) == prompt_hash("s", "u", a.replace(endpoint_url="http://b"))
        assert prompt_hash("s", "u", a) != prompt_hash("s", "u", a.replace(model_name="other"))
        assert prompt_hash("s", "u", a) != prompt_hash("s", "u", a.replace(max_tokens=9))


class Echo:
    def __init__(self):
        self.calls = 0

    def complete(self, system, user, config):
        self.calls += 1
        return f"echo:{user}"


class TestRecordReplay:
    def test_record_then_replay(self, tmp_path):
        cfg = GenerationConfig()
        store = TranscriptStore(tmp_path / "t.jsonl")
        inner = Echo()
        rec = RecordingClient(inner, store)
        assert rec.complete("s", "hello", cfg) == "echo:hello"
        assert rec.complete("s", "hello", cfg) == "echo:hello"
        assert inner.calls == 1
        replay = ReplayClient(TranscriptStore(tmp_path / "t.jsonl"))
        assert replay.complete("s", "hello", cfg) == "echo:hello"

    def test_replay_miss_reports_hash(self, tmp_path):
        cfg = GenerationConfig()
        replay = ReplayClient(TranscriptStore(tmp_path / "none.jsonl"))
        with pytest.raises(ReplayMiss) as info:
            replay.complete("s", "new", cfg)
        assert info.value.prompt_hash == prompt_hash("s", "new", cfg)
        assert isinstance(info.value, LLMError)


class FlakyServer:
    """Local chat server answering 429 ``failures`` times before succeeding."""

    def __init__(self, failures, status=429):
        state = {"hits": 0, "bodies": []}
        self.state = state

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                state["bodies"].append(body)
                state["hits"] += 1
                if state["hits"] <= failures:
                    self.send_response(status)
                    self.end_headers()
                    return
                out = json.dumps({"choices": [{"message": {"content": "Yes."}}],
                                  "usage": {"total_tokens": 3}}).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(out)))
                self.end_headers()
                self.wfile.write(out)

            def log_message(self, *args):
                pass

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1"
        threading.Thread(target=self.httpd.serve_forever, daemon=True).start()

    def close(self):
        self.httpd.shutdown()


@pytest.fixture
def flaky():
    servers = []

    def make(failures, status=429):
        s = FlakyServer(failures, status)
        servers.append(s)
        return s
    yield make
    for s in servers:
        s.close()


class TestHttpClient:
    def test_retries_after_rate_limit(self, flaky):
        server = flaky(2)
        delays = []
        client = HttpChatClient(base_delay=0.01, sleep=delays.append)
        cfg = GenerationConfig(model_name="m", endpoint_url=server.url)
        assert client.complete("sys", "Is it?", cfg) == "Yes."
        assert server.state["hits"] == 3
        assert len(delays) == 2
        assert 0 <= delays[0] <= 0.01 and 0 <= delays[1] <= 0.02
        msgs = server.state["bodies"][0]["messages"]
        assert msgs == [{"role": "system", "content": "sys"}, {"role": "user", "content": "Is it?"}]

    def test_exhausted_retries_raise(self, flaky):
        server = flaky(100, status=503)
        client = HttpChatClient(max_retries=2, base_delay=0.0, sleep=lambda s: None)
        with pytest.raises(LLMError, match="503"):
            client.complete("", "x", GenerationConfig(endpoint_url=server.url))
        assert server.state["hits"] == 3

    def test_client_error_not_retried(self, flaky):
        server = flaky(100, status=400)
        client = HttpChatClient(base_delay=0.0, sleep=lambda s: None)
        with pytest.raises(LLMError):
            client.complete("", "x", GenerationConfig(endpoint_url=server.url))
        assert server.state["hits"] == 1

    def test_recording_through_http(self, flaky, tmp_path):
        server = flaky(0)
        store = TranscriptStore(tmp_path / "t.jsonl")
        rec = RecordingClient(HttpChatClient(), store)
        cfg = GenerationConfig(endpoint_url=server.url)
        rec.complete("", "q", cfg)
        line = json.loads((tmp_path / "t.jsonl").read_text())
        assert line["response"] == "Yes." and line["usage"] == {"total_tokens": 3}
        assert line["latency"] >= 0
