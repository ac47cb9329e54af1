"""Shared fixtures: documents, scripted backends, and a stub completions server."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from docape.backends import BackendDescriptor, DictTranslationBackend, ScriptedBackend, ScriptedRule
from docape.corpus import Document

IDENTITY_RULE = ScriptedRule(pattern=r"(?!)", replace="")  # never matches: echo the hypotheses


def make_doc(doc_id: str, texts: list[str]) -> Document:
    return Document.build(doc_id, texts)


@pytest.fixture
def small_doc() -> Document:
    return make_doc(
        "talk1",
        [
            "the cat sleeps .",
            "it sleeps a lot .",
            "the dog barks .",
            "it barks loudly .",
            "everyone is tired .",
        ],
    )


@pytest.fixture
def small_hyps() -> list[str]:
    return [
        "Die Katze schläft .",
        "Sie schläft viel .",
        "Der Hund bellt .",
        "Er bellt laut .",
        "Alle sind müde .",
    ]


def identity_backend(name: str = "llm") -> ScriptedBackend:
    """Completion backend that answers every post-edit prompt with its hypotheses."""
    return ScriptedBackend(
        descriptor=BackendDescriptor(name=name, kind="completion", endpoint="scripted:<memory>"),
        rules=[IDENTITY_RULE],
    )


def failing_backend(name: str = "llm") -> ScriptedBackend:
    """Completion backend with no entries and no rules: every call errors."""
    return ScriptedBackend(
        descriptor=BackendDescriptor(name=name, kind="completion", endpoint="scripted:<memory>")
    )


def identity_nmt(name: str = "nmt", marker: str = "") -> DictTranslationBackend:
    return DictTranslationBackend({}, marker=marker, name=name)


class _StubHandler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802 (stdlib handler API)
        length = int(self.headers.get("Content-Length", 0))
        request = json.loads(self.rfile.read(length)) if length else {}
        status, body = self.server.respond(request)  # type: ignore[attr-defined]
        payload = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # keep test output quiet
        pass


class StubCompletionServer(ThreadingHTTPServer):
    """Local /v1/completions stand-in; `responder` maps request dict -> (status, body)."""

    def __init__(self):
        super().__init__(("127.0.0.1", 0), _StubHandler)
        self.responder = None
        self.requests: list[dict] = []

    def respond(self, request: dict):
        self.requests.append(request)
        return self.responder(request)

    @property
    def endpoint(self) -> str:
        return f"http://127.0.0.1:{self.server_address[1]}"


@pytest.fixture
def stub_server():
    server = StubCompletionServer()
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()
