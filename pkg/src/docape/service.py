"""HTTP/JSON API for post-editing sessions, regeneration, and metrics.

Clients poll GET /api/sessions/{id}?since={rev}: mutations bump the session
revision, an unchanged revision yields an empty delta, and suffix
regeneration after an edit runs on a per-session worker thread that marks
in-flight sentences Regenerating. Edits are serialized per session; a newer
edit cancels pending regeneration at or beyond its own index.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import tomli
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import store
from .backends import (
    BackendDescriptor,
    CompletionBackend,
    TranslationBackend,
    build_backend,
    load_backend_config,
)
from .corpus import Document, sanitize_text
from .decoding import Provenance, Strategy
from .errors import (
    BackendError,
    CorruptStateError,
    DocapeError,
    EmptyFieldError,
    IndexOutOfRangeError,
    LengthMismatchError,
    SessionNotFoundError,
    StorageError,
    UnsupportedCapabilityError,
    VersionMismatchError,
)
from .metrics import build_report
from .session import (
    SentenceStatus,
    Session,
    apply_edit,
    create_session,
    edit_effort,
    regeneration_targets,
)
from .tagger import DEFAULT_LEXICONS, tag_document

ENV_PORT = "DOCAPE_PORT"
ENV_DATA_DIR = "DOCAPE_DATA_DIR"


@dataclass
class ServiceConfig:
    backends: dict[str, BackendDescriptor]
    data_dir: Path
    port: int = 8080
    host: str = "127.0.0.1"


def load_service_config(path: str | Path, env: dict | None = None) -> ServiceConfig:
    """TOML config plus environment overrides for port and data_dir."""
    env = dict(os.environ if env is None else env)
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    data_dir = env.get(ENV_DATA_DIR) or data.get("data_dir", "sessions")
    data_dir = Path(data_dir)
    if not data_dir.is_absolute():
        data_dir = Path(path).parent / data_dir
    port = int(env.get(ENV_PORT) or data.get("port", 8080))
    return ServiceConfig(
        backends=load_backend_config(path),
        data_dir=data_dir,
        port=port,
        host=data.get("host", "127.0.0.1"),
    )


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class _Runtime:
    """One live session: its state lock, edit queue, and worker thread."""

    def __init__(self, session: Session):
        self.session = session
        self.lock = threading.RLock()
        self.cond = threading.Condition()
        self.pending: list[int] = []  # edit indices awaiting regeneration
        self.worker: threading.Thread | None = None
        self.stopping = False

    def superseded(self, step: int) -> bool:
        """True when a queued edit below ``step`` makes this step stale."""
        with self.cond:
            return self.stopping or any(p < step for p in self.pending)


class SessionManager:
    """Owns every session runtime plus the shared backend clients."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self._backends: dict[str, Any] = {}
        self._runtimes: dict[str, _Runtime] = {}
        self._lock = threading.Lock()
        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        for session_id in store.list_session_ids(config.data_dir):
            session = store.load_session(session_id, config.data_dir)
            self._settle_loaded(session)
            self._runtimes[session_id] = _Runtime(session)

    @staticmethod
    def _settle_loaded(session: Session) -> None:
        # Regeneration does not survive a restart; surface interrupted
        # sentences as fallbacks instead of a forever-spinning status.
        changed = False
        for j, status in enumerate(session.statuses):
            if status is SentenceStatus.REGENERATING:
                session.statuses[j] = SentenceStatus.FALLBACK
                changed = True
        if changed:
            session.bump()

    def backend(self, name: str) -> Any:
        with self._lock:
            if name not in self._backends:
                if name not in self.config.backends:
                    raise EmptyFieldError(f"backend {name!r} is not configured")
                self._backends[name] = build_backend(self.config.backends[name])
            return self._backends[name]

    def runtime(self, session_id: str) -> _Runtime:
        with self._lock:
            if session_id not in self._runtimes:
                raise SessionNotFoundError(f"no session {session_id!r}")
            return self._runtimes[session_id]

    def create(self, doc: Document, strategy: Strategy, chunk_limit: int, nmt: str, llm: str) -> Session:
        nmt_backend = self.backend(nmt)
        llm_backend = self.backend(llm)
        if not isinstance(nmt_backend, TranslationBackend) or nmt_backend.descriptor.kind != "translation":
            raise UnsupportedCapabilityError(f"backend {nmt!r} is not a translation backend")
        if not isinstance(llm_backend, CompletionBackend) or llm_backend.descriptor.kind != "completion":
            raise UnsupportedCapabilityError(f"backend {llm!r} is not a completion backend")
        session = create_session(doc, strategy, nmt_backend, llm_backend, chunk_limit)
        session.created_at = session.updated_at = _now()
        store.persist_session(session, self.config.data_dir)
        with self._lock:
            self._runtimes[session.session_id] = _Runtime(session)
        return session

    def list_sessions(self) -> list[dict]:
        with self._lock:
            runtimes = list(self._runtimes.values())
        out = []
        for rt in runtimes:
            with rt.lock:
                out.append(
                    {
                        "session_id": rt.session.session_id,
                        "doc_id": rt.session.doc.doc_id,
                        "revision": rt.session.revision,
                        "n": rt.session.n,
                    }
                )
        return sorted(out, key=lambda r: r["session_id"])

    def snapshot(self, session_id: str, since: int | None = None) -> dict:
        rt = self.runtime(session_id)
        with rt.lock:
            session = rt.session
            if since is not None and since == session.revision:
                return {"revision": session.revision, "sentences": []}
            return {
                "revision": session.revision,
                "doc_id": session.doc.doc_id,
                "sentences": [
                    {
                        "index": i,
                        "src": session.doc.sentences[i].text,
                        "nmt_hyp": session.nmt_hyps[i],
                        "output": session.outputs[i].text,
                        "status": session.statuses[i].value,
                        "provenance": session.outputs[i].provenance.value,
                    }
                    for i in range(session.n)
                ],
            }

    def submit_edit(self, session_id: str, index: int, text: str) -> int:
        """Apply the correction synchronously, queue suffix regeneration."""
        rt = self.runtime(session_id)
        llm = self.backend(rt.session.backend_names["llm"])
        with rt.lock:
            session = rt.session
            # apply_edit with an immediate abort: the worker regenerates.
            apply_edit(session, index, text, llm, should_abort=lambda j: True)
            for j in regeneration_targets(session, index):
                session.statuses[j] = SentenceStatus.REGENERATING
            session.updated_at = _now()
            if regeneration_targets(session, index):
                session.bump()
            store.persist_session(session, self.config.data_dir)
            revision = session.revision
        with rt.cond:
            rt.pending.append(index)
            rt.cond.notify()
            if rt.worker is None or not rt.worker.is_alive():
                rt.worker = threading.Thread(target=self._worker_loop, args=(rt,), daemon=True)
                rt.worker.start()
        return revision

    def _worker_loop(self, rt: _Runtime) -> None:
        while True:
            with rt.cond:
                while not rt.pending and not rt.stopping:
                    rt.cond.wait(timeout=0.5)
                if rt.stopping:
                    return
                index = rt.pending.pop(0)
            self._regenerate(rt, index)

    def _regenerate(self, rt: _Runtime, index: int) -> None:
        from .decoding import continuous_step

        with rt.lock:
            session = rt.session
            llm = self.backend(session.backend_names["llm"])
            targets = [
                j
                for j in range(index + 1, session.n)
                if session.statuses[j] is SentenceStatus.REGENERATING
            ]
        for j in targets:
            if rt.superseded(j):
                return
            with rt.lock:
                if rt.session.statuses[j] is not SentenceStatus.REGENERATING:
                    continue
                finalized = [o.text for o in rt.session.outputs[:j]]
            out, _ = continuous_step(
                rt.session.doc, rt.session.nmt_hyps, finalized, j, llm, rt.session.chunk_limit
            )
            with rt.lock:
                if rt.session.statuses[j] is not SentenceStatus.REGENERATING:
                    continue
                rt.session.outputs[j] = out
                rt.session.statuses[j] = (
                    SentenceStatus.MACHINE
                    if out.provenance is Provenance.LLM
                    else SentenceStatus.FALLBACK
                )
                rt.session.updated_at = _now()
                rt.session.bump()
                store.persist_session(rt.session, self.config.data_dir)

    def metrics(self, session_id: str, references: list[str]) -> dict:
        rt = self.runtime(session_id)
        with rt.lock:
            session = rt.session
            if len(references) != session.n:
                raise LengthMismatchError(
                    f"{len(references)} references for a {session.n}-sentence document"
                )
            outputs = [o.text for o in session.outputs]
            src_doc = session.doc
            doc_id = session.doc.doc_id
        hyp_doc = Document.build(doc_id, outputs)
        ref_doc = Document.build(doc_id, references)
        report = build_report(
            outputs,
            references,
            hyp_tags=tag_document(hyp_doc, src_doc, DEFAULT_LEXICONS),
            ref_tags=tag_document(ref_doc, src_doc, DEFAULT_LEXICONS),
        )
        per_sentence, total = edit_effort(outputs, [sanitize_text(r) for r in references])
        return {
            "report": report.to_dict(),
            "edit_effort": {"per_sentence": per_sentence, "total": total},
        }

    def delete(self, session_id: str) -> None:
        rt = self.runtime(session_id)
        with rt.cond:
            rt.stopping = True
            rt.pending.clear()
            rt.cond.notify_all()
        with self._lock:
            self._runtimes.pop(session_id, None)
        store.delete_session(session_id, self.config.data_dir)


class DocumentBody(BaseModel):
    doc_id: str
    sentences: list[str] = Field(min_length=1)


class BackendNames(BaseModel):
    nmt: str
    llm: str


class CreateSessionBody(BaseModel):
    document: DocumentBody
    strategy: str = Strategy.CONTINUOUS_SW.value
    chunk_limit: int = Field(default=256, ge=1)
    backends: BackendNames


class EditBody(BaseModel):
    index: int
    text: str


class MetricsBody(BaseModel):
    references: list[str]


_ERROR_STATUS: list[tuple[type, int, str]] = [
    (SessionNotFoundError, 404, "not_found"),
    (IndexOutOfRangeError, 400, "validation"),
    (EmptyFieldError, 400, "validation"),
    (LengthMismatchError, 400, "validation"),
    (UnsupportedCapabilityError, 400, "validation"),
    (VersionMismatchError, 500, "storage"),
    (CorruptStateError, 500, "storage"),
    (StorageError, 500, "storage"),
    (BackendError, 502, "backend"),
    (DocapeError, 400, "validation"),
]


def _error_response(exc: Exception) -> JSONResponse:
    for etype, status, code in _ERROR_STATUS:
        if isinstance(exc, etype):
            return JSONResponse(
                status_code=status,
                content={"code": code, "message": str(exc), "detail": type(exc).__name__},
            )
    return JSONResponse(
        status_code=500,
        content={"code": "internal", "message": str(exc), "detail": type(exc).__name__},
    )


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="docape", version="0.1.0")
    manager = SessionManager(config)
    app.state.manager = manager

    @app.exception_handler(DocapeError)
    async def handle_docape_error(request: Request, exc: DocapeError) -> JSONResponse:
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"code": "validation", "message": "invalid request body", "detail": str(exc)},
        )

    @app.post("/api/sessions", status_code=201)
    def create_session_endpoint(body: CreateSessionBody) -> dict:
        try:
            strategy = Strategy(body.strategy)
        except ValueError as exc:
            raise EmptyFieldError(f"unknown strategy {body.strategy!r}") from exc
        doc = Document.build(body.document.doc_id, body.document.sentences)
        session = manager.create(doc, strategy, body.chunk_limit, body.backends.nmt, body.backends.llm)
        return {"session_id": session.session_id, "revision": session.revision}

    @app.get("/api/sessions")
    def list_sessions_endpoint() -> list[dict]:
        return manager.list_sessions()

    @app.get("/api/sessions/{session_id}")
    def get_session_endpoint(session_id: str, since: int | None = None) -> dict:
        return manager.snapshot(session_id, since)

    @app.post("/api/sessions/{session_id}/edits", status_code=202)
    def edit_endpoint(session_id: str, body: EditBody) -> dict:
        revision = manager.submit_edit(session_id, body.index, body.text)
        return {"revision": revision}

    @app.post("/api/sessions/{session_id}/metrics")
    def metrics_endpoint(session_id: str, body: MetricsBody) -> dict:
        return manager.metrics(session_id, body.references)

    @app.delete("/api/sessions/{session_id}", status_code=204)
    def delete_endpoint(session_id: str) -> Response:
        manager.delete(session_id)
        return Response(status_code=204)

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="warning")
