"""Crash-safe session persistence: one JSON file per session, atomic writes."""

from __future__ import annotations

import json
import os
from pathlib import Path

from .corpus import Document
from .decoding import Provenance, SentenceOutput, Strategy
from .errors import CorruptStateError, SessionNotFoundError, StorageError, VersionMismatchError
from .session import SentenceStatus, Session

SCHEMA_VERSION = 1


def session_to_dict(session: Session) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "session_id": session.session_id,
        "doc": {"doc_id": session.doc.doc_id, "sentences": session.doc.texts},
        "nmt_hyps": list(session.nmt_hyps),
        "outputs": [{"text": o.text, "provenance": o.provenance.value} for o in session.outputs],
        "statuses": [s.value for s in session.statuses],
        "strategy": session.strategy.value,
        "chunk_limit": session.chunk_limit,
        "backend_names": dict(session.backend_names),
        "revision": session.revision,
        "created_at": session.created_at,
        "updated_at": session.updated_at,
    }


def session_from_dict(data: dict) -> Session:
    return Session(
        session_id=data["session_id"],
        doc=Document.build(data["doc"]["doc_id"], data["doc"]["sentences"]),
        nmt_hyps=list(data["nmt_hyps"]),
        outputs=[
            SentenceOutput(o["text"], Provenance(o["provenance"])) for o in data["outputs"]
        ],
        statuses=[SentenceStatus(s) for s in data["statuses"]],
        strategy=Strategy(data["strategy"]),
        chunk_limit=data["chunk_limit"],
        backend_names=dict(data["backend_names"]),
        revision=data["revision"],
        created_at=data.get("created_at", ""),
        updated_at=data.get("updated_at", ""),
    )


def session_path(session_id: str, data_dir: str | Path) -> Path:
    return Path(data_dir) / f"{session_id}.json"


def persist_session(session: Session, data_dir: str | Path) -> Path:
    """Serialize atomically: write a temp file, then rename over the target.

    A crash between the two steps leaves the previous version intact.
    """
    target = session_path(session.session_id, data_dir)
    payload = json.dumps(session_to_dict(session), ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    tmp = target.with_suffix(".json.tmp")
    try:
        tmp.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, target)
    except OSError as exc:
        raise StorageError(f"cannot persist session {session.session_id}: {exc}") from exc
    return target


def load_session(session_id: str, data_dir: str | Path) -> Session:
    path = session_path(session_id, data_dir)
    if not path.exists():
        raise SessionNotFoundError(f"no session {session_id!r} in {data_dir}")
    raw = path.read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorruptStateError(f"session {session_id}: {exc.msg}", exc.pos) from exc
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise VersionMismatchError(
            f"session {session_id} has schema_version {version}, expected {SCHEMA_VERSION}"
        )
    try:
        return session_from_dict(data)
    except (KeyError, ValueError) as exc:
        raise CorruptStateError(f"session {session_id}: bad field {exc}", 0) from exc


def delete_session(session_id: str, data_dir: str | Path) -> None:
    path = session_path(session_id, data_dir)
    if not path.exists():
        raise SessionNotFoundError(f"no session {session_id!r} in {data_dir}")
    path.unlink()


def list_session_ids(data_dir: str | Path) -> list[str]:
    directory = Path(data_dir)
    if not directory.exists():
        return []
    return sorted(p.stem for p in directory.glob("*.json"))
