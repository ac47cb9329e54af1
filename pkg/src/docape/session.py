"""Iterative manual post-editing sessions with forced-decoding of corrections.

A human edit pins one sentence and regenerates everything after it, forcing
the already-finalized prefix (machine and human alike) as target context so
the correction propagates to the remaining translations.
"""

from __future__ import annotations

import enum
import uuid
from dataclasses import dataclass
from typing import Callable, Sequence

from .backends import CompletionBackend, TranslationBackend
from .corpus import Document, sanitize_text
from .decoding import (
    DEFAULT_CHUNK_LIMIT,
    DocResult,
    Provenance,
    SentenceOutput,
    Strategy,
    continuous_step,
    run_strategy,
)
from .errors import (
    BackendError,
    BackendUnavailableError,
    EmptyFieldError,
    IndexOutOfRangeError,
    LengthMismatchError,
)


class SentenceStatus(enum.Enum):
    MACHINE = "machine"
    HUMAN = "human"
    REGENERATING = "regenerating"
    FALLBACK = "fallback"


_STATUS_FOR_PROVENANCE = {
    Provenance.LLM: SentenceStatus.MACHINE,
    Provenance.NMT_FALLBACK: SentenceStatus.FALLBACK,
    Provenance.HUMAN: SentenceStatus.HUMAN,
}


@dataclass
class Session:
    """Live manual post-editing state for one document."""

    session_id: str
    doc: Document
    nmt_hyps: list[str]
    outputs: list[SentenceOutput]
    statuses: list[SentenceStatus]
    strategy: Strategy
    chunk_limit: int
    backend_names: dict[str, str]
    revision: int = 1
    created_at: str = ""
    updated_at: str = ""

    def __post_init__(self) -> None:
        n = len(self.doc)
        if not (len(self.nmt_hyps) == len(self.outputs) == len(self.statuses) == n):
            raise LengthMismatchError(f"session state misaligned with {n}-sentence document")

    @property
    def n(self) -> int:
        return len(self.doc)

    def bump(self) -> int:
        self.revision += 1
        return self.revision


def create_session(
    doc: Document,
    strategy: Strategy,
    nmt_backend: TranslationBackend,
    llm_backend: CompletionBackend,
    chunk_limit: int = DEFAULT_CHUNK_LIMIT,
    session_id: str | None = None,
) -> Session:
    """Translate every sentence, then run the initial full-document decode."""
    try:
        hyps = [nmt_backend.translate(s).text for s in doc.sentences]
    except BackendError as exc:
        raise BackendUnavailableError(f"NMT backend failed: {exc}") from exc
    result: DocResult = run_strategy(strategy, doc, hyps, llm_backend, chunk_limit)
    return Session(
        session_id=session_id or uuid.uuid4().hex[:12],
        doc=doc,
        nmt_hyps=hyps,
        outputs=list(result.outputs),
        statuses=[_STATUS_FOR_PROVENANCE[o.provenance] for o in result.outputs],
        strategy=strategy,
        chunk_limit=chunk_limit,
        backend_names={
            "nmt": nmt_backend.descriptor.name,
            "llm": llm_backend.descriptor.name,
        },
    )


def regeneration_targets(session: Session, index: int) -> list[int]:
    """Indices after ``index`` that an edit there will regenerate."""
    return [j for j in range(index + 1, session.n) if session.statuses[j] is not SentenceStatus.HUMAN]


def apply_edit(
    session: Session,
    index: int,
    text: str,
    llm_backend: CompletionBackend,
    on_step: Callable[[Session, int], None] | None = None,
    should_abort: Callable[[int], bool] | None = None,
) -> Session:
    """Pin a human correction and regenerate the non-human suffix in place.

    Regeneration always runs the continuous sliding window (the only strategy
    with a forced-target-prefix mechanism): each step forces every finalized
    sentence before it, so human corrections and the preserved prefix shape
    the regenerated suffix. ``on_step`` fires after each regenerated sentence;
    ``should_abort`` lets a caller cancel before a given step.
    """
    if not 0 <= index < session.n:
        raise IndexOutOfRangeError(f"edit index {index} outside [0, {session.n})")
    clean = sanitize_text(text)
    if not clean:
        raise EmptyFieldError("edit text must be non-empty")
    session.outputs[index] = SentenceOutput(clean, Provenance.HUMAN)
    session.statuses[index] = SentenceStatus.HUMAN
    session.bump()
    for j in regeneration_targets(session, index):
        if should_abort is not None and should_abort(j):
            break
        finalized = [o.text for o in session.outputs[:j]]
        out, _ = continuous_step(
            session.doc, session.nmt_hyps, finalized, j, llm_backend, session.chunk_limit
        )
        session.outputs[j] = out
        session.statuses[j] = _STATUS_FOR_PROVENANCE[out.provenance]
        session.bump()
        if on_step is not None:
            on_step(session, j)
    return session


def levenshtein(a: str, b: str) -> int:
    """Character-level edit distance (two-row dynamic program)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,  # deletion
                    current[j - 1] + 1,  # insertion
                    previous[j - 1] + (ca != cb),  # substitution
                )
            )
        previous = current
    return previous[-1]


def edit_effort(outputs: Sequence[str], references: Sequence[str]) -> tuple[list[int], int]:
    """Per-sentence and total character edit distance to the references."""
    if len(outputs) != len(references):
        raise LengthMismatchError(f"{len(outputs)} outputs but {len(references)} references")
    per_sentence = [levenshtein(o, r) for o, r in zip(outputs, references)]
    return per_sentence, sum(per_sentence)
