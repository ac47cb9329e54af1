"""The four inference strategies turning (source doc, NMT hypotheses) into output.

Sentence-level post-editing treats each sentence independently; the three
document strategies trade context coverage against cost: non-overlapping
chunks, a batched sliding window that regenerates and discards its payload,
and a continuous sliding window that force-decodes already-finalized target
sentences so each step generates exactly one new sentence.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .backends import CompletionBackend, CompletionRequest
from .corpus import (
    Document,
    chunk_document,
    count_tokens,
    left_context_window,
    sanitize_text,
)
from .errors import BackendError, IndexOutOfRangeError, LengthMismatchError
from .prompts import MismatchReport, parse_doc_response, render_doc_ape, render_sent_ape

DEFAULT_CHUNK_LIMIT = 256

# Generation budget per call: generous for post-edits, bounded for cost.
MAX_NEW_TOKENS_MARGIN = 32


class Strategy(enum.Enum):
    SENTENCE = "sentence"
    CHUNKED = "chunked"
    BATCHED_SW = "batched-sw"
    CONTINUOUS_SW = "continuous-sw"


class Provenance(enum.Enum):
    LLM = "llm"
    NMT_FALLBACK = "nmt_fallback"
    HUMAN = "human"


@dataclass(frozen=True)
class SentenceOutput:
    text: str
    provenance: Provenance


@dataclass
class DocResult:
    """Per-sentence outputs with provenance plus per-call diagnostics."""

    doc_id: str
    outputs: list[SentenceOutput]
    diagnostics: list[dict] = field(default_factory=list)

    @property
    def fallback_count(self) -> int:
        return sum(1 for o in self.outputs if o.provenance is Provenance.NMT_FALLBACK)

    @property
    def texts(self) -> list[str]:
        return [o.text for o in self.outputs]

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "outputs": [{"text": o.text, "provenance": o.provenance.value} for o in self.outputs],
            "fallback_count": self.fallback_count,
            "diagnostics": self.diagnostics,
        }


def _budget(hypothesis_region: str) -> int:
    return 2 * count_tokens(hypothesis_region) + MAX_NEW_TOKENS_MARGIN


def _check_hyps(doc: Document, nmt_hyps: Sequence[str]) -> None:
    if len(nmt_hyps) != len(doc):
        raise LengthMismatchError(
            f"document {doc.doc_id!r} has {len(doc)} sentences but {len(nmt_hyps)} hypotheses"
        )


def _map_indexed(fn: Callable[[int], object], count: int, jobs: int) -> list:
    """Run fn over 0..count-1, preserving index order in the result list."""
    if jobs <= 1 or count <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=min(jobs, count)) as pool:
        return list(pool.map(fn, range(count)))


def sentence_ape(
    doc: Document, nmt_hyps: Sequence[str], backend: CompletionBackend, jobs: int | None = None
) -> DocResult:
    """Post-edit every sentence independently; backend failure falls back to NMT."""
    _check_hyps(doc, nmt_hyps)
    jobs = jobs or backend.descriptor.max_inflight

    def one(i: int) -> tuple[SentenceOutput, dict]:
        src = doc.sentences[i].text
        hyp = nmt_hyps[i]
        try:
            rendered = render_sent_ape(src, hyp)
            result = backend.complete(
                CompletionRequest(
                    prompt=rendered.prompt_text,
                    max_new_tokens=_budget(hyp),
                    stop_sequences=rendered.stop_sequences,
                )
            )
            text = sanitize_text(result.text)
            if not text:
                raise BackendError("empty completion")
            return SentenceOutput(text, Provenance.LLM), {"index": i, "outcome": "llm"}
        except BackendError as exc:
            return (
                SentenceOutput(sanitize_text(hyp), Provenance.NMT_FALLBACK),
                {"index": i, "outcome": "error", "detail": str(exc)},
            )

    pairs = _map_indexed(one, len(doc), jobs)
    return DocResult(doc.doc_id, [p[0] for p in pairs], [p[1] for p in pairs])


def _fallback_outputs(hyps: Sequence[str]) -> list[SentenceOutput]:
    return [SentenceOutput(sanitize_text(h), Provenance.NMT_FALLBACK) for h in hyps]


def decode_chunked(
    doc: Document,
    nmt_hyps: Sequence[str],
    backend: CompletionBackend,
    limit: int = DEFAULT_CHUNK_LIMIT,
    jobs: int | None = None,
) -> DocResult:
    """Post-edit non-overlapping chunks; a sentence-count mismatch in the
    response replaces the whole chunk with its sentence-level hypotheses."""
    _check_hyps(doc, nmt_hyps)
    jobs = jobs or backend.descriptor.max_inflight
    chunks = chunk_document(doc, limit)

    def one(ci: int) -> tuple[list[SentenceOutput], dict]:
        chunk = chunks[ci]
        srcs = [s.text for s in doc.sentences[chunk.start : chunk.end]]
        hyps = list(nmt_hyps[chunk.start : chunk.end])
        diag = {"chunk": [chunk.start, chunk.end]}
        try:
            rendered = render_doc_ape(srcs, hyps)
            result = backend.complete(
                CompletionRequest(
                    prompt=rendered.prompt_text,
                    max_new_tokens=_budget(" ".join(hyps)),
                    stop_sequences=rendered.stop_sequences,
                )
            )
            parsed = parse_doc_response(result.text, expected=len(chunk))
            if isinstance(parsed, MismatchReport):
                diag.update(outcome="mismatch", expected=parsed.expected, got=parsed.got)
                return _fallback_outputs(hyps), diag
            diag["outcome"] = "llm"
            return [SentenceOutput(sanitize_text(p), Provenance.LLM) for p in parsed], diag
        except BackendError as exc:
            diag.update(outcome="error", detail=str(exc))
            return _fallback_outputs(hyps), diag

    pairs = _map_indexed(one, len(chunks), jobs)
    outputs = [o for chunk_outputs, _ in pairs for o in chunk_outputs]
    return DocResult(doc.doc_id, outputs, [d for _, d in pairs])


def decode_batched_sw(
    doc: Document,
    nmt_hyps: Sequence[str],
    backend: CompletionBackend,
    limit: int = DEFAULT_CHUNK_LIMIT,
    jobs: int | None = None,
) -> DocResult:
    """Sliding window with payload: regenerate the whole left-context window
    per sentence but keep only the last parsed part."""
    _check_hyps(doc, nmt_hyps)
    jobs = jobs or backend.descriptor.max_inflight

    def one(i: int) -> tuple[SentenceOutput, dict]:
        start, end = left_context_window(doc, i, limit)
        srcs = [s.text for s in doc.sentences[start:end]]
        hyps = list(nmt_hyps[start:end])
        diag = {"index": i, "window": [start, end]}
        try:
            rendered = render_doc_ape(srcs, hyps)
            result = backend.complete(
                CompletionRequest(
                    prompt=rendered.prompt_text,
                    max_new_tokens=_budget(" ".join(hyps)),
                    stop_sequences=rendered.stop_sequences,
                )
            )
            parsed = parse_doc_response(result.text, expected=len(srcs))
            if isinstance(parsed, MismatchReport):
                diag.update(outcome="mismatch", expected=parsed.expected, got=parsed.got)
                return SentenceOutput(sanitize_text(nmt_hyps[i]), Provenance.NMT_FALLBACK), diag
            # The payload (regenerated context) is discarded but kept visible
            # in diagnostics for inspection.
            diag.update(outcome="llm", payload=parsed[:-1])
            return SentenceOutput(sanitize_text(parsed[-1]), Provenance.LLM), diag
        except BackendError as exc:
            diag.update(outcome="error", detail=str(exc))
            return SentenceOutput(sanitize_text(nmt_hyps[i]), Provenance.NMT_FALLBACK), diag

    pairs = _map_indexed(one, len(doc), jobs)
    return DocResult(doc.doc_id, [p[0] for p in pairs], [p[1] for p in pairs])


def continuous_step(
    doc: Document,
    nmt_hyps: Sequence[str],
    finalized: Sequence[str],
    i: int,
    backend: CompletionBackend,
    limit: int = DEFAULT_CHUNK_LIMIT,
) -> tuple[SentenceOutput, dict]:
    """Generate sentence ``i`` with the already-finalized targets force-decoded.

    ``finalized`` must cover at least indices [0, i); only the window selected
    by the token limit is put in the prompt.
    """
    if len(finalized) < i:
        raise LengthMismatchError(f"finalized covers {len(finalized)} sentences, step needs {i}")
    start, end = left_context_window(doc, i, limit)
    srcs = [s.text for s in doc.sentences[start:end]]
    hyps = list(nmt_hyps[start:end])
    prefix = list(finalized[start:i])
    diag = {"index": i, "window": [start, end]}
    try:
        rendered = render_doc_ape(srcs, hyps, target_prefix=prefix, single_sentence=True)
        result = backend.complete(
            CompletionRequest(
                prompt=rendered.prompt_text,
                forced_prefix=rendered.forced_prefix,
                max_new_tokens=_budget(nmt_hyps[i]),
                stop_sequences=rendered.stop_sequences,
            )
        )
        text = sanitize_text(result.text)
        if not text:
            raise BackendError("empty completion")
        diag["outcome"] = "llm"
        return SentenceOutput(text, Provenance.LLM), diag
    except BackendError as exc:
        diag.update(outcome="error", detail=str(exc))
        return SentenceOutput(sanitize_text(nmt_hyps[i]), Provenance.NMT_FALLBACK), diag


def decode_continuous_sw(
    doc: Document,
    nmt_hyps: Sequence[str],
    backend: CompletionBackend,
    limit: int = DEFAULT_CHUNK_LIMIT,
    gold_prefix: Sequence[tuple[int, str]] | None = None,
    gold_context: Sequence[str] | None = None,
) -> DocResult:
    """Strictly left-to-right decoding, force-decoding finalized target context.

    ``gold_prefix`` entries pin individual outputs verbatim (provenance Human,
    no backend call) and later steps force-decode them — the manual-editing
    semantics. ``gold_context`` supplies a full reference list used only as
    forced context, so every sentence is still generated — the gold-target-
    context evaluation condition.
    """
    _check_hyps(doc, nmt_hyps)
    gold = dict(gold_prefix or [])
    for k in gold:
        if not 0 <= k < len(doc):
            raise IndexOutOfRangeError(f"gold_prefix index {k} outside [0, {len(doc)})")
    if gold_context is not None and len(gold_context) != len(doc):
        raise LengthMismatchError(
            f"gold_context has {len(gold_context)} sentences, document {len(doc)}"
        )
    outputs: list[SentenceOutput] = []
    diagnostics: list[dict] = []
    finalized: list[str] = []
    for i in range(len(doc)):
        if i in gold:
            text = sanitize_text(gold[i])
            outputs.append(SentenceOutput(text, Provenance.HUMAN))
            diagnostics.append({"index": i, "outcome": "human"})
        else:
            context = gold_context if gold_context is not None else finalized
            out, diag = continuous_step(doc, nmt_hyps, context, i, backend, limit)
            outputs.append(out)
            diagnostics.append(diag)
        if gold_context is not None:
            finalized.append(sanitize_text(gold_context[i]))
        else:
            finalized.append(outputs[-1].text)
    return DocResult(doc.doc_id, outputs, diagnostics)


def run_strategy(
    strategy: Strategy,
    doc: Document,
    nmt_hyps: Sequence[str],
    backend: CompletionBackend,
    limit: int = DEFAULT_CHUNK_LIMIT,
    gold_context: Sequence[str] | None = None,
    jobs: int | None = None,
) -> DocResult:
    if strategy is Strategy.SENTENCE:
        return sentence_ape(doc, nmt_hyps, backend, jobs=jobs)
    if strategy is Strategy.CHUNKED:
        return decode_chunked(doc, nmt_hyps, backend, limit, jobs=jobs)
    if strategy is Strategy.BATCHED_SW:
        return decode_batched_sw(doc, nmt_hyps, backend, limit, jobs=jobs)
    if strategy is Strategy.CONTINUOUS_SW:
        return decode_continuous_sw(doc, nmt_hyps, backend, limit, gold_context=gold_context)
    raise ValueError(f"unknown strategy {strategy}")
