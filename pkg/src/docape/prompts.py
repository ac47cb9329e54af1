"""Prompt rendering, exemplar selection, and model-response parsing."""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import templates
from .corpus import SEPARATOR, Sentence, join_with_separator, split_on_separator
from .errors import (
    EmptyFieldError,
    InsufficientPoolError,
    LengthMismatchError,
    MissingEmbeddingError,
    MissingExemplarsError,
)

# Stop sequences. End-of-text is implicit: backends report finish_reason
# "stop" when generation ends without hitting an explicit stop string.
STOP_NEWLINE = "\n"
STOP_SECTION = "\n###"


class PromptKind(enum.Enum):
    ICL = "icl"
    DIRECT_MT = "direct_mt"
    ZERO_SHOT_PE = "zero_shot_pe"
    SENT_APE = "sent_ape"
    DOC_APE = "doc_ape"


@dataclass(frozen=True)
class RenderedPrompt:
    """A prompt ready for a completion backend.

    ``mask_boundary`` is a character offset into prompt_text + forced_prefix:
    everything before it is context (masked during training), everything from
    it on is the trainable completion. For inference prompts it equals the
    total length.
    """

    prompt_text: str
    forced_prefix: str = ""
    stop_sequences: tuple[str, ...] = ()
    mask_boundary: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.mask_boundary <= len(self.prompt_text) + len(self.forced_prefix):
            raise ValueError("mask_boundary outside prompt_text + forced_prefix")

    @property
    def completion_text(self) -> str:
        return (self.prompt_text + self.forced_prefix)[self.mask_boundary :]

    @property
    def masked_text(self) -> str:
        return (self.prompt_text + self.forced_prefix)[: self.mask_boundary]


@dataclass(frozen=True)
class Exemplar:
    """A translation pair available for in-context prompting."""

    source: Sentence
    target: Sentence
    embedding: tuple[float, ...] | None = None


@dataclass(frozen=True)
class MismatchReport:
    """A document response whose sentence count disagrees with the source."""

    expected: int
    got: int
    parts: tuple[str, ...]


def _require(value: str, field: str) -> str:
    if not value or not value.strip():
        raise EmptyFieldError(f"{field} must be non-empty")
    return value


def render_sent_ape(src: str, hyp: str, ref: str | None = None) -> RenderedPrompt:
    """Sentence-level post-editing prompt; training mode appends the reference."""
    _require(src, "src")
    _require(hyp, "hyp")
    prompt = templates.POST_EDIT.format(source=src, hypothesis=hyp)
    boundary = len(prompt)
    if ref is not None:
        _require(ref, "ref")
        return RenderedPrompt(prompt + f" {ref}", mask_boundary=boundary)
    return RenderedPrompt(prompt, stop_sequences=(STOP_NEWLINE,), mask_boundary=boundary)


def render_doc_ape(
    src_sents: Sequence[str],
    hyp_sents: Sequence[str],
    target_prefix: Sequence[str] = (),
    ref_sents: Sequence[str] | None = None,
    single_sentence: bool = False,
) -> RenderedPrompt:
    """Document-level post-editing prompt over separator-joined sentences.

    ``target_prefix`` holds already-finalized target sentences to force-decode;
    generation continues after the trailing separator. ``single_sentence``
    adds the separator itself as a stop so exactly one sentence comes back.
    """
    if len(src_sents) != len(hyp_sents):
        raise LengthMismatchError(
            f"{len(src_sents)} source sentences but {len(hyp_sents)} hypotheses"
        )
    if not src_sents:
        raise EmptyFieldError("src_sents must be non-empty")
    if len(target_prefix) >= len(src_sents):
        raise LengthMismatchError(
            f"target_prefix covers {len(target_prefix)} of {len(src_sents)} sentences; "
            "at least one must remain to generate"
        )
    prompt = templates.POST_EDIT.format(
        source=join_with_separator(src_sents),
        hypothesis=join_with_separator(hyp_sents),
    )
    boundary = len(prompt)
    if ref_sents is not None:
        if len(ref_sents) != len(src_sents):
            raise LengthMismatchError(
                f"{len(src_sents)} source sentences but {len(ref_sents)} references"
            )
        return RenderedPrompt(prompt + f" {join_with_separator(ref_sents)}", mask_boundary=boundary)
    forced = join_with_separator(target_prefix) + f" {SEPARATOR}" if target_prefix else ""
    stops = (SEPARATOR, STOP_NEWLINE) if single_sentence else (STOP_NEWLINE,)
    return RenderedPrompt(prompt, forced_prefix=forced, stop_sequences=stops, mask_boundary=boundary)


def render_icl(exemplars: Sequence[Exemplar], src: str) -> RenderedPrompt:
    """Few-shot translation prompt from exemplar pairs."""
    _require(src, "src")
    if not exemplars:
        raise MissingExemplarsError("ICL prompt needs at least one exemplar")
    parts = [templates.ICL_HEADER]
    for ex in exemplars:
        parts.append(templates.ICL_EXEMPLAR.format(source=ex.source.text, target=ex.target.text))
    parts.append(templates.ICL_QUERY.format(source=src))
    prompt = "".join(parts)
    return RenderedPrompt(prompt, stop_sequences=(STOP_NEWLINE,), mask_boundary=len(prompt))


def render_direct_mt(src: str) -> RenderedPrompt:
    """Direct translation prompt for the chat-tuned baseline."""
    _require(src, "src")
    prompt = templates.DIRECT_MT.format(source=src)
    return RenderedPrompt(prompt, stop_sequences=(STOP_NEWLINE,), mask_boundary=len(prompt))


def render_zero_shot_pe(src: str, hyp: str) -> RenderedPrompt:
    """Instruction-heavy post-editing prompt for unadapted chat models."""
    _require(src, "src")
    _require(hyp, "hyp")
    prompt = templates.ZERO_SHOT_PE.format(source=src, hypothesis=hyp)
    return RenderedPrompt(prompt, stop_sequences=(STOP_SECTION,), mask_boundary=len(prompt))


def render_baseline(kind: PromptKind, **inputs) -> RenderedPrompt:
    """Dispatch for the three baseline prompt kinds."""
    if kind is PromptKind.ICL:
        return render_icl(inputs["exemplars"], inputs["src"])
    if kind is PromptKind.DIRECT_MT:
        return render_direct_mt(inputs["src"])
    if kind is PromptKind.ZERO_SHOT_PE:
        return render_zero_shot_pe(inputs["src"], inputs["hyp"])
    raise ValueError(f"{kind} is not a baseline prompt kind")


def _cosine(a: Sequence[float], b: Sequence[float]) -> float:
    va = np.asarray(a, dtype=float)
    vb = np.asarray(b, dtype=float)
    if va.shape != vb.shape:
        raise LengthMismatchError(f"embedding dims differ: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(va @ vb) / (na * nb)


def select_exemplars(
    pool: Sequence[Exemplar],
    query: Sentence,
    k: int,
    mode: str = "random",
    seed: int | None = None,
    query_embedding: Sequence[float] | None = None,
) -> list[Exemplar]:
    """Pick ``k`` exemplars, either seeded-random or by cosine similarity.

    Similarity mode is exact brute force over the provided vectors; ties are
    broken by pool order. The query embedding comes precomputed (pool files or
    an external embedder), never from this function.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if k > len(pool):
        raise InsufficientPoolError(f"requested {k} exemplars from a pool of {len(pool)}")
    if k == 0:
        return []
    if mode == "random":
        return random.Random(seed).sample(list(pool), k)
    if mode == "similarity":
        if query_embedding is None:
            raise MissingEmbeddingError("similarity mode needs a query embedding")
        missing = [i for i, ex in enumerate(pool) if ex.embedding is None]
        if missing:
            raise MissingEmbeddingError(f"pool items without embeddings: {missing[:5]}")
        sims = [_cosine(query_embedding, ex.embedding) for ex in pool]
        order = sorted(range(len(pool)), key=lambda i: (-sims[i], i))
        return [pool[i] for i in order[:k]]
    raise ValueError(f"unknown selection mode {mode!r}")


def parse_doc_response(text: str, expected: int) -> list[str] | MismatchReport:
    """Split a document response on the separator and check the sentence count.

    A count mismatch is a value, not an exception: the caller decides whether
    to fall back to the sentence-level hypotheses.
    """
    parts = split_on_separator(text)
    if len(parts) == expected:
        return parts
    return MismatchReport(expected=expected, got=len(parts), parts=tuple(parts))


def load_exemplar_pool(path: str | Path) -> list[Exemplar]:
    """Read a record-per-line pool of {source, target, embedding?}."""
    pool: list[Exemplar] = []
    dim: int | None = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            embedding = record.get("embedding")
            if embedding is not None:
                if dim is None:
                    dim = len(embedding)
                elif len(embedding) != dim:
                    raise LengthMismatchError(
                        f"embedding dim {len(embedding)} at line {lineno} differs from {dim}"
                    )
                embedding = tuple(float(x) for x in embedding)
            pool.append(
                Exemplar(
                    source=Sentence.from_text(record["source"]),
                    target=Sentence.from_text(record["target"]),
                    embedding=embedding,
                )
            )
    return pool
