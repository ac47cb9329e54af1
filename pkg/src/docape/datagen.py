"""Cross-fold training-data generation: triples and masked prompt exports.

Hypotheses with realistic NMT errors come from translating each half of the
corpus with a model trained on the other half; the triples then render into
post-editing prompts whose context region is masked so a trainer only learns
to predict the reference.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TypeVar

from .backends import TranslationBackend
from .corpus import Document, Sentence, chunk_document, TRAINING_CHUNK_LIMIT
from .errors import BackendError, CorpusTooSmallError, EmptyFieldError, LengthMismatchError
from .prompts import PromptKind, RenderedPrompt, render_doc_ape, render_sent_ape
from .templates import POST_EDIT_ANCHOR

T = TypeVar("T")

ParallelDoc = tuple[Document, Document]  # (source, reference), sentence-aligned


@dataclass(frozen=True)
class Triple:
    """One training instance: source, machine hypothesis, human reference."""

    doc_id: str
    index: int
    source: Sentence
    hypothesis: Sentence
    reference: Sentence

    def __post_init__(self) -> None:
        for name in ("source", "hypothesis", "reference"):
            if not getattr(self, name).text.strip():
                raise EmptyFieldError(f"triple ({self.doc_id}, {self.index}): empty {name}")


@dataclass(frozen=True)
class DroppedTriple:
    doc_id: str
    index: int
    reason: str


def pair_documents(src_docs: Sequence[Document], ref_docs: Sequence[Document]) -> list[ParallelDoc]:
    if len(src_docs) != len(ref_docs):
        raise LengthMismatchError(f"{len(src_docs)} source docs but {len(ref_docs)} reference docs")
    pairs = []
    for src, ref in zip(src_docs, ref_docs):
        if len(src) != len(ref):
            raise LengthMismatchError(
                f"document {src.doc_id!r}: {len(src)} source sentences but {len(ref)} references"
            )
        pairs.append((src, ref))
    return pairs


def partition_corpus(corpus: Sequence[T], seed: int) -> tuple[list[T], list[T]]:
    """Deterministic document-level split into halves differing by at most one.

    Splitting at document granularity keeps a document's context inside one
    fold, so neither NMT model sees target-side context of its eval half.
    """
    if len(corpus) < 2:
        raise CorpusTooSmallError(f"need at least 2 documents to partition, got {len(corpus)}")
    shuffled = list(corpus)
    random.Random(seed).shuffle(shuffled)
    cut = (len(shuffled) + 1) // 2
    return shuffled[:cut], shuffled[cut:]


def cross_translate(
    half_a: Sequence[ParallelDoc],
    half_b: Sequence[ParallelDoc],
    backend_trained_on_a: TranslationBackend,
    backend_trained_on_b: TranslationBackend,
) -> tuple[list[Triple], list[DroppedTriple]]:
    """Produce triples with each half translated by the opposite half's model.

    Per-sentence backend failures become DroppedTriple diagnostics rather than
    aborting the run; retries happen inside the backend client.
    """
    triples: list[Triple] = []
    dropped: list[DroppedTriple] = []
    for half, backend in ((half_a, backend_trained_on_b), (half_b, backend_trained_on_a)):
        for src_doc, ref_doc in half:
            if len(src_doc) != len(ref_doc):
                raise LengthMismatchError(
                    f"document {src_doc.doc_id!r}: source and reference lengths differ"
                )
            for i, (src, ref) in enumerate(zip(src_doc.sentences, ref_doc.sentences)):
                try:
                    hyp = backend.translate(src)
                    triples.append(
                        Triple(
                            doc_id=src_doc.doc_id,
                            index=i,
                            source=src,
                            hypothesis=hyp,
                            reference=ref,
                        )
                    )
                except (BackendError, EmptyFieldError) as exc:
                    dropped.append(DroppedTriple(src_doc.doc_id, i, str(exc)))
    return triples, dropped


@dataclass(frozen=True)
class TrainingRecord:
    """One masked training example; the completion starts at mask_boundary."""

    prompt: str
    completion: str
    mask_boundary: int
    mask_anchor: str = POST_EDIT_ANCHOR

    @classmethod
    def from_rendered(cls, rendered: RenderedPrompt) -> "TrainingRecord":
        return cls(
            prompt=rendered.masked_text,
            completion=rendered.completion_text,
            mask_boundary=rendered.mask_boundary,
        )

    def to_dict(self) -> dict:
        return {
            "prompt": self.prompt,
            "completion": self.completion,
            "mask_boundary": self.mask_boundary,
            "mask_anchor": self.mask_anchor,
        }


def _grouped(triples: Sequence[Triple]) -> list[list[Triple]]:
    groups: list[list[Triple]] = []
    seen: set[str] = set()
    for triple in triples:
        if groups and groups[-1][0].doc_id == triple.doc_id:
            if triple.index <= groups[-1][-1].index:
                raise LengthMismatchError(
                    f"triples for document {triple.doc_id!r} are not in index order"
                )
            groups[-1].append(triple)
        else:
            if triple.doc_id in seen:
                raise LengthMismatchError(f"triples for document {triple.doc_id!r} are not grouped")
            seen.add(triple.doc_id)
            groups.append([triple])
    return groups


def export_training_examples(
    triples: Sequence[Triple],
    kind: PromptKind,
    chunk_limit: int = TRAINING_CHUNK_LIMIT,
) -> list[TrainingRecord]:
    """Render triples into masked training records.

    Sentence-level export yields one record per triple; document-level export
    chunks each document by source tokens (never crossing a document boundary)
    and joins each chunk's sentences with the separator.
    """
    if kind is PromptKind.SENT_APE:
        return [
            TrainingRecord.from_rendered(
                render_sent_ape(t.source.text, t.hypothesis.text, t.reference.text)
            )
            for t in triples
        ]
    if kind is not PromptKind.DOC_APE:
        raise ValueError(f"training export supports SENT_APE and DOC_APE, not {kind}")
    records: list[TrainingRecord] = []
    for group in _grouped(triples):
        doc = Document(doc_id=group[0].doc_id, sentences=tuple(t.source for t in group))
        for chunk in chunk_document(doc, chunk_limit):
            part = group[chunk.start : chunk.end]
            rendered = render_doc_ape(
                [t.source.text for t in part],
                [t.hypothesis.text for t in part],
                ref_sents=[t.reference.text for t in part],
            )
            records.append(TrainingRecord.from_rendered(rendered))
    return records


# ---------------------------------------------------------------------------
# File formats: triples and training records, one JSON record per line.
# ---------------------------------------------------------------------------


def write_triples(triples: Sequence[Triple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(
                json.dumps(
                    {
                        "doc_id": t.doc_id,
                        "index": t.index,
                        "src": t.source.text,
                        "hyp": t.hypothesis.text,
                        "ref": t.reference.text,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_triples(path: str | Path) -> list[Triple]:
    triples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            r = json.loads(line)
            triples.append(
                Triple(
                    doc_id=r["doc_id"],
                    index=r["index"],
                    source=Sentence.from_text(r["src"]),
                    hypothesis=Sentence.from_text(r["hyp"]),
                    reference=Sentence.from_text(r["ref"]),
                )
            )
    return triples


def write_training_records(records: Sequence[TrainingRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False) + "\n")
