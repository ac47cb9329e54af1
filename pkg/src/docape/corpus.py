"""Documents, whitespace token budgeting, chunking, and separator handling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmptyFieldError, LengthMismatchError

# Literal separator joining sentences inside document-level prompts and outputs.
SEPARATOR = "<SS>"
SEPARATOR_JOIN = f" {SEPARATOR} "

# Chunk limits in source tokens: documents are split into 1024-token chunks
# when exporting training data and 256-token windows at inference time.
TRAINING_CHUNK_LIMIT = 1024
INFERENCE_CHUNK_LIMIT = 256


def count_tokens(text: str) -> int:
    """Number of maximal non-whitespace runs in ``text``."""
    return len(text.split())


def sanitize_text(text: str) -> str:
    """Normalize raw text for prompt embedding.

    Collapses all whitespace (including newlines) to single spaces and breaks
    up any embedded separator literal, which must stay unambiguous in prompts.
    """
    collapsed = " ".join(text.split())
    return collapsed.replace(SEPARATOR, "< SS >")


@dataclass(frozen=True)
class Sentence:
    """A single sentence with its whitespace token count."""

    text: str
    token_count: int

    @classmethod
    def from_text(cls, raw: str) -> "Sentence":
        clean = sanitize_text(raw)
        return cls(text=clean, token_count=count_tokens(clean))


@dataclass(frozen=True)
class Document:
    """An ordered, identified sequence of sentences."""

    doc_id: str
    sentences: tuple[Sentence, ...]

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise EmptyFieldError("doc_id must be non-empty")
        if not self.sentences:
            raise EmptyFieldError(f"document {self.doc_id!r} has no sentences")

    @classmethod
    def build(cls, doc_id: str, texts: Iterable[str]) -> "Document":
        return cls(doc_id=doc_id, sentences=tuple(Sentence.from_text(t) for t in texts))

    def __len__(self) -> int:
        return len(self.sentences)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]


@dataclass(frozen=True)
class Chunk:
    """A contiguous half-open sentence range [start, end) of one document."""

    doc_id: str
    start: int
    end: int
    source_tokens: int

    def __len__(self) -> int:
        return self.end - self.start


def chunk_document(doc: Document, limit: int) -> list[Chunk]:
    """Greedy left-to-right packing of sentences into non-overlapping chunks.

    Every chunk's source-token sum stays within ``limit``; a single sentence
    longer than the limit occupies its own chunk so no content is dropped.
    """
    if limit < 1:
        raise ValueError(f"chunk limit must be >= 1, got {limit}")
    chunks: list[Chunk] = []
    start = 0
    tokens = 0
    for i, sent in enumerate(doc.sentences):
        if i > start and tokens + sent.token_count > limit:
            chunks.append(Chunk(doc.doc_id, start, i, tokens))
            start = i
            tokens = 0
        tokens += sent.token_count
        if sent.token_count > limit and i == start:
            chunks.append(Chunk(doc.doc_id, start, i + 1, tokens))
            start = i + 1
            tokens = 0
    if start < len(doc):
        chunks.append(Chunk(doc.doc_id, start, len(doc), tokens))
    return chunks


def left_context_window(doc: Document, i: int, limit: int) -> tuple[int, int]:
    """Largest window [j, i+1) ending at sentence ``i`` within the token limit.

    If sentence ``i`` alone exceeds the limit the window is just [i, i+1).
    """
    if limit < 1:
        raise ValueError(f"window limit must be >= 1, got {limit}")
    if not 0 <= i < len(doc):
        raise IndexError(f"sentence index {i} out of range for n={len(doc)}")
    tokens = doc.sentences[i].token_count
    j = i
    while j > 0 and tokens + doc.sentences[j - 1].token_count <= limit:
        j -= 1
        tokens += doc.sentences[j].token_count
    return j, i + 1


def split_on_separator(text: str, separator: str = SEPARATOR) -> list[str]:
    """Split on the exact separator literal, trimming each part.

    Empty trailing parts are dropped so that a dangling final separator does
    not create a phantom sentence; empty parts elsewhere are preserved.
    """
    parts = [p.strip() for p in text.split(separator)]
    while parts and parts[-1] == "":
        parts.pop()
    return parts


def join_with_separator(parts: Iterable[str]) -> str:
    return SEPARATOR_JOIN.join(parts)


# ---------------------------------------------------------------------------
# Corpus ingest / export.
#
# Two formats: plain text (one sentence per line, blank line = document
# boundary) and JSONL records {"doc_id": ..., "sentences": [...]}.
# ---------------------------------------------------------------------------


def _auto_doc_id(index: int) -> str:
    return f"doc{index:04d}"


def read_plain_corpus(path: str | Path) -> list[Document]:
    docs: list[Document] = []
    block: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.strip() == "":
                if block:
                    docs.append(Document.build(_auto_doc_id(len(docs)), block))
                    block = []
            else:
                block.append(line)
    if block:
        docs.append(Document.build(_auto_doc_id(len(docs)), block))
    return docs


def write_plain_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, doc in enumerate(docs):
            if k > 0:
                fh.write("\n")
            for sent in doc.sentences:
                fh.write(sent.text + "\n")


def read_jsonl_corpus(path: str | Path) -> list[Document]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            docs.append(Document.build(record["doc_id"], record["sentences"]))
    return docs


def write_jsonl_corpus(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({"doc_id": doc.doc_id, "sentences": doc.texts}, ensure_ascii=False) + "\n")


def read_corpus(path: str | Path) -> list[Document]:
    """Dispatch on extension: .jsonl is record-per-line, anything else plain text."""
    if str(path).endswith(".jsonl"):
        return read_jsonl_corpus(path)
    return read_plain_corpus(path)


def write_corpus(docs: Iterable[Document], path: str | Path) -> None:
    if str(path).endswith(".jsonl"):
        write_jsonl_corpus(docs, path)
    else:
        write_plain_corpus(docs, path)


def flatten_texts(docs: Iterable[Document]) -> list[str]:
    return [s.text for doc in docs for s in doc.sentences]


def align_hypotheses(docs: list[Document], hyp_docs: list[Document]) -> Iterator[tuple[Document, list[str]]]:
    """Pair each source document with its aligned hypothesis texts."""
    if len(docs) != len(hyp_docs):
        raise LengthMismatchError(
            f"{len(docs)} source documents but {len(hyp_docs)} hypothesis documents"
        )
    for doc, hyp in zip(docs, hyp_docs):
        if len(doc) != len(hyp):
            raise LengthMismatchError(
                f"document {doc.doc_id!r}: {len(doc)} sentences but {len(hyp)} hypotheses"
            )
        yield doc, hyp.texts
