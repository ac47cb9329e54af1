"""LLM post-editing pipeline for sentence- and document-level machine translation."""

__version__ = "0.1.0"

from .corpus import Chunk, Document, Sentence, chunk_document, count_tokens, left_context_window, split_on_separator
from .decoding import DocResult, Provenance, SentenceOutput, Strategy
from .prompts import Exemplar, MismatchReport, PromptKind, RenderedPrompt
from .session import Session, SentenceStatus, apply_edit, create_session, edit_effort

__all__ = [
    "Chunk",
    "DocResult",
    "Document",
    "Exemplar",
    "MismatchReport",
    "PromptKind",
    "Provenance",
    "RenderedPrompt",
    "Sentence",
    "SentenceOutput",
    "SentenceStatus",
    "Session",
    "Strategy",
    "apply_edit",
    "chunk_document",
    "count_tokens",
    "create_session",
    "edit_effort",
    "left_context_window",
    "split_on_separator",
    "__version__",
]
