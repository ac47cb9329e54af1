"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class DocapeError(Exception):
    """Base class for all package-specific errors."""


class EmptyFieldError(DocapeError):
    """A required text field was empty or whitespace-only."""


class LengthMismatchError(DocapeError):
    """Two sequences that must be aligned have different lengths."""


class MissingExemplarsError(DocapeError):
    """An in-context prompt was requested with no exemplars."""


class InsufficientPoolError(DocapeError):
    """More exemplars were requested than the pool contains."""


class MissingEmbeddingError(DocapeError):
    """Similarity selection requires embeddings that are not present."""


class BackendError(DocapeError):
    """Base class for failures talking to a model backend."""


class BackendTimeoutError(BackendError):
    """The backend did not answer within the configured timeout."""


class ProtocolError(BackendError):
    """The backend answered with a malformed or unexpected payload."""


class RemoteError(BackendError):
    """The backend reported a failure (or a scripted backend had no entry)."""


class BackendUnavailableError(BackendError):
    """A named backend could not be reached or is not configured."""


class UnsupportedCapabilityError(BackendError):
    """The backend cannot perform the requested operation (e.g. logprobs)."""


class EmptyContinuationError(DocapeError):
    """score_continuation was called with an empty continuation."""


class FixtureParseError(DocapeError):
    """A scripted-backend fixture file could not be parsed."""

    def __init__(self, message: str, line: int):
        super().__init__(f"{message} (line {line})")
        self.line = line


class IndexOutOfRangeError(DocapeError):
    """A sentence index fell outside the document."""


class CorpusTooSmallError(DocapeError):
    """The corpus has too few documents for the requested operation."""


class EmptyCorpusError(DocapeError):
    """A metric was requested over zero sentence pairs."""


class EmptyBenchmarkError(DocapeError):
    """A benchmark run was requested over zero instances."""


class StorageError(DocapeError):
    """Session state could not be written."""


class SessionNotFoundError(DocapeError):
    """No persisted session exists under the given id."""


class CorruptStateError(DocapeError):
    """A persisted session file failed to parse."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class VersionMismatchError(DocapeError):
    """A persisted session was written by an incompatible schema version."""
