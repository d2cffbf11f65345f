"""Exception types shared across the package."""


class HypergrainError(Exception):
    """Base class for all package-specific errors."""


class EmptyDocument(HypergrainError):
    """Raised when a document contains no usable text."""


class DegenerateWindow(HypergrainError):
    """Raised when the window schedule is undefined (g_max == g_overlap)."""


class ProviderUnavailable(HypergrainError):
    """Raised after transport retries against a model endpoint are exhausted."""


class ResponseTooLong(HypergrainError):
    """Raised when a model response hit the output-token ceiling."""


class DimensionMismatch(HypergrainError):
    """Raised when embedding vectors disagree on dimensionality."""


class ExtractionParseFailure(HypergrainError):
    """Raised when a model response cannot be parsed after repair attempts."""


class ZeroVector(HypergrainError):
    """Raised when cosine similarity is requested against a zero-norm vector."""


class ConfigError(HypergrainError):
    """Raised for invalid configuration values or files."""


class StoreError(HypergrainError):
    """Base class for knowledge-base persistence errors."""


class VersionMismatch(StoreError):
    """Raised when an on-disk knowledge base uses an unsupported format version."""


class IntegrityError(StoreError):
    """Raised when a knowledge base fails referential or dimension checks."""


class ParseError(StoreError):
    """Raised when a record file cannot be decoded.

    Carries the offending path and 1-based line number.
    """

    def __init__(self, message: str, path: str = "", line: int = 0):
        super().__init__(message)
        self.path = path
        self.line = line


class EmptyKnowledgeBase(StoreError):
    """Raised when loading or merging produces a knowledge base with no documents."""


class DatasetError(HypergrainError):
    """Raised for unusable evaluation datasets."""
