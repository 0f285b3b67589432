"""Exception types shared across the engine."""

from __future__ import annotations


class BrepsError(Exception):
    """Base class for engine errors."""


class ConfigError(BrepsError):
    """Invalid or inconsistent engine configuration; message names the offending key."""


class DimensionMismatch(BrepsError):
    """Vector or matrix dimensionality differs from the configured dim."""


class ZeroVector(BrepsError):
    """Cosine similarity requested against an all-zero vector."""


class EmptyScores(BrepsError):
    """Aggregation over an empty block-score list."""


class NoBlocks(BrepsError):
    """Document has no stored block vectors."""


class ServiceUnavailable(BrepsError):
    """Remote embedding service unreachable after all retry attempts."""


class InvalidResponse(BrepsError):
    """Remote embedding service returned a malformed or inconsistent payload."""


class StoreFormatError(BrepsError):
    """Representation store bytes violate the on-disk layout."""


class BadMagic(StoreFormatError):
    """File does not start with the store magic."""


class TruncatedFile(StoreFormatError):
    """File ends mid-record or its trailing index disagrees with the records."""


class DuplicateDocId(BrepsError):
    """The same doc_id appeared twice while writing a store."""


class MalformedLine(BrepsError):
    """Unparseable line in a corpus, queries, triplets, qrels, or run file."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class MissingDocument(BrepsError):
    """Training triplet references a doc_id absent from the store."""


class InvalidTriplet(BrepsError):
    """Training triplet is self-contradictory (positive == negative)."""


class NonFiniteLoss(BrepsError):
    """Training produced a NaN or infinite loss or gradient."""
