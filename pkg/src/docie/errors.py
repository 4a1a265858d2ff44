"""Exception hierarchy shared across the package.

All exceptions accept a plain message; modules that need to re-raise with
extra context construct a new instance of the same type so callers can keep
catching the specific class.
"""

from __future__ import annotations


class DocieError(Exception):
    """Base class for all errors raised by this package."""


# geometry / core
class OutOfBoundsError(DocieError):
    """A coordinate lies outside its page or the 0-1000 grid."""


class DegenerateBoxError(DocieError):
    """A box has x0 > x1 or y0 > y1."""


# ingest
class MalformedAnnotationError(DocieError):
    """An annotation file is unreadable or missing required fields."""


class SchemaMismatchError(DocieError):
    """A persisted file carries an unknown format or version tag."""


# similarity
class ProviderUnavailableError(DocieError):
    """A remote embedding provider could not be reached."""


class DimensionMismatchError(DocieError):
    """Embedding dimensions are inconsistent."""


class ZeroVectorError(DocieError):
    """Cosine similarity is undefined for an all-zero vector."""


# demos / updating
class EmptyPoolError(DocieError):
    """Demonstration construction was given no candidate documents."""


class RegionTooSmallError(DocieError):
    """A layout region has fewer than two segments."""


# prompting
class QueryTooLargeError(DocieError):
    """The query block alone does not fit the token budget."""


class SegmentTooLargeError(DocieError):
    """A single segment exceeds the residual token budget."""


# llm backends
class BackendError(DocieError):
    """Base class for completion-backend failures."""


class AuthError(BackendError):
    """The endpoint rejected our credentials; never retried."""


class RateLimitedError(BackendError):
    """The endpoint kept rate-limiting us after all retries."""


class TransportError(BackendError):
    """Network failure or server error that survived all retries."""


class UnknownTranscriptPromptError(BackendError):
    """A transcript backend was asked for a prompt it has no entry for."""


# evaluation
class CoverageMismatchError(DocieError):
    """Predicted and gold documents do not cover identical ids."""
