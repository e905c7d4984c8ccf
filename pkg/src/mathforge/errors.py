"""Exception hierarchy shared across the package.

Every error raised by this package derives from :class:`MathforgeError`
so callers (the CLI, the service layer) can map failures onto exit codes
and HTTP statuses without matching on message text.
"""


class MathforgeError(Exception):
    """Base class for all package errors."""


class DataError(MathforgeError):
    """Malformed user-supplied data: encodings, corpora, artifacts."""


class EncodingError(DataError):
    """A difficulty encoding string failed validation."""


class ScoreParseError(DataError):
    """An evaluator reply did not follow the expected scoring layout.

    ``kind`` distinguishes the failure: ``"block"`` (nothing to parse),
    ``"missing"`` (a dimension's score line is absent) or ``"range"``
    (a score falls outside [0, 10]).
    """

    def __init__(self, message: str, kind: str = "block"):
        super().__init__(message)
        self.kind = kind


class GenerationParseError(DataError):
    """A generator reply lacked the expected problem/solution sections."""


class SamplingError(DataError):
    """A rejection sampler exhausted its attempt budget."""


class ConfigError(MathforgeError):
    """Invalid or inconsistent run configuration."""


class BackendError(MathforgeError):
    """The chat-completion backend failed after retries."""


class AuthError(BackendError):
    """The backend rejected our credentials; retrying cannot help."""
