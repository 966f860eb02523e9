"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes: usage errors exit 1,
ValidationError exits 2, everything else derived from GptaError exits 3.
"""


class GptaError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(GptaError):
    """Bad input data, config, or precondition violation."""


class ParseError(ValidationError):
    """Malformed file content; carries the offending line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StateError(GptaError):
    """Operation invoked on an object in the wrong state (e.g. frozen params)."""


class ProtocolError(GptaError):
    """The assistant model returned output we could not interpret."""


class TransportError(GptaError):
    """Network-level failure talking to a remote endpoint, after retries."""


class FinetuneError(GptaError):
    """A fine-tuning job ended in a non-success terminal state or timed out."""


class StallError(GptaError):
    """History collection made no progress for too many consecutive rounds."""
