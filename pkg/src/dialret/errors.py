"""Exception hierarchy shared across the package."""


class DialretError(Exception):
    """Base class for all package errors."""


class CorpusError(DialretError):
    """Corpus file or invariant violation."""


class EncoderError(DialretError):
    """Encoder spec, fitting, or encoding failure."""


class IndexMismatchError(DialretError):
    """Index was built with a different encoder than the one supplied."""


class PoolExhaustedError(DialretError):
    """No unused QA pairs remain for the record."""


class NoAnswerError(DialretError):
    """The answer oracle has no entry for the posed question."""


class TrainingError(DialretError):
    """Training diverged or was misconfigured."""


class SessionStateError(DialretError):
    """Live-session operation attempted from the wrong state."""
