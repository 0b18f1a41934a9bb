class LabError(Exception):
    """Base class of every error raised by the lab."""


class StateError(LabError, ValueError):
    """A vector, matrix or basis violates its quantum invariants."""


class DimensionMismatch(LabError, ValueError):
    pass


class EncodingError(LabError, ValueError):
    """Bit tuple width or block arithmetic does not fit the encoding scheme."""


class ModelFormatError(LabError, ValueError):
    """Malformed serialized CPUF model."""


class ConfigError(LabError, ValueError):
    pass


class DatabaseExhausted(LabError):
    """No selectable or unseen challenge is left."""


class QueryBudgetExceeded(LabError):
    """An adversary asked the game oracle for more than its q queries."""
