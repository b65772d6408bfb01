"""Exception types shared across the package."""


class SummertimeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SummertimeError):
    """A configuration value or key is invalid."""


class CorpusLoadError(SummertimeError):
    """A corpus on disk is missing, malformed, or violates an invariant."""


class FitError(SummertimeError):
    """Model training failed (non-finite inputs, divergence, bad preconditions)."""


class ConsistencyError(SummertimeError):
    """An internal invariant was violated; indicates a bug, not bad input."""


class EvaluationError(SummertimeError):
    """A cross-validation stage failed; message carries the fold context."""
