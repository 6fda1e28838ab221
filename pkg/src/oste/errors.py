"""Exception types raised across the package."""


class OsteError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(OsteError):
    """A configuration file or parameter set is invalid or incomplete."""


class ParseError(OsteError):
    """A CSV cell could not be parsed; the message names the offending row."""


class ValidationError(OsteError):
    """Parsed data violates a dataset invariant (range, level membership, ...)."""


class DegenerateSplitError(OsteError):
    """A random partition produced an unusable part (e.g. no events in train).

    Callers own the retry policy; this error is raised rather than silently
    re-drawing so every re-draw is auditable.
    """


class GrowthError(OsteError):
    """Tree or forest growth is impossible, e.g. an in-bag sample without events."""


class ConcordanceUndefinedError(OsteError):
    """The concordance index has zero permissible pairs."""


class MetricUndefinedError(OsteError):
    """A Brier score or its integral cannot be evaluated on the given sample."""


class SelectionError(OsteError):
    """Greedy sub-ensemble selection cannot proceed (validation metric undefined)."""
