"""Exception hierarchy shared by all bcgkit modules.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2 and missing external dependencies exit 3.
"""


class BcgkitError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(BcgkitError, ValueError):
    """A parameter violates its documented precondition."""


class InvalidInputError(BcgkitError, ValueError):
    """Input data violates a documented precondition."""


class InsufficientBeatsError(InvalidInputError):
    """Too few beats to compute the requested quantity."""


class NoRhythmError(BcgkitError):
    """No admissible periodicity found during initial beat detection."""


class TemplateFailureError(BcgkitError):
    """Template modelling failed (too few mutually similar beat segments)."""


class DegenerateEpochError(InvalidInputError):
    """Epoch signal is degenerate (zero-variance segments, no usable beats)."""


class UndefinedMetricError(BcgkitError):
    """Metric is undefined for the given input (e.g. no interval pairs)."""


class CorpusSpecError(BcgkitError):
    """Corpus specification file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateLabelError(CorpusSpecError):
    """Two corpus entries share the same label."""


class DependencyMissingError(BcgkitError):
    """A configured external tool (e.g. the DL detector) is not available."""
