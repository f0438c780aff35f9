"""Exception hierarchy shared across the package.

Every CLI-visible failure maps to one of these classes so callers can
dispatch on the error kind rather than parse messages.
"""


class XaiLabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(XaiLabError):
    """Invalid or inconsistent configuration values."""


class ShapeError(XaiLabError):
    """Array dimensions do not match the model or data contract."""


class InputError(XaiLabError):
    """Non-finite or otherwise unusable input values."""


class DivergenceError(XaiLabError):
    """Training produced a NaN loss; carries the epoch it happened in."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class MetricError(XaiLabError):
    """A metric's precondition is violated (e.g. class with no instances)."""


class SplitError(XaiLabError):
    """A stratified split cannot be formed (e.g. class too small)."""


class SamplingError(XaiLabError):
    """Representative sampling failed (e.g. empty class)."""


class ExplanationError(XaiLabError):
    """An explainer failed hard (singular system, NaN in optimization)."""


class NumericError(XaiLabError):
    """A numeric routine failed to converge."""


class ModelFileError(XaiLabError):
    """Model persistence failure: bad version, truncation, inconsistency."""


class RefusalError(XaiLabError):
    """Requested computation exceeds a hard guard (e.g. exact Shapley d > 12)."""


class ManifestError(XaiLabError):
    """A report's manifest does not match its artifacts."""
