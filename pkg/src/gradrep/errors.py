"""Exception types shared across the pipeline."""


class GradrepError(Exception):
    """Base class for all gradrep-specific errors."""


class FormatError(GradrepError):
    """A tensor file violates the on-disk format contract."""


class DataError(GradrepError):
    """A tensor payload contains non-finite values."""


class ManifestError(GradrepError):
    """A dataset manifest is malformed or references missing files."""


class TrainingError(GradrepError):
    """Training produced a non-finite loss or otherwise diverged."""


class MetricError(GradrepError):
    """A metric cannot be computed from the given inputs."""
