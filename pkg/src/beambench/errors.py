"""Exception types shared across the workbench.

The CLI maps these onto exit codes: ConfigError -> 2, MissingArtifactError
(and subclasses) -> 3, NumericError (and subclasses) -> 4.
"""


class BeambenchError(Exception):
    """Base class for all workbench errors."""


class InvalidArgumentError(BeambenchError, ValueError):
    """A caller violated an operation's precondition."""


class ShapeError(InvalidArgumentError):
    """Tensor shapes incompatible for an op; message names op and shapes."""


class ConfigError(BeambenchError, ValueError):
    """Bad or missing configuration; message carries the field path."""


class MissingArtifactError(BeambenchError, FileNotFoundError):
    """A required on-disk artifact (dataset, checkpoint) is absent."""


class MissingModalityError(MissingArtifactError):
    """A requested modality payload is not stored for a sample."""


class NumericError(BeambenchError, ArithmeticError):
    """Numeric-domain failure (log/ratio of nonpositive power, divergence)."""


class TrainingDivergenceError(NumericError):
    """Non-finite loss during training; message names epoch and batch."""


class IoError(BeambenchError, OSError):
    """Read/write failure on a dataset or checkpoint path."""
