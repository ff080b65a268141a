"""Exception types shared across the toolkit.

The CLI maps these onto its exit codes: usage errors exit 1, data-format
errors exit 2, numeric failures exit 3.
"""


class SynformerError(Exception):
    """Base class for all toolkit errors."""


class UsageError(SynformerError):
    """Bad command-line arguments or configuration keys/values."""


class DataFormatError(SynformerError):
    """Malformed corpus, annotation, vocabulary or checkpoint file."""


class NumericError(SynformerError):
    """Training diverged (NaN/inf loss) or another numeric failure."""


class ShapeError(SynformerError):
    """Tensor operands have incompatible shapes."""
