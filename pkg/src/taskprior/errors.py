"""Exception types raised across the package."""


class TaskPriorError(Exception):
    """Base class for all errors raised by taskprior."""


# ingestion / persistence
class MalformedHeader(TaskPriorError, ValueError):
    """Bad NPY magic, version, or header metadata."""


class NonFinite(TaskPriorError, ValueError):
    """A matrix contains NaN or Inf."""

    def __init__(self, row, col, source=None):
        self.row = int(row)
        self.col = int(col)
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"non-finite entry at row {self.row}, col {self.col}{where}")


class DimensionError(TaskPriorError, ValueError):
    """Array has the wrong number of dimensions or too few rows."""


class IoError(TaskPriorError, OSError):
    """A report or kernel could not be written or read."""


# shapes
class ShapeMismatch(TaskPriorError, ValueError):
    """Two operands disagree on the number of samples."""


class NotSquare(TaskPriorError, ValueError):
    pass


class ZeroRow(TaskPriorError, ValueError):
    """A sample's mean-subtracted feature vector is (numerically) zero."""


# prior
class IndexOutOfRange(TaskPriorError, IndexError):
    pass


class SameEdge(TaskPriorError, ValueError):
    """pair_probability was asked for the joint of an edge with itself."""


class TooLarge(TaskPriorError, ValueError):
    """Exact enumeration requested on a problem that is too big."""


# sampler / probe / eval
class MissingFactor(TaskPriorError, ValueError):
    pass


class InvalidClassCount(TaskPriorError, ValueError):
    pass


class DegenerateTask(TaskPriorError, ValueError):
    """A class present in the labeling has no training samples, or the test split is empty."""


class MissingModel(TaskPriorError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing model"
