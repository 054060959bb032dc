"""Exception hierarchy shared by all wsnmarkov modules."""


class WSNMarkovError(Exception):
    """Base class for every error raised by this package."""


class DataError(WSNMarkovError):
    """Input data is empty, malformed, or violates a documented invariant."""


class EmptySeriesError(DataError):
    """No readings survived filtering for the requested node and feature."""


class FitError(DataError):
    """A model component could not be fitted from the given values."""


class EstimationError(FitError):
    """Not enough transitions to estimate a transition matrix."""


class StateDomainError(DataError, ValueError):
    """A state index, value or window lies outside the model's domain."""


class ModelFileError(DataError):
    """A saved model file does not match the schema or its invariants."""


class EvaluationError(DataError):
    """Flags and labels do not index the same evaluation universe."""
