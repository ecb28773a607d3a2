"""Exception and warning types raised across the package."""


class NonFiniteInputError(ValueError):
    """An input contained NaN or infinity."""


class LossValidationError(ValueError):
    """A loss failed its sampling-based validation."""


class KinkError(ValueError):
    """A derivative was requested exactly at a kink with no stable one-sided value."""


class KinkWarning(UserWarning):
    """A decision value landed on a kink; the declared subderivative convention was used."""


class FeasibilityError(ValueError):
    """Responsibilities fell outside the unit box."""


class ConvergenceError(RuntimeError):
    """A solver hit its iteration limit.  Carries the best iterate found."""

    def __init__(self, message: str, best=None, best_value: float | None = None):
        super().__init__(message)
        self.best = best
        self.best_value = best_value


class NumericError(ArithmeticError):
    """An objective or gradient produced NaN."""


class InconclusiveFeasibilityError(RuntimeError):
    """Stationarity residual fell in the dead band between the feasible and
    infeasible thresholds; refusing to guess."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class UnsupportedLossError(ValueError):
    """The operation requires a loss shape this loss does not have."""


class EnumerationSizeError(ValueError):
    """Too many unlabeled points for exhaustive labeling enumeration."""


class RankError(ValueError):
    """A normal-equations matrix is singular and no regularization was given."""


class SaddleQualityError(RuntimeError):
    """Saddle-point certificate exceeded its duality-gap threshold.

    Carries the offending result so callers can inspect it.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class CsvFormatError(ValueError):
    """Malformed dataset file; reports the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number
