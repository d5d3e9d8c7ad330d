"""Exception types shared across the package."""


class PnlRankError(Exception):
    """Base class for all package errors."""


class TiesPresent(PnlRankError):
    """Exact ties in a variable that the model assumes to be continuous."""


class ParseError(PnlRankError):
    def __init__(self, path, row, column, message):
        self.path = path
        self.row = row
        self.column = column
        super().__init__(f"{path}:{row}:{column}: {message}")


class NonFinite(PnlRankError):
    def __init__(self, path, row, column):
        self.path = path
        self.row = row
        self.column = column
        super().__init__(f"{path}:{row}:{column}: non-finite value")


class IllPosed(PnlRankError):
    """Fit requested with n <= p, outside the strict-concavity regime."""


class DidNotConverge(PnlRankError):
    """Optimizer exhausted its iteration budget.

    Carries the best iterate found so far in ``fit``.
    """

    def __init__(self, fit, message="optimizer did not converge"):
        self.fit = fit
        super().__init__(f"{message} ({getattr(fit, 'iterations', '?')} iterations)")


class DegeneratePivot(PnlRankError):
    """Pivot column is constant; the (theta, 1) normalization is meaningless."""


class BracketFailure(PnlRankError):
    """Root bracket could not be established (defensive; should not occur)."""


class MissingTransformPoint(PnlRankError):
    """A sample point is absent from the fitted transform estimate."""


class DimensionMismatch(PnlRankError):
    pass


class ResidualsUnavailable(PnlRankError):
    def __init__(self, target, cause):
        self.target = target
        self.cause = cause
        super().__init__(f"residuals unavailable for node {target}: {cause}")


class OrderingFailed(PnlRankError):
    """Every candidate regression failed at some elimination step."""
