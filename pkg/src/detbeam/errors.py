"""Exception types shared across the package."""


class DetbeamError(Exception):
    """Base class for all errors raised by detbeam."""


class DimensionMismatchError(DetbeamError):
    """Operands have incompatible shapes."""


class NotPSDError(DetbeamError):
    """A matrix required to be positive semidefinite has a significantly
    negative eigenvalue."""


class NotPDError(DetbeamError):
    """A matrix required to be positive definite failed its Cholesky
    factorization (non-positive pivot)."""


class NoConvergenceError(DetbeamError):
    """An iterative solver exhausted its iteration budget.

    Carries diagnostics: the iteration count, the final residual and,
    where available, the trajectory of iterates.
    """

    def __init__(self, message, *, iterations=None, residual=None, trace=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.trace = trace


class BracketViolationError(DetbeamError):
    """A scalar fixed-point iterate left its admissible bracket."""


class DomainError(DetbeamError):
    """A metric formula received arguments outside its domain (usually a
    symptom of an unconverged or invalid solver state)."""


class AllSilentError(DetbeamError):
    """Water-filling was asked to allocate power but every transmitter has a
    vanishing channel gain."""


class InfeasibleBudgetError(DetbeamError):
    """A power budget is negative or otherwise unusable."""


class ScenarioFormatError(DetbeamError):
    """A scenario file failed schema validation or semantic checks."""
