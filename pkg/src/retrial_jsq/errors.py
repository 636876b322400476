"""Exception hierarchy shared by the solver, oracle and CLI."""


class RetrialError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(RetrialError, ValueError):
    pass


class InstabilityError(RetrialError):
    """Raised when a solve is requested for a load rho >= 1."""

    def __init__(self, rho, message=None):
        self.rho = rho
        super().__init__(message or f"unstable system: rho = {rho:.10g} >= 1")


class DomainError(RetrialError, ValueError):
    pass


class DegenerateParameterError(RetrialError):
    pass


class TruncationError(RetrialError):
    """The series did not certify the requested tolerance within the term budget."""

    def __init__(self, message, achieved_bound):
        self.achieved_bound = achieved_bound
        super().__init__(f"{message} (achieved bound {achieved_bound:.3e})")


class ConsistencyError(RetrialError):
    pass


class EvaluationError(RetrialError):
    pass


class SolverError(RetrialError):
    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
