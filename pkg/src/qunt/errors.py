"""Exception hierarchy shared by the solver modules."""


class NumericalError(RuntimeError):
    """A computation failed for numerical reasons (not bad input)."""


class SingularSystemError(NumericalError, ArithmeticError):
    """Zero or non-finite pivot met while solving a linear system."""


class MeshError(NumericalError):
    """The moving mesh lost node ordering or boundary pinning."""


class ConvergenceError(NumericalError):
    """An iteration did not reach its tolerance within the allowed sweeps."""
