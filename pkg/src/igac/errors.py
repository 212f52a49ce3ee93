"""Exception hierarchy shared by all igac modules."""


class IgacError(Exception):
    """Base class for errors raised by igac."""


class DomainError(IgacError, ValueError):
    """A parametric point lies outside the parameter domain."""


class ContractError(IgacError, ValueError):
    """An argument violates an operation's precondition."""


class SingularGeometryError(IgacError, ArithmeticError):
    """The geometry Jacobian is (numerically) singular at a point."""


class SingularSystemError(IgacError, ArithmeticError):
    """The collocation matrix is singular; the method is not applicable."""


class EvaluationError(IgacError, ArithmeticError):
    """A sampled function returned a non-finite value."""
