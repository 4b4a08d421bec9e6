"""Exception and warning types shared across the package."""


class GridFreeError(Exception):
    """Base class for all package errors."""


class DomainError(GridFreeError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateSignalError(GridFreeError):
    """The signal is zero where a nonzero signal is required."""


class SingularityError(GridFreeError, ArithmeticError):
    """A matrix that must be inverted is (numerically) singular."""


class DegeneratePolynomialError(GridFreeError):
    """All polynomial coefficients vanish."""


class UnresolvableSignalError(GridFreeError):
    """The dual polynomial carries no support information."""


class InsufficientRootsError(GridFreeError):
    """Fewer roots than requested sources were found."""


class DegenerateSubspaceError(GridFreeError):
    """The subspace split does not admit a minimum-norm vector."""


class InfeasibleError(GridFreeError):
    """The constraint set is empty."""


class SolverFailure(GridFreeError):
    """A numerical solver could not produce a usable answer."""


class ParseError(GridFreeError, ValueError):
    """Malformed input file. ``location`` names the line or field."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class ConditioningWarning(UserWarning):
    """Raised as a warning when a least-squares system is ill-conditioned."""


class LoadingWarning(UserWarning):
    """Diagonal loading was applied to a singular cross-spectral matrix."""
