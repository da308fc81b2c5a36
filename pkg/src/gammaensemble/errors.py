"""Exception types shared across the package."""


class EstimationError(RuntimeError):
    """A Monte Carlo estimate failed a numerical reliability guard.

    Raised when too few samples land in a microcanonical shell, or when the
    effective sample size of an importance-weighted estimate is too small.
    """


class DegenerateSpectrumError(ValueError):
    """A closed-form route was asked to handle a degenerate spectrum."""


class HamiltonianFormatError(ValueError):
    """A Hamiltonian file could not be parsed."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
