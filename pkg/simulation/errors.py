from typing import Optional, Sequence


class SqueezingError(Exception):
    """Base of the simulation errors. `exit_code` is what the CLI returns for this failure."""
    exit_code = 1


class ValidationError(SqueezingError, ValueError):
    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class ConfigurationError(SqueezingError):
    exit_code = 2


class DomainError(SqueezingError, ValueError):
    exit_code = 2


class InstabilityError(SqueezingError):
    """Divergence or spectral instability.

    Carries whichever evidence the detecting routine had: the blow-up time,
    the offending drift eigenvalues or the Floquet multipliers.
    """
    exit_code = 3

    def __init__(self, message: str, time: Optional[float] = None,
                 eigenvalues: Optional[Sequence[complex]] = None,
                 multipliers: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.time = time
        self.eigenvalues = list(eigenvalues) if eigenvalues is not None else None
        self.multipliers = list(multipliers) if multipliers is not None else None


class DegenerateCouplingError(SqueezingError):
    exit_code = 3


class SingularityError(SqueezingError):
    exit_code = 3

    def __init__(self, message: str, n: Optional[int] = None):
        super().__init__(message)
        self.n = n


class PhysicalityError(SqueezingError):
    exit_code = 3


class ConvergenceError(SqueezingError):
    exit_code = 4

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class OrbitError(ConvergenceError):
    pass


class IntegrationError(ConvergenceError):
    def __init__(self, message: str, abserr: Optional[float] = None):
        super().__init__(message, residual=abserr)
        self.abserr = abserr
