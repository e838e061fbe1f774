"""Exception types raised across the package."""


class InvalidSizeError(ValueError):
    """Lattice linear size out of range."""


class DegeneratePathError(ValueError):
    """Path requested between identical endpoints."""


class ArityError(ValueError):
    """Configurations with mismatched particle numbers."""


class AxisMismatchError(ValueError):
    """Perturbation term with Pauli axes that leave the requested sector."""


class OracleTooLargeError(ValueError):
    """Statevector oracle requested for a lattice beyond its size limit."""


class UnknownConfigurationError(ValueError):
    """Defect configuration not present in a Hamiltonian basis."""


class UnsupportedSectorError(ValueError):
    """Operation restricted to a specific defect sector."""


class NonHermitianError(ValueError):
    """Matrix expected to be Hermitian is not."""


class InvalidSyndromeError(ValueError):
    """Syndrome with an odd number of defects of one species."""


class InconsistentCorrectionError(ValueError):
    """Error/correction combination that does not close into loops."""


class NoCrossingError(ValueError):
    """Scaling curves that never intersect on their overlap."""


class AmbiguousCrossingError(ValueError):
    """Scaling curves with more than one intersection."""

    def __init__(self, crossings):
        self.crossings = list(crossings)
        super().__init__(
            f"multiple crossings found at {self.crossings}; narrow the window"
        )


class InsufficientDataError(ValueError):
    """Not enough points for a fit or extrapolation."""


class BracketingError(RuntimeError):
    """Chemical-potential bisection failed to bracket the target density."""


class ThermalizationWarning(UserWarning):
    """First/second half means of a QMC run disagree beyond 3 sigma."""


class ReflectionWarning(UserWarning):
    """Escape probe sampled beyond the estimated boundary-reflection time."""
