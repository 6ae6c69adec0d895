"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    pass


class NotFoundError(LookupError):
    pass


class RefusedRegimeError(ValueError):
    """Raised for couplings at or past the spectral-collapse guard."""


class DegenerateSquidError(ValueError):
    """The SQUID is biased at or beyond its degeneracy point (K + S^2/2E_L <= 0)."""


class ConvergenceError(RuntimeError):
    pass


class DefectiveSpectrumError(RuntimeError):
    """Eigenvector pairing failed; the matrix is (close to) defective."""

    def __init__(self, message, cluster=None):
        super().__init__(message)
        self.cluster = cluster


class UndefinedCorrelatorError(ZeroDivisionError):
    pass


class StiffnessError(RuntimeError):
    pass
