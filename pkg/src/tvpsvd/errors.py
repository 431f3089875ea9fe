"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class TvpSvdError(Exception):
    """Base class for all package errors."""


class ConfigError(TvpSvdError, ValueError):
    """Invalid run configuration or prior specification."""


class DataError(TvpSvdError, ValueError):
    """Malformed or inconsistent input data."""


class NumericalError(TvpSvdError, RuntimeError):
    """A numerical contract was violated during computation."""


class SingularValueUnderflow(NumericalError):
    """A singular value fell below the relative tolerance.

    Carries the index of the offending row so users can locate the
    (near-)zero regressor vector.
    """

    def __init__(self, t, value, threshold):
        self.t = int(t)
        self.value = float(value)
        self.threshold = float(threshold)
        super().__init__(
            f"singular value underflow at t={self.t}: "
            f"{self.value:.3e} < {self.threshold:.3e}; pass truncate=True "
            f"to drop directions below the tolerance instead"
        )
