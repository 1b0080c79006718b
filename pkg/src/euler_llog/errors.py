"""Exception and warning types shared across the package."""


class EulerLLogError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(EulerLLogError, ValueError):
    """A function was evaluated outside its domain (e.g. the kernel at 0)."""


class DivergenceError(EulerLLogError, ValueError):
    """A requested integral is infinite for the given parameters."""


class DataError(EulerLLogError, ValueError):
    """Field data is unusable (non-finite values, wrong rank)."""


class ConfigurationError(EulerLLogError, ValueError):
    """Inconsistent or incomplete configuration."""

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems or [])


class ResourceError(EulerLLogError, RuntimeError):
    """A configured resource cap (e.g. maximal number of blobs) was exceeded."""


class InstabilityError(EulerLLogError, RuntimeError):
    """Time stepping produced non-finite values or violated a stability bound."""

    def __init__(self, message, index=None, suggested_dt=None):
        super().__init__(message)
        self.index = index
        self.suggested_dt = suggested_dt


class InfiniteEnergyWarning(UserWarning):
    """Vorticity with nonzero mean: the planar kinetic energy is infinite."""


class PracticalityWarning(UserWarning):
    """A parameter coupling yields values too small to be runnable."""


class TheoryRegimeWarning(UserWarning):
    """Parameters lie outside the regime covered by the convergence theory."""
