"""Exception and warning types shared across the package."""


class InputError(ValueError):
    """Raised when user-supplied data or configuration is malformed."""


class NumericalError(RuntimeError):
    """Raised when a computation cannot proceed (singular matrix, failed redraw)."""


class ClusteringError(NumericalError):
    """Raised when clustering fails on a subsample; carries the subsample index."""


class CoverageWarning(UserWarning):
    """Emitted when some item pair is never co-sampled, so its consensus is undefined."""


class ConvergenceWarning(UserWarning):
    """Emitted when an iterative weight fit stops at the iteration cap."""
