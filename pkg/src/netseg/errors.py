"""Exception types shared across the package."""


class NetsegError(Exception):
    """Base class for all package-specific errors."""


class UndefinedIntegrationError(NetsegError):
    """Integration is undefined because the graph has no edges."""


class NoWedgeError(NetsegError):
    """A wedge was requested but the graph contains none."""


class NoMissingEdgeError(NetsegError):
    """An edge addition was requested on a complete graph."""


class DegenerateParamsError(NetsegError, ValueError):
    """Model parameters fall in a regime where the requested quantity is undefined."""


class NonConvergenceError(NetsegError):
    """An iterative numerical routine failed to converge within its budget."""


class NoStableEquilibriumError(NetsegError):
    """No stable fixed point was found for the rewiring model."""


class FitError(NetsegError):
    """Likelihood optimisation failed on every restart.

    Carries the best iterate seen so far in ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
