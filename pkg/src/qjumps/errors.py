"""Exception types shared across the package."""


class QjumpsError(RuntimeError):
    """Base class for runtime failures of the simulators."""


class LeakageError(QjumpsError):
    """Raised when the Fock-truncation tail population exceeds its bound.

    Carries the simulation time at which the bound was first violated.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class IntegrationError(QjumpsError):
    """Adaptive integrator failure (step underflow, stalled bisection, ...)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class DarkStateError(QjumpsError):
    """A jump was requested from a state with vanishing emission rate."""


class DivergenceError(QjumpsError):
    """A classical trajectory left the bounded attractor (non-finite state)."""
