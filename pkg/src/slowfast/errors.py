"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument is outside its documented range."""


class PreconditionError(ValueError):
    """A documented operation precondition is violated."""


class SingularityError(ValueError):
    """Evaluation at a singular point (e.g. the Levy density at the origin)."""


class ConfigurationError(ValueError):
    """Inconsistent or unsupported run configuration."""


class DivergenceError(RuntimeError):
    """A simulated state became non-finite.

    Attributes
    ----------
    step : int
        Index of the integration step at which divergence was detected.
    n_diverged : int
        Number of replicas that were non-finite at that step.
    """

    def __init__(self, step, n_diverged=1):
        self.step = int(step)
        self.n_diverged = int(n_diverged)
        super().__init__(
            f"non-finite state at step {self.step} in {self.n_diverged} replica(s)"
        )


class InsufficientSignalError(RuntimeError):
    """Too few usable points above the Monte Carlo noise floor for a fit."""


class NumericError(RuntimeError):
    """A numerical routine (e.g. adaptive quadrature) failed to converge."""


class FitError(ValueError):
    """Degenerate input to a regression routine."""
