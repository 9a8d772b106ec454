"""Exception types shared across the package."""


class OptampError(Exception):
    """Base class for all domain errors raised by optamp."""


class ParameterError(OptampError, ValueError):
    """A supplied experiment parameter is out of its physical range."""


class SolverError(OptampError, RuntimeError):
    """A linear or fixed-point solve failed or is ill-conditioned."""


class ConvergenceError(SolverError):
    """An iterative solve did not reach the requested tolerance."""
