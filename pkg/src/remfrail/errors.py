"""Exception types raised across the package."""


class RemfrailError(Exception):
    """Base class for all package-specific errors."""


class EventDataError(RemfrailError):
    """Malformed, inconsistent, or out-of-order relational event data."""


class SimulationError(RemfrailError):
    """Invalid simulation configuration or non-finite rate table."""


class EstimationError(RemfrailError):
    """Likelihood evaluation or optimisation failure that cannot be repaired."""


class BaselineError(RemfrailError):
    """Baseline hazard estimation or smoothing failure."""
