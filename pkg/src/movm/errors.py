"""Exception types shared across the package."""


class MovmError(Exception):
    """Base class for all package-specific errors."""


class DomainError(MovmError, ValueError):
    """Input lies outside the mathematical domain of an operation."""


class RangeError(MovmError, ValueError):
    """Requested value lies outside the attainable range (e.g. OVF inversion)."""


class ConfigError(MovmError, ValueError):
    """Invalid or inconsistent configuration data."""


class DegenerateInputError(MovmError, ValueError):
    """Parameters at which the requested quantity is undefined (e.g. zero delay)."""


class ConvergenceError(MovmError, RuntimeError):
    """An iterative method failed, or two independent methods disagree."""


class AssumptionViolationError(MovmError, RuntimeError):
    """A solvability condition of the normal-form construction failed numerically.

    Carries the offending residual/denominator magnitudes in ``details``.
    """

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class BlowUpError(MovmError, RuntimeError):
    """Simulated state exceeded the runaway guard (instability escape)."""


class NotSettledError(MovmError, RuntimeError):
    """A trajectory never entered and stayed within the requested band."""


class NonStationaryError(MovmError, RuntimeError):
    """Oscillation amplitude is still drifting; the retained window is transient."""
