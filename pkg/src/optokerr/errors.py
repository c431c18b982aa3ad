"""Exception and warning types shared across the solver tiers."""


class OptoKerrError(Exception):
    """Base class for all package errors."""


class NoLimitCycleError(OptoKerrError):
    """No stable self-oscillation exists (or a closed form does not apply)."""


class InfiniteCooperativityError(OptoKerrError, ZeroDivisionError):
    """Raised when the cooperativity is requested with zero mechanical damping."""


class DomainError(OptoKerrError, ValueError):
    """Input outside the domain of a closed-form expression."""


class SingularIntegrandError(OptoKerrError):
    """Amplitude diffusion vanishes somewhere on the quadrature grid."""


class DivergenceError(OptoKerrError):
    """Steady-state amplitude density cannot be normalized."""


class DegenerateStateError(OptoKerrError):
    """Mean phonon number too small for the Wigner-moment conversion."""


class SimulationInstabilityError(OptoKerrError):
    """A stochastic trajectory diverged; usually dt is too large."""


class NonExponentialDecayError(OptoKerrError):
    """Ring-down log-amplitude is not linear over the fit window."""


class UnsupportedConfigurationError(OptoKerrError):
    """Physically meaningful setup that this build does not simulate."""


class DimensionBudgetError(OptoKerrError, MemoryError):
    """Truncated Hilbert space exceeds the configured size budget."""


class DegenerateSteadyStateError(OptoKerrError):
    """The Liouvillian kernel is not one-dimensional."""


class ConvergenceError(OptoKerrError):
    """A numerical solve did not reach its stated tolerance."""


class ConfigError(OptoKerrError, ValueError):
    """Invalid run configuration; carries the offending line/key."""

    def __init__(self, message, *, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class DegenerateStateWarning(UserWarning):
    """Small-amplitude state: semiclassical moment conversion is unreliable."""


class ConditioningWarning(UserWarning):
    """Liouvillian is expected to be poorly conditioned."""
