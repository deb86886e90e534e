"""Exception hierarchy shared across the package."""

from __future__ import annotations


class NlsKamError(Exception):
    """Base class for all package errors."""


class DegenerateMonomial(NlsKamError):
    """A combinatorial inequality was asked about a monomial with too few factors."""


class ModeOutOfRange(NlsKamError, ValueError):
    """A mode index exceeds the configured mode cap."""


class MixedClassInput(NlsKamError, ValueError):
    """An operation that needs plain (J-free) input received J factors."""


class DegreeOverflow(NlsKamError):
    """An expansion produced a term above the degree cap."""


class NoDecay(NlsKamError):
    """Lie series term norms failed to decrease for three consecutive orders."""


class EnumerationTooLarge(NlsKamError):
    """A lattice enumeration would exceed the configured budget."""


class SmallDivisorViolation(NlsKamError):
    """A required divisor fell below the floor."""

    def __init__(self, report, message: str | None = None):
        self.report = report
        super().__init__(message or f"small divisor: {report}")


class ResonantLeak(NlsKamError):
    """A resonant term (k == k') reached the homological solver."""


class CapTooSmall(NlsKamError):
    """No admissible sextic tuple fits inside the mode cap."""


class NormDiverges(NlsKamError):
    """The weighted seed norm grows with the mode cap."""


class ScheduleViolation(NlsKamError):
    """A schedule invariant (rho_s < r/2, mu_s > 0) failed."""


class CertificationFailure(NlsKamError):
    """A measured norm exceeded its step bound."""

    def __init__(self, step: int, bound_name: str, measured: float, bound: float):
        self.step = step
        self.bound_name = bound_name
        self.measured = measured
        self.bound = bound
        super().__init__(
            f"step {step}: {bound_name} measured {measured:.6e} exceeds bound {bound:.6e}"
        )


class NoConvergence(NlsKamError):
    """Frequency-map inversion did not converge."""


class IntegratorFailure(NlsKamError):
    """The ODE integrator failed (step-size collapse or similar)."""


class ConfigError(NlsKamError, ValueError):
    """Invalid run configuration."""
