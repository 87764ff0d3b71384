"""Exception types shared by the numerical modules and the case runner."""


class SpectralError(Exception):
    """Base class for every error raised by this project."""


class DomainError(SpectralError, ValueError):
    """A mathematical precondition failed (negative potential, κ ≤ 0, p ≤ 1, ...)."""


class CaseError(SpectralError, ValueError):
    """A case file or case configuration is invalid."""


class InertiaError(SpectralError, RuntimeError):
    """Factorization broke down and no dense fallback was possible."""
