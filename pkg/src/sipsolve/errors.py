"""Exception types shared across the package."""


class InputError(ValueError):
    """Raised when caller-supplied data violates a documented precondition."""


class ConfigError(ValueError):
    """Raised when an algorithm configuration is internally inconsistent."""


class CertificationError(RuntimeError):
    """Raised when a certified computation cannot reach its requested gap
    within its node budget (should not happen for declared-Lipschitz data)."""
