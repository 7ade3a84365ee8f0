"""Exception hierarchy shared by all layers."""


class ArmMpcError(Exception):
    """Base class for every domain error raised by armmpc."""


class Unreachable(ArmMpcError):
    """Target lies outside the annular workspace of the arm."""


class AxisSingular(ArmMpcError):
    """Target sits on the base rotation axis, so the base angle is undefined."""


class LimitViolation(ArmMpcError):
    """An IK solution exists but breaks a joint limit."""


class IllConditioned(ArmMpcError):
    """Inertia matrix too close to singular to invert reliably."""


class NotPositiveDefinite(ArmMpcError, ValueError):
    """A matrix that must be positive definite failed its Cholesky factorization."""


class NoDetection(ArmMpcError):
    """The color mask contains no pixels."""


class NonPositiveInput(ArmMpcError, ValueError):
    """A width, distance or pixel count that must be positive was not."""


class ImageFormatError(ArmMpcError, ValueError):
    """Malformed or truncated PPM data."""


class Diverged(ArmMpcError):
    """Closed-loop joint velocity exceeded the divergence guard."""


class NeverSettled(ArmMpcError):
    """The joint error never stayed inside the settling band."""


class ConfigError(ArmMpcError, ValueError):
    """Scenario configuration is missing a field or violates an invariant."""
