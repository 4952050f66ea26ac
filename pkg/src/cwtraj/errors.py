"""Exception types raised across the package."""


class CwTrajError(Exception):
    """Base class for all package-specific errors."""


class ResonantSteeringRate(CwTrajError):
    """Steering rate too close to a singular frequency of the closed form.

    The analytic in-plane solution breaks down when the steering rate k
    approaches 0 or +/-n. Callers should fall back to numeric propagation
    for the offending segment.
    """


class SingularRadius(CwTrajError):
    """Two-body integration drove the radius below the safe floor."""


class DegenerateOrbit(CwTrajError):
    """State is rectilinear, parabolic, or hyperbolic; elements undefined."""


class NonConvergence(CwTrajError):
    """An iterative root solve failed to reach its tolerance."""


class NoConvergence(CwTrajError):
    """Least-squares solve terminated without meeting the residual tolerance.

    Carries the best solution found so the caller can inspect or export it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InsufficientSampling(CwTrajError):
    """Trajectory samples are too sparse for the requested measurement."""


class ParseError(CwTrajError):
    """Configuration file is not well-formed."""


class ValidationError(CwTrajError):
    """Configuration file is well-formed but violates the schema."""
