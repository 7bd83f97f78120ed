"""Exception taxonomy shared by all modules."""


class ManifoldAggError(Exception):
    """Base class for all library errors."""


class OffManifold(ManifoldAggError):
    """A point or tangent vector violates the manifold's embedding invariants."""


class AntipodalPair(ManifoldAggError):
    """Sphere points at (or too close to) the cut locus; log/transport undefined."""


class ExceedsInjectivity(ManifoldAggError):
    """Tangent vector too long for the exponential map to stay invertible."""


class RadiusTooLarge(ManifoldAggError):
    """Requested sampling ball exceeds the convexity radius."""


class DiameterTooLarge(ManifoldAggError):
    """Diameter violates the positive-curvature preconditions of the constants."""


class MissingGlobalConstant(ManifoldAggError):
    """Profile has no global constant A_g' but a global check requires one."""


class GridMismatch(ManifoldAggError):
    """Two trajectories do not share the same time grid (or weight vector)."""


class NoContraction(ManifoldAggError):
    """The horizon is too long for the fixed-point map to contract."""


class MaxIterExceeded(ManifoldAggError):
    """Fixed-point iteration did not reach the requested tolerance."""


class DiameterViolation(ManifoldAggError):
    """Support diameter crossed the run's diameter guard."""


class NotAttractive(ManifoldAggError):
    """Check requires an attractive profile (g' >= 0)."""


class ConfigError(ManifoldAggError):
    """Run configuration is unreadable or references unknown components."""
