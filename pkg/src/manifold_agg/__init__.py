"""Intrinsic aggregation dynamics on Riemannian manifolds.

Particle simulation of the interaction equation, exact intrinsic 1-Wasserstein
distances, and numerical certification of the analytic estimates behind its
well-posedness (transport identities, Hessian comparison, flow-map Gronwall
bounds, Picard contraction, stability, support containment).
"""

from . import dynamics, geometry, measures, potentials, verify
from .errors import ManifoldAggError
from .geometry import Euclidean, Hyperbolic, Manifold, Sphere, make_manifold
from .measures import EmpiricalMeasure
from .potentials import PotentialProfile, make_profile, profile_constants

__version__ = "0.1.0"

__all__ = [
    "ManifoldAggError",
    "Manifold",
    "Euclidean",
    "Sphere",
    "Hyperbolic",
    "make_manifold",
    "EmpiricalMeasure",
    "PotentialProfile",
    "make_profile",
    "profile_constants",
    "geometry",
    "potentials",
    "measures",
    "dynamics",
    "verify",
    "__version__",
]
