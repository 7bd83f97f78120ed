"""Interaction potentials K(x,y) = g(d(x,y)^2) and the analytic constants they induce.

A profile bundles g, g' and optional exact formulas for the sup / Lipschitz
constant of g' on [0, delta^2]; when the exact formulas are missing both
constants are estimated on a dense grid (grid size is reported so results are
reproducible).  ``profile_constants`` assembles every constant the
well-posedness estimates consume: the Hessian bound L, the second-argument
log-Lipschitz constant ell, the field Lipschitz constant Lbar and the
measure-Lipschitz constant Lambda.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DiameterTooLarge, MissingGlobalConstant
from .geometry import Manifold, _as_vec

DEFAULT_GRID_SIZE = 10_000


@dataclass(frozen=True)
class PotentialProfile:
    """The radial profile g of an interaction potential, with its metadata constants.

    ``sup_g_prime(delta)`` / ``lip_g_prime(delta)`` are exact formulas for the
    sup norm and Lipschitz constant of g' on [0, delta^2]; either may be None.
    ``a_gprime`` is the global constant of the unbounded-manifold hypothesis
    (r |-> g'(r^2) r globally A-Lipschitz, and globally bounded by A when the
    curvature lower bound is negative).
    """

    name: str
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Callable[[np.ndarray], np.ndarray]
    is_attractive: bool
    a_gprime: float | None = None
    sup_g_prime: Callable[[float], float] | None = None
    lip_g_prime: Callable[[float], float] | None = None

    def __repr__(self):
        return f"PotentialProfile({self.name!r})"


@dataclass(frozen=True)
class PotentialConstants:
    """Constants entering the estimates, all evaluated at diameter bound delta.

    L      : Hessian bound of d^2_z, 2 sqrt(-lambda) delta coth(sqrt(-lambda) delta)
    ell    : log-Lipschitz constant in the second argument
    Lbar   : velocity-field Lipschitz constant  c_gprime*L + 4 delta^2 l_gprime
    Lambda : measure-Lipschitz constant  2 c_gprime*ell + 4 l_gprime delta^2
    """

    delta: float
    c_gprime: float
    l_gprime: float
    L: float
    ell: float
    Lbar: float
    Lambda: float
    eps: float
    grid_size: int | None = None  # None when closed forms were used


def quadratic() -> PotentialProfile:
    """g(s) = s/2, so K = d^2/2; the canonical attractive profile."""
    return PotentialProfile(
        name="quadratic",
        g=lambda s: 0.5 * np.asarray(s, dtype=float),
        g_prime=lambda s: 0.5 * np.ones_like(np.asarray(s, dtype=float)),
        is_attractive=True,
        a_gprime=0.5,
        sup_g_prime=lambda delta: 0.5,
        lip_g_prime=lambda delta: 0.0,
    )


def power(p: float) -> PotentialProfile:
    """g(s) = s^(p/2)/p for p >= 2, so K = d^p / p.

    The Lipschitz constant of g' on [0, delta^2] is finite only for p = 2 or
    p >= 4 (g'' blows up at 0 for 2 < p < 4); the closed form returns inf there.
    """
    if p < 2:
        raise ValueError("power profile requires p >= 2")

    def lip(delta: float) -> float:
        if p == 2:
            return 0.0
        if p < 4:
            return math.inf
        if p == 4:
            return 0.5
        return 0.25 * (p - 2) * delta ** (p - 4)

    return PotentialProfile(
        name=f"power({p:g})",
        g=lambda s: np.asarray(s, dtype=float) ** (p / 2.0) / p,
        g_prime=lambda s: 0.5 * np.asarray(s, dtype=float) ** (p / 2.0 - 1.0),
        is_attractive=True,
        sup_g_prime=lambda delta: 0.5 * delta ** (p - 2.0),
        lip_g_prime=lip,
    )


def bounded_attractive() -> PotentialProfile:
    """g'(s) = 1/(2 sqrt(1+s)): attractive with globally bounded g'(r^2) r.

    g(s) = sqrt(1+s) - 1.  Satisfies the global hypothesis with A_g' = 1/2:
    d/dr [g'(r^2) r] = 1/(2 (1+r^2)^(3/2)) <= 1/2 and g'(r^2) r < 1/2.
    """
    return PotentialProfile(
        name="bounded-attractive",
        g=lambda s: np.sqrt(1.0 + np.asarray(s, dtype=float)) - 1.0,
        g_prime=lambda s: 0.5 / np.sqrt(1.0 + np.asarray(s, dtype=float)),
        is_attractive=True,
        a_gprime=0.5,
        sup_g_prime=lambda delta: 0.5,
        lip_g_prime=lambda delta: 0.25,
    )


_PROFILE_BUILDERS = {
    "quadratic": quadratic,
    "power": power,
    "bounded-attractive": bounded_attractive,
}


def make_profile(name: str, **params) -> PotentialProfile:
    """Build a built-in profile from its config name and parameter list."""
    builder = _PROFILE_BUILDERS.get(name.lower())
    if builder is None:
        raise ValueError(f"unknown potential profile {name!r}")
    return builder(**params)


# -- grid estimation of the g' constants --------------------------------------

def grid_sup_g_prime(profile: PotentialProfile, delta: float,
                     grid_size: int = DEFAULT_GRID_SIZE) -> float:
    """sup |g'| on [0, delta^2] estimated on a dense grid."""
    s = np.linspace(0.0, delta * delta, grid_size)
    return float(np.max(np.abs(profile.g_prime(s))))


def grid_lip_g_prime(profile: PotentialProfile, delta: float,
                     grid_size: int = DEFAULT_GRID_SIZE) -> float:
    """Lipschitz constant of g' on [0, delta^2] estimated on a dense grid.

    On a sorted grid the max difference quotient over all pairs telescopes to
    the max over adjacent pairs, so only adjacent quotients are evaluated.
    """
    s = np.linspace(0.0, delta * delta, grid_size)
    gp = np.asarray(profile.g_prime(s), dtype=float)
    return float(np.max(np.abs(np.diff(gp)) / np.diff(s)))


def hessian_bound_L(delta: float, lam: float) -> float:
    """Hessian bound 2 sqrt(-lambda) delta coth(sqrt(-lambda) delta); 2 in the flat limit."""
    if lam > 0:
        raise ValueError("curvature lower bound lambda must be <= 0")
    a = math.sqrt(-lam) * delta
    if a < 1e-14:
        return 2.0
    return 2.0 * a / math.tanh(a)


def log_lipschitz_ell(mu: float, eps: float) -> float:
    """Second-argument log-Lipschitz constant: (pi-eps)/sin(pi-eps) if mu>0 else 1."""
    if mu <= 0:
        return 1.0
    if not 0.0 < eps < math.pi:
        raise ValueError("eps must lie in (0, pi)")
    return (math.pi - eps) / math.sin(math.pi - eps)


def profile_constants(profile: PotentialProfile, delta: float, lam: float, mu: float,
                      eps: float = math.pi / 2,
                      grid_size: int = DEFAULT_GRID_SIZE) -> PotentialConstants:
    """Assemble every analytic constant at diameter bound delta.

    Raises DiameterTooLarge when mu > 0 and delta violates delta < pi/(2 sqrt(mu))
    (needed for L) or delta <= (pi - eps)/sqrt(mu) (needed for ell).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if mu > 0:
        if delta >= math.pi / (2.0 * math.sqrt(mu)):
            raise DiameterTooLarge(
                f"delta = {delta} >= pi/(2 sqrt(mu)) = {math.pi / (2 * math.sqrt(mu))}"
            )
        if delta > (math.pi - eps) / math.sqrt(mu):
            raise DiameterTooLarge(
                f"delta = {delta} > (pi - eps)/sqrt(mu) = {(math.pi - eps) / math.sqrt(mu)}"
            )
    used_grid = None
    if profile.sup_g_prime is not None:
        c_gp = float(profile.sup_g_prime(delta))
    else:
        c_gp = grid_sup_g_prime(profile, delta, grid_size)
        used_grid = grid_size
    if profile.lip_g_prime is not None:
        l_gp = float(profile.lip_g_prime(delta))
    else:
        l_gp = grid_lip_g_prime(profile, delta, grid_size)
        used_grid = grid_size
    L = hessian_bound_L(delta, lam)
    ell = log_lipschitz_ell(mu, eps)
    lbar = c_gp * L + 4.0 * delta * delta * l_gp
    lam_const = 2.0 * c_gp * ell + 4.0 * l_gp * delta * delta
    return PotentialConstants(
        delta=delta, c_gprime=c_gp, l_gprime=l_gp, L=L, ell=ell,
        Lbar=lbar, Lambda=lam_const, eps=eps, grid_size=used_grid,
    )


# -- potential evaluation ------------------------------------------------------

def eval_K(profile: PotentialProfile, m: Manifold, x, y) -> float:
    """K(x, y) = g(d(x, y)^2)."""
    d = m.distance(x, y)
    return float(profile.g(d * d))


def grad_K(profile: PotentialProfile, m: Manifold, x, y) -> np.ndarray:
    """Intrinsic gradient of K(., y) at x: -2 g'(d^2) log_x(y); zero at x = y."""
    x, y = _as_vec(x), _as_vec(y)
    lg = m.log(x, y)
    d = m.norm(x, lg)
    return -2.0 * float(profile.g_prime(d * d)) * lg


# -- global hypothesis check ---------------------------------------------------

@dataclass(frozen=True)
class KglobReport:
    """Worst-case violations of the two global bounds and the derived remark bound.

    Negative numbers mean the bound holds with margin.  bound_violation is None
    when lam >= 0 (the second bound is only hypothesised for negative curvature).
    """

    a_gprime: float
    lip_violation: float
    bound_violation: float | None
    remark_violation: float
    grid_max: float
    grid_size: int
    tol: float

    @property
    def passed(self) -> bool:
        worst = max(self.lip_violation, self.remark_violation,
                    self.bound_violation if self.bound_violation is not None else -math.inf)
        return worst <= self.tol


def check_kglob(profile: PotentialProfile, lam: float, grid_max: float = 50.0,
                grid_size: int = 2001, tol: float = 1e-9) -> KglobReport:
    """Check the global hypothesis for phi(r) = g'(r^2) r on an r-grid [0, grid_max].

    Reports sup quotient violations of |phi(r) - phi(s)| <= A|r - s| (adjacent
    pairs; equivalent to all pairs on a sorted grid), of |g'(r^2)| r <= A (only
    when lam < 0) and of the derived bound |g'(r^2) - g'(s^2)| s <= 2A|r - s|
    (all grid pairs).
    """
    if profile.a_gprime is None:
        raise MissingGlobalConstant(
            f"profile {profile.name!r} declares no global constant A_g'"
        )
    a = float(profile.a_gprime)
    r = np.linspace(0.0, grid_max, grid_size)
    gp = np.asarray(profile.g_prime(r * r), dtype=float)
    phi = gp * r

    dr = np.diff(r)
    lip_violation = float(np.max(np.abs(np.diff(phi)) / dr) - a)

    bound_violation = float(np.max(np.abs(phi)) - a) if lam < 0 else None

    diff_g = np.abs(gp[:, None] - gp[None, :]) * r[:, None]  # row index carries s
    gap = np.abs(r[:, None] - r[None, :])
    if a > 0:
        ratio = np.divide(diff_g, 2.0 * a * gap, out=np.zeros_like(diff_g),
                          where=gap > 0)
        remark_violation = float(np.max(ratio) - 1.0)
    else:
        remark_violation = float(np.max(diff_g))

    return KglobReport(
        a_gprime=a, lip_violation=lip_violation, bound_violation=bound_violation,
        remark_violation=remark_violation, grid_max=grid_max, grid_size=grid_size,
        tol=tol,
    )
