"""Interaction velocity field, geodesic flow-map integrators, and the Picard map.

The self-consistent run integrates the coupled particle ODE on M^N: explicit
geodesic Euler freezes the field at the start-of-step measure, geodesic RK4
re-evaluates it against the staged particle configuration at every stage and
transports stage velocities back to the base point before combining (tangent
vectors at different points cannot be added).  The Picard map integrates the
initial cloud in the field frozen from a given trajectory, with nearest
recorded-time lookup.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DiameterViolation, GridMismatch, MaxIterExceeded, NoContraction
from .geometry import Manifold, _as_vec
from .measures import (
    EmpiricalMeasure,
    support_diameter,
    support_radius,
    w1_sup,
)
from .potentials import PotentialConstants, PotentialProfile, profile_constants

SCHEMES = ("geodesic-euler", "geodesic-rk4")


@dataclass(frozen=True)
class FlowConfig:
    """Time stepping and recording parameters for a particle run.

    diameter_margin is relative: the sphere run aborts once the support
    diameter exceeds (1 + diameter_margin) times its initial value, and the
    same inflated diameter feeds the analytic constants.  reference_point
    (default: first particle of the initial cloud) anchors the support-radius
    diagnostic.
    """

    dt: float
    t_final: float
    scheme: str = "geodesic-rk4"
    record_every: int = 1
    diameter_margin: float = 0.1
    reference_point: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")
        if self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.reference_point is not None:
            object.__setattr__(self, "reference_point", _as_vec(self.reference_point))


@dataclass(frozen=True)
class FrameDiagnostics:
    support_radius: float
    max_pairwise_distance: float
    velocity_sup_norm: float
    speeds: np.ndarray  # per-particle |v|, used by the CSV export

    def as_dict(self) -> dict:
        return {
            "support_radius": self.support_radius,
            "max_pairwise_distance": self.max_pairwise_distance,
            "velocity_sup_norm": self.velocity_sup_norm,
        }


@dataclass(frozen=True)
class TrajectoryRecord:
    """Recorded flow of a particle measure: one measure + diagnostics per time."""

    manifold: Manifold
    times: np.ndarray
    measures: list
    diagnostics: list

    @property
    def final(self) -> EmpiricalMeasure:
        return self.measures[-1]

    def __len__(self):
        return len(self.times)


def _step_sizes(config: FlowConfig) -> tuple[list[float], int]:
    """Full dt steps plus a possible shorter final step landing on t_final."""
    n_full = int(math.floor(config.t_final / config.dt + 1e-9))
    steps = [config.dt] * n_full
    rem = config.t_final - n_full * config.dt
    if rem > 1e-12 * max(1.0, config.t_final):
        steps.append(rem)
    return steps, n_full


def record_times(config: FlowConfig) -> np.ndarray:
    """The recorded time grid: t=0, every record_every-th step, and t_final."""
    steps, n_full = _step_sizes(config)
    times = [0.0]
    for k in range(1, len(steps) + 1):
        if k % config.record_every == 0 or k == len(steps):
            times.append(k * config.dt if k <= n_full else config.t_final)
    return np.asarray(times)


# -- velocity field ----------------------------------------------------------------

def velocity_at(m: Manifold, profile: PotentialProfile, rho: EmpiricalMeasure,
                X) -> np.ndarray:
    """Interaction velocity sum_j w_j 2 g'(d(x, y_j)^2) log_x(y_j) at each row of X."""
    X = np.atleast_2d(_as_vec(X))
    dist = m.distance_matrix(X, rho.points)
    logs = m.log_pairs(X, rho.points)
    coef = 2.0 * np.asarray(profile.g_prime(dist * dist), dtype=float) * rho.weights[None, :]
    return np.einsum("pn,pnd->pd", coef, logs)


def velocity(m: Manifold, profile: PotentialProfile, rho: EmpiricalMeasure,
             x) -> np.ndarray:
    """Velocity vector at a single point (zero self-contribution at particles)."""
    return velocity_at(m, profile, rho, _as_vec(x)[None, :])[0]


def _speeds(m: Manifold, X: np.ndarray, V: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(m.inner_rows(X, V, V), 0.0))


# -- integrators --------------------------------------------------------------------

def flow_step(m: Manifold, field, rho: EmpiricalMeasure, dt: float, scheme: str,
              t0: float = 0.0) -> EmpiricalMeasure:
    """One geodesic integrator step of every particle through field(X, t).

    geodesic-euler:  x_i <- exp_{x_i}(dt * field(x_i, t0));
    geodesic-rk4:    four stages, each stage velocity evaluated at the staged
    point and parallel-transported back to the base point before the
    weighted combination, then one exponential of the combined increment.
    """
    X = rho.points
    if scheme == "geodesic-euler":
        moved = m.exp_rows(X, dt * field(X, t0))
    elif scheme == "geodesic-rk4":
        k1 = field(X, t0)
        x2 = m.exp_rows(X, (0.5 * dt) * k1)
        k2 = m.transport_rows(x2, X, field(x2, t0 + 0.5 * dt))
        x3 = m.exp_rows(X, (0.5 * dt) * k2)
        k3 = m.transport_rows(x3, X, field(x3, t0 + 0.5 * dt))
        x4 = m.exp_rows(X, dt * k3)
        k4 = m.transport_rows(x4, X, field(x4, t0 + dt))
        moved = m.exp_rows(X, (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    else:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    return EmpiricalMeasure(moved, rho.weights)


def _integrate(m: Manifold, field, rho0: EmpiricalMeasure, config: FlowConfig,
               guard: float | None = None) -> TrajectoryRecord:
    """Shared stepping/recording loop; aborts on the sphere diameter guard if set."""
    ref = (config.reference_point if config.reference_point is not None
           else rho0.points[0].copy())
    steps, n_full = _step_sizes(config)

    def frame(t, meas):
        v = field(meas.points, t)
        sp = _speeds(m, meas.points, v)
        return FrameDiagnostics(
            support_radius=support_radius(m, meas, ref),
            max_pairwise_distance=support_diameter(m, meas),
            velocity_sup_norm=float(sp.max()) if sp.size else 0.0,
            speeds=sp,
        )

    cur = EmpiricalMeasure(rho0.points.copy(), rho0.weights)
    times = [0.0]
    measures = [cur]
    diags = [frame(0.0, cur)]
    t = 0.0
    for k, h in enumerate(steps, start=1):
        cur = flow_step(m, field, cur, h, config.scheme, t0=t)
        t = k * config.dt if k <= n_full else config.t_final
        if guard is not None and support_diameter(m, cur) > guard:
            raise DiameterViolation(
                f"support diameter exceeded {guard!r} at t = {t!r}"
            )
        if k % config.record_every == 0 or k == len(steps):
            times.append(t)
            measures.append(cur)
            diags.append(frame(t, cur))
    return TrajectoryRecord(manifold=m, times=np.asarray(times), measures=measures,
                            diagnostics=diags)


def initial_diameter_guard(m: Manifold, rho0: EmpiricalMeasure,
                           config: FlowConfig) -> float | None:
    """Sphere-only guard value; raises DiameterViolation if it already fails."""
    mu = m.curvature_upper
    if mu <= 0:
        return None
    guard = support_diameter(m, rho0) * (1.0 + config.diameter_margin)
    limit = math.pi / (2.0 * math.sqrt(mu))
    if guard >= limit:
        raise DiameterViolation(
            f"initial support diameter + margin = {guard!r} "
            f"must stay below pi/(2 sqrt(mu)) = {limit!r}"
        )
    return guard


def simulate(m: Manifold, profile: PotentialProfile, rho0: EmpiricalMeasure,
             config: FlowConfig) -> TrajectoryRecord:
    """Self-consistent evolution: the field at each step is the velocity of the
    current measure (and, for rk4, of each staged configuration)."""
    rho0.check_on(m)
    guard = initial_diameter_guard(m, rho0, config)
    w = rho0.weights

    def self_field(X, t):
        return velocity_at(m, profile, EmpiricalMeasure(X, w), X)

    return _integrate(m, self_field, rho0, config, guard=guard)


# -- Picard machinery -----------------------------------------------------------------

def constant_trajectory(m: Manifold, profile: PotentialProfile,
                        rho0: EmpiricalMeasure, config: FlowConfig) -> TrajectoryRecord:
    """The constant-in-time curve t |-> rho0 on the config's recorded grid."""
    times = record_times(config)
    v = velocity_at(m, profile, rho0, rho0.points)
    sp = _speeds(m, rho0.points, v)
    ref = (config.reference_point if config.reference_point is not None
           else rho0.points[0].copy())
    diag = FrameDiagnostics(
        support_radius=support_radius(m, rho0, ref),
        max_pairwise_distance=support_diameter(m, rho0),
        velocity_sup_norm=float(sp.max()) if sp.size else 0.0,
        speeds=sp,
    )
    return TrajectoryRecord(manifold=m, times=times,
                            measures=[rho0] * len(times),
                            diagnostics=[diag] * len(times))


def picard_map(m: Manifold, profile: PotentialProfile, rho0: EmpiricalMeasure,
               frozen: TrajectoryRecord, config: FlowConfig) -> TrajectoryRecord:
    """One application of the fixed-point map: push rho0 through the flow of the
    field induced by the frozen trajectory (nearest recorded time)."""
    expected = record_times(config)
    times = np.asarray(frozen.times, dtype=float)
    if times.shape != expected.shape or not np.allclose(times, expected, atol=1e-12):
        raise GridMismatch("frozen trajectory is not on the config time grid")
    if not np.allclose(frozen.measures[0].weights, rho0.weights, atol=1e-12):
        raise GridMismatch("frozen trajectory carries different weights than rho0")

    def field(X, t):
        idx = int(np.argmin(np.abs(times - t)))
        return velocity_at(m, profile, frozen.measures[idx], X)

    return _integrate(m, field, rho0, config, guard=None)


def contraction_factor(constants: PotentialConstants, t: float) -> float:
    """C(t) * Lambda with C(t) = (e^{Lbar t} - 1)/Lbar (t in the Lbar -> 0 limit)."""
    lbar = constants.Lbar
    c = t if abs(lbar) < 1e-14 else math.expm1(lbar * t) / lbar
    return c * constants.Lambda


def contraction_horizon(constants: PotentialConstants, target: float = 0.9) -> float:
    """Largest t with contraction_factor(constants, t) <= target."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    lbar = constants.Lbar
    if abs(lbar) < 1e-14:
        return target / constants.Lambda
    return math.log1p(target * lbar / constants.Lambda) / lbar


def picard_solve(m: Manifold, profile: PotentialProfile, rho0: EmpiricalMeasure,
                 config: FlowConfig, tol: float = 1e-8, max_iter: int = 50,
                 eps: float = math.pi / 2,
                 constants: PotentialConstants | None = None,
                 ) -> tuple[TrajectoryRecord, list[float]]:
    """Iterate the Picard map from the constant curve until successive iterates
    are closer than tol in the sup-in-time W1 metric.

    Raises NoContraction when C(t_final) * Lambda >= 1 for the constants at the
    measured (margin-inflated) initial support diameter.
    """
    rho0.check_on(m)
    if constants is None:
        delta = max(support_diameter(m, rho0) * (1.0 + config.diameter_margin), 1e-9)
        constants = profile_constants(profile, delta, m.curvature_lower,
                                      m.curvature_upper, eps=eps)
    factor = contraction_factor(constants, config.t_final)
    if factor >= 1.0:
        raise NoContraction(
            f"C(T) Lambda = {factor!r} >= 1 at T = {config.t_final}; shrink the horizon"
        )
    frozen = constant_trajectory(m, profile, rho0, config)
    dists: list[float] = []
    for _ in range(max_iter):
        nxt = picard_map(m, profile, rho0, frozen, config)
        d = w1_sup(m, frozen, nxt)
        dists.append(d)
        frozen = nxt
        if d < tol:
            return frozen, dists
    raise MaxIterExceeded(
        f"no fixed point after {max_iter} iterations; last gap {dists[-1]!r}"
    )


# -- two-body reference oracle ----------------------------------------------------------

def two_body_exact(profile: PotentialProfile, d0: float, t: float) -> float:
    """Separation of two equal masses at time t: d' = -2 g'(d^2) d along the
    connecting geodesic.  Quadratic g solves to d0 e^{-t}; otherwise a
    high-accuracy adaptive integration."""
    if t == 0.0:
        return float(d0)
    if profile.name == "quadratic":
        return float(d0) * math.exp(-t)
    sol = solve_ivp(
        lambda _, y: -2.0 * np.asarray(profile.g_prime(y * y)) * y,
        (0.0, t), [float(d0)], method="DOP853", rtol=1e-10, atol=1e-13,
        t_eval=[t],
    )
    if not sol.success:  # pragma: no cover - defensive
        raise RuntimeError(f"two-body integration failed: {sol.message}")
    return float(sol.y[0, -1])


def geodesic_pair(m: Manifold, d0: float, center=None, direction=None) -> EmpiricalMeasure:
    """Two equal-weight particles at distance d0, symmetric about center."""
    c = m.base_point if center is None else m.check_point(center)
    e = m.tangent_basis(c)[0] if direction is None else m.check_tangent(c, direction)
    half = 0.5 * d0
    return EmpiricalMeasure.uniform([m.exp(c, -half * e), m.exp(c, half * e)])


# -- export -------------------------------------------------------------------------------

def trajectory_to_jsonl(traj: TrajectoryRecord, path) -> None:
    """One record per recorded time: {t, points, weights, diagnostics}."""
    with open(path, "w") as fh:
        for t, meas, diag in zip(traj.times, traj.measures, traj.diagnostics):
            rec = {
                "t": float(t),
                "points": meas.points.tolist(),
                "weights": meas.weights.tolist(),
                "diagnostics": diag.as_dict(),
            }
            fh.write(json.dumps(rec) + "\n")


def trajectory_to_csv(traj: TrajectoryRecord, path) -> None:
    """Rows (t, particle_id, coords..., speed), 17 significant digits."""
    dim = traj.measures[0].points.shape[1]
    with open(path, "w") as fh:
        cols = ["t", "particle_id"] + [f"x{i}" for i in range(dim)] + ["speed"]
        fh.write(",".join(cols) + "\n")
        for t, meas, diag in zip(traj.times, traj.measures, traj.diagnostics):
            for i, p in enumerate(meas.points):
                coords = ",".join(repr(float(c)) for c in p)
                fh.write(f"{float(t)!r},{i},{coords},{float(diag.speeds[i])!r}\n")
