"""Numerical certification of the analytic estimates, one report per check.

Margins are signed distances to the asserted bound (negative = violation), and
a report passes iff its worst margin is above -tolerance.  Analytic identities
sampled pointwise carry a pure round-off tolerance (1e-9); inequalities that
involve integrated trajectories carry slack proportional to dt, because the
estimates hold for the exact flow, not its discretization.  Sampling domains
always stay inside the convexity radius so minimizing geodesics are unique.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    FlowConfig,
    contraction_factor,
    picard_solve,
    simulate,
)
from .errors import DiameterTooLarge, NotAttractive
from .geometry import Manifold, _as_vec
from .measures import EmpiricalMeasure, support_diameter, w1_distance, w1_sup
from .potentials import (
    PotentialConstants,
    PotentialProfile,
    hessian_bound_L,
    log_lipschitz_ell,
    profile_constants,
)


@dataclass
class CheckReport:
    """Outcome of one certification check; passed <=> worst_margin >= -tolerance."""

    check_name: str
    samples: int
    worst_margin: float
    worst_case: dict
    passed: bool
    seed: int
    tolerance: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable({
            "check_name": self.check_name,
            "samples": self.samples,
            "worst_margin": self.worst_margin,
            "worst_case": self.worst_case,
            "passed": self.passed,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "details": self.details,
        })

    def summary_line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.check_name}: worst margin {self.worst_margin:.3e} "
                f"(tol {self.tolerance:.1e}, samples {self.samples}, seed {self.seed})")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


class _Worst:
    """Track the smallest margin and the inputs that produced it."""

    def __init__(self):
        self.margin = math.inf
        self.case: dict = {}
        self.count = 0

    def update(self, margin: float, **case):
        self.count += 1
        if margin < self.margin:
            self.margin = float(margin)
            self.case = case


def _rescale(margin: float, part_tol: float, report_tol: float) -> float:
    """Affine map sending -part_tol to -report_tol and 0 to 0, so one report
    tolerance can govern sub-checks with different tolerances."""
    if part_tol <= 0:
        return margin if margin >= 0 else -2.0 * report_tol
    return (margin + part_tol) * (report_tol / part_tol) - report_tol


def _finish(name: str, worst: _Worst, tol: float, seed: int,
            details: dict | None = None) -> CheckReport:
    margin = worst.margin if worst.count else 0.0
    return CheckReport(
        check_name=name,
        samples=worst.count,
        worst_margin=margin,
        worst_case=worst.case,
        passed=bool(margin >= -tol),
        seed=seed,
        tolerance=tol,
        details=details or {},
    )


def _default_ball_radius(m: Manifold) -> float:
    return min(1.0, m.convexity_radius / 2.0)


def gronwall_envelope(L: float, t: float) -> float:
    """(e^{Lt} - 1)/L, continued by t at L = 0."""
    return t if abs(L) < 1e-14 else math.expm1(L * t) / L


# -- geometry identity checks ------------------------------------------------------

def check_transport_identities(m: Manifold, samples: int = 1000, seed: int = 0,
                               ball_radius: float | None = None,
                               tol: float = 1e-9) -> CheckReport:
    """Transport isometry, two-sided inverse, the parallel-log identity, and the
    exp/log round trip, on seeded samples in a convexity-safe ball."""
    rng = np.random.default_rng(seed)
    radius = _default_ball_radius(m) if ball_radius is None else ball_radius
    center = m.base_point
    worst = _Worst()
    for _ in range(samples):
        x, y = m.ball_points(rng, center, radius, 2)
        v = m.random_tangent(rng, x, norm=rng.uniform(0.1, 1.0))
        moved = m.transport(x, y, v)
        back = m.transport(y, x, moved)
        iso = -abs(m.norm(y, moved) - m.norm(x, v))
        inv = -m.norm(x, back - v)
        plog = -m.norm(x, m.transport(y, x, m.log(y, x)) + m.log(x, y))
        u = m.random_tangent(
            rng, x, norm=rng.uniform(0.0, min(1.0, m.injectivity_radius / 2.0)))
        rt = -m.norm(x, m.log(x, m.exp(x, u)) - u)
        for part, margin in (("isometry", iso), ("inverse", inv),
                             ("parallel-log", plog), ("round-trip", rt)):
            worst.update(margin, part=part, x=x, y=y, v=v)
    return _finish("transport_identities", worst, tol, seed,
                   details={"manifold": m.kind, "ball_radius": radius})


def _cot_factor(s: float) -> float:
    return 1.0 if s < 1e-8 else s / math.tan(s)


def _coth_factor(s: float) -> float:
    return 1.0 if s < 1e-8 else s / math.tanh(s)


def hessian_comparison_bounds(m: Manifold, d: float, vv: float) -> tuple[float, float]:
    """Two-sided comparison bounds for <Hess_v d^2_z, v> at distance d, |v|^2 = vv."""
    lower = 2.0 * _cot_factor(math.sqrt(m.curvature_upper) * d) * vv \
        if m.curvature_upper > 0 else 2.0 * vv
    upper = 2.0 * _coth_factor(math.sqrt(-m.curvature_lower) * d) * vv \
        if m.curvature_lower < 0 else 2.0 * vv
    return lower, upper


def check_hessian_bounds(m: Manifold, samples: int = 500, delta: float | None = None,
                         seed: int = 0, fd_tol: float = 1e-3, lip_tol: float = 1e-6,
                         overrides: dict | None = None) -> CheckReport:
    """Two-sided Hessian comparison bound for d^2_z plus its Lipschitz consequence
    |log_x z - Pi_{yx} log_y z| <= (L/2) d(x,y).

    The quadratic form is checked at the finite-difference floor fd_tol; the
    log-Lipschitz consequence at lip_tol, rescaled into the report tolerance.
    """
    mu = m.curvature_upper
    if delta is None:
        delta = math.pi / 3.0 if mu > 0 else 2.0
    if mu > 0 and delta >= math.pi / (2.0 * math.sqrt(mu)):
        raise DiameterTooLarge(f"delta = {delta} violates the positive-curvature guard")
    L = hessian_bound_L(delta, m.curvature_lower)
    if overrides and "L" in overrides:
        L = float(overrides["L"])
    rng = np.random.default_rng(seed)
    center = m.base_point
    quad = _Worst()
    lip = _Worst()
    for _ in range(samples):
        x, z = m.ball_points(rng, center, delta / 2.0, 2)
        v = m.random_tangent(rng, x, norm=rng.uniform(0.3, 1.0))
        qf = m.hessian_d2_quadform(x, z, v)
        d = m.distance(x, z)
        vv = m.inner(x, v, v)
        lower, upper = hessian_comparison_bounds(m, d, vv)
        quad.update(qf - lower, part="lower", x=x, z=z, v=v, d=d)
        quad.update(upper - qf, part="upper", x=x, z=z, v=v, d=d)

        x2, y2, z2 = m.ball_points(rng, center, delta / 2.0, 3)
        diff = m.log(x2, z2) - m.transport(y2, x2, m.log(y2, z2))
        lip.update(0.5 * L * m.distance(x2, y2) - m.norm(x2, diff),
                   part="log-lipschitz-base", x=x2, y=y2, z=z2)

    worst = _Worst()
    worst.count = quad.count + lip.count
    if quad.margin <= _rescale(lip.margin, lip_tol, fd_tol):
        worst.margin, worst.case = quad.margin, quad.case
    else:
        worst.margin, worst.case = _rescale(lip.margin, lip_tol, fd_tol), lip.case
    return _finish("hessian_bounds", worst, fd_tol, seed, details={
        "manifold": m.kind, "delta": delta, "L": L,
        "worst_quadform_margin": quad.margin,
        "worst_log_lipschitz_margin": lip.margin,
        "log_lipschitz_tolerance": lip_tol,
    })


def check_log_lipschitz_second_arg(m: Manifold, samples: int = 500,
                                   delta: float | None = None,
                                   eps: float = math.pi / 2, seed: int = 0,
                                   tol: float = 1e-9,
                                   overrides: dict | None = None) -> CheckReport:
    """|log_x z - log_x y| <= ell d(y, z) with ell = (pi-eps)/sin(pi-eps) when
    curvature is positive and ell = 1 otherwise."""
    mu = m.curvature_upper
    if mu > 0:
        cap = (math.pi - eps) / math.sqrt(mu)
        if delta is None:
            delta = cap
        if delta > cap:
            raise DiameterTooLarge(f"delta = {delta} > (pi - eps)/sqrt(mu) = {cap}")
    elif delta is None:
        delta = 2.0
    ell = log_lipschitz_ell(mu, eps)
    if overrides and "ell" in overrides:
        ell = float(overrides["ell"])
    rng = np.random.default_rng(seed)
    center = m.base_point
    worst = _Worst()
    for _ in range(samples):
        x, y, z = m.ball_points(rng, center, delta / 2.0, 3)
        margin = ell * m.distance(y, z) - m.norm(x, m.log(x, z) - m.log(x, y))
        worst.update(margin, x=x, y=y, z=z)
    return _finish("log_lipschitz_second_arg", worst, tol, seed,
                   details={"manifold": m.kind, "delta": delta, "eps": eps, "ell": ell})


# -- flow-map and trajectory checks ---------------------------------------------------

def check_gronwall_flow_bound(m: Manifold, field_x, field_y, start_points, T: float,
                              dt: float, lip_const: float, seed: int = 0,
                              tol: float = 1e-9) -> CheckReport:
    """Flow-map stability: d(Psi_X^t(x), Psi_Y^t(x)) <= (e^{Lt}-1)/L |X-Y|_inf,
    with slack (1 + 5 dt) for the Euler discretization.

    |X - Y|_inf is measured along the visited points of both flows (for the
    transported-perturbation pairs used by the CLI this is exact).
    """
    start = np.atleast_2d(_as_vec(start_points))
    n_steps = max(1, int(round(T / dt)))
    xs, ys = start.copy(), start.copy()
    sup_diff = 0.0
    snapshots = []  # (t, per-start distances)
    t = 0.0
    for k in range(n_steps):
        for pts in (xs, ys):
            gap = field_x(pts, t) - field_y(pts, t)
            sup_diff = max(sup_diff, float(np.max(_speeds_sq(m, pts, gap)) ** 0.5))
        xs = m.exp_rows(xs, dt * field_x(xs, t))
        ys = m.exp_rows(ys, dt * field_y(ys, t))
        t = (k + 1) * dt
        snapshots.append((t, m.distance_rows(xs, ys)))
    slack = 1.0 + 5.0 * dt
    worst = _Worst()
    for t, dists in snapshots:
        bound = gronwall_envelope(lip_const, t) * sup_diff * slack
        for i, dist in enumerate(dists):
            worst.update(bound - dist, t=t, start_index=i, distance=dist, bound=bound)
    return _finish("gronwall_flow_bound", worst, tol, seed, details={
        "manifold": m.kind, "L": lip_const, "sup_field_diff": sup_diff,
        "T": T, "dt": dt, "starts": start.shape[0],
    })


def _speeds_sq(m: Manifold, X, V):
    return np.maximum(m.inner_rows(X, V, V), 0.0)


def _constants_for(m: Manifold, profile: PotentialProfile, delta: float,
                   eps: float, overrides: dict | None) -> PotentialConstants:
    consts = profile_constants(profile, max(delta, 1e-9), m.curvature_lower,
                               m.curvature_upper, eps=eps)
    if overrides:
        known = {f.name for f in dataclasses.fields(PotentialConstants)}
        bad = set(overrides) - known
        if bad:
            raise ValueError(f"unknown constant overrides: {sorted(bad)}")
        consts = dataclasses.replace(consts, **{k: float(v) for k, v in overrides.items()})
    return consts


def check_stability(m: Manifold, profile: PotentialProfile, rho0: EmpiricalMeasure,
                    sigma0: EmpiricalMeasure, config: FlowConfig,
                    eps: float = math.pi / 2, seed: int = 0, tol: float = 1e-9,
                    overrides: dict | None = None) -> CheckReport:
    """W1(rho_t, sigma_t) <= e^{(Lbar + Lambda) t} W1(rho_0, sigma_0), slack (1+10 dt)."""
    union = EmpiricalMeasure.uniform(np.vstack([rho0.points, sigma0.points]))
    delta = support_diameter(m, union) * (1.0 + config.diameter_margin)
    consts = _constants_for(m, profile, delta, eps, overrides)
    rate = consts.Lbar + consts.Lambda
    traj_r = simulate(m, profile, rho0, config)
    traj_s = simulate(m, profile, sigma0, config)
    w0 = w1_distance(m, rho0, sigma0)[0]
    slack = 1.0 + 10.0 * config.dt
    worst = _Worst()
    tightest = 0.0
    for t, mr, ms in zip(traj_r.times, traj_r.measures, traj_s.measures):
        wt = w1_distance(m, mr, ms)[0]
        bound = math.exp(rate * t) * w0
        worst.update(bound * slack - wt, t=t, w1=wt, bound=bound)
        if bound > 0:
            tightest = max(tightest, wt / bound)
    return _finish("stability", worst, tol, seed, details={
        "manifold": m.kind, "rate": rate, "w1_initial": w0,
        "tightest_ratio": tightest, "Lbar": consts.Lbar, "Lambda": consts.Lambda,
        "delta": consts.delta,
    })


def check_contraction(m: Manifold, profile: PotentialProfile, rho0: EmpiricalMeasure,
                      config: FlowConfig, fp_tol: float = 1e-8, max_iter: int = 60,
                      eps: float = math.pi / 2, seed: int = 0, tol: float = 1e-9,
                      overrides: dict | None = None,
                      compare_direct: bool = True) -> CheckReport:
    """Successive Picard iterates contract with ratio <= C(T) Lambda (1 + 10 dt),
    and the fixed point agrees with the self-consistent run within 10 fp_tol."""
    delta = support_diameter(m, rho0) * (1.0 + config.diameter_margin)
    consts = _constants_for(m, profile, delta, eps, overrides)
    factor = contraction_factor(consts, config.t_final)
    fixed, dists = picard_solve(m, profile, rho0, config, tol=fp_tol,
                                max_iter=max_iter, constants=consts)
    bound = factor * (1.0 + 10.0 * config.dt)
    worst = _Worst()
    ratios = []
    for k in range(1, len(dists)):
        if dists[k - 1] <= 0.0:
            continue
        r = dists[k] / dists[k - 1]
        ratios.append(r)
        worst.update(bound - r, iteration=k, ratio=r, bound=bound)
    if not ratios:
        worst.update(bound, note="converged without a second iterate")
    details = {
        "manifold": m.kind, "factor": factor, "iterations": len(dists),
        "iterate_distances": dists, "Lbar": consts.Lbar, "Lambda": consts.Lambda,
    }
    if len(ratios) >= 2:
        # geometric-decay fit: slope of log distances
        pos = [d for d in dists if d > 0]
        ks = np.arange(len(pos))
        details["fitted_ratio"] = float(np.exp(np.polyfit(ks, np.log(pos), 1)[0]))
    if compare_direct:
        direct = simulate(m, profile, rho0, config)
        gap = w1_sup(m, fixed, direct)
        details["w1_vs_direct"] = gap
        worst.update(10.0 * fp_tol - gap, part="fixed-point-vs-direct", gap=gap)
    return _finish("contraction", worst, tol, seed, details=details)


def check_support_containment(m: Manifold, profile: PotentialProfile,
                              rho0: EmpiricalMeasure, config: FlowConfig,
                              seed: int = 0, tol: float = 1e-9,
                              pair_step_tol: float = 1e-6) -> CheckReport:
    """Attractive runs stay in the initial support ball: support_radius(rho_t, p)
    <= support_radius(rho_0, p) + 10 dt sup|v|; for two particles the pairwise
    distance is also nonincreasing (per-step tolerance pair_step_tol)."""
    if not profile.is_attractive:
        raise NotAttractive(f"profile {profile.name!r} is not attractive")
    traj = simulate(m, profile, rho0, config)
    r0 = traj.diagnostics[0].support_radius
    vmax = max(d.velocity_sup_norm for d in traj.diagnostics)
    allowance = r0 + 10.0 * config.dt * vmax
    worst = _Worst()
    for t, diag in zip(traj.times, traj.diagnostics):
        worst.update(allowance - diag.support_radius, part="radius", t=t,
                     radius=diag.support_radius)
    if rho0.n == 2:
        gaps = [d.max_pairwise_distance for d in traj.diagnostics]
        for k in range(1, len(gaps)):
            margin = _rescale(gaps[k - 1] - gaps[k], pair_step_tol, tol)
            worst.update(margin, part="pair-monotone", t=traj.times[k],
                         d_prev=gaps[k - 1], d_next=gaps[k])
    return _finish("support_containment", worst, tol, seed, details={
        "manifold": m.kind, "initial_radius": r0, "velocity_sup": vmax,
        "allowance": allowance, "final_radius": traj.diagnostics[-1].support_radius,
    })


def write_report(report: CheckReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")


# -- standard check inputs (shared by the CLI runner and the test suites) ----------------

def sampling_ball_radius(m: Manifold) -> float:
    """Cloud radius keeping margin-inflated diameters inside every guard."""
    return min(0.5, m.convexity_radius / 8.0)


def standard_cloud(m: Manifold, seed: int, n: int = 50,
                   radius: float | None = None) -> EmpiricalMeasure:
    rng = np.random.default_rng(seed)
    r = sampling_ball_radius(m) if radius is None else radius
    return EmpiricalMeasure.uniform(m.ball_points(rng, m.base_point, r, n))


def perturbed_copy(m: Manifold, rho: EmpiricalMeasure, seed: int,
                   size: float = 0.01) -> EmpiricalMeasure:
    """Move every particle by `size` along a random tangent direction."""
    rng = np.random.default_rng(seed)
    moved = np.vstack([
        m.exp(p, m.random_tangent(rng, p, norm=size)) for p in rho.points
    ])
    return EmpiricalMeasure(moved, rho.weights)


def standard_gronwall_inputs(m: Manifold, profile: PotentialProfile, seed: int,
                             n_frozen: int = 5, n_starts: int = 10,
                             T: float = 0.25, dt: float = 0.005,
                             perturbation: float = 0.01, eps: float = math.pi / 2):
    """A provably Lipschitz frozen-measure field, the same field plus a
    parallel-transported constant perturbation, seeded start points, and the
    field's Lipschitz constant over the region the flows can visit.

    Returns (field_x, field_y, starts, T, dt, lip_const).
    """
    from .dynamics import velocity_at  # local import to avoid a cycle

    rng = np.random.default_rng(seed)
    center = m.base_point
    r = sampling_ball_radius(m) / 2.0
    frozen = EmpiricalMeasure.uniform(m.ball_points(rng, center, r, n_frozen))
    starts = m.ball_points(rng, center, r, n_starts)
    # region radius: start ball + horizon * velocity bound, iterated to closure,
    # then inflated so the Lipschitz constant covers everything the flows visit
    reach = r
    for _ in range(6):
        c_gp = profile_constants(profile, 2.0 * reach, m.curvature_lower,
                                 m.curvature_upper, eps=eps).c_gprime
        vmax = 2.0 * c_gp * 2.0 * reach + perturbation
        reach = r + T * vmax + 0.05
    consts = profile_constants(profile, 2.2 * reach, m.curvature_lower,
                               m.curvature_upper, eps=eps)
    w = m.random_tangent(rng, center, norm=perturbation)

    def field_x(X, t):
        return velocity_at(m, profile, frozen, X)

    def field_y(X, t):
        n_pts = X.shape[0]
        shift = m.transport_rows(np.tile(center, (n_pts, 1)), X, np.tile(w, (n_pts, 1)))
        return field_x(X, t) + shift

    return field_x, field_y, starts, T, dt, consts.Lbar
