"""Empirical probability measures, push-forward, and exact intrinsic W1.

The 1-Wasserstein solve is exact at desk scale: a shortest-augmenting-path
assignment (scipy ``linear_sum_assignment``) when both sides are uniform with
equal cardinality, and the dense transport LP solved by HiGHS otherwise.  A
brute-force permutation oracle is kept alongside as the independent route for
small equal-weight instances.
"""
from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment, linprog

from .errors import GridMismatch
from .geometry import Manifold, _as_vec

WEIGHT_TOL = 1e-12
MARGINAL_TOL = 1e-9


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted particle cloud; weights are positive and sum to one.

    Treated as immutable: push-forward and flow steps build new measures and
    share the weight vector.
    """

    points: np.ndarray   # (N, d)
    weights: np.ndarray  # (N,)

    def __post_init__(self):
        pts = np.atleast_2d(_as_vec(self.points))
        w = np.atleast_1d(_as_vec(self.weights))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("measure needs at least one particle")
        if w.shape != (pts.shape[0],):
            raise ValueError("weights must match the number of particles")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(float(w.sum()) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {float(w.sum())!r}, not 1")

    @classmethod
    def uniform(cls, points) -> "EmpiricalMeasure":
        pts = np.atleast_2d(_as_vec(points))
        n = pts.shape[0]
        return cls(pts, np.full(n, 1.0 / n))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def check_on(self, m: Manifold) -> "EmpiricalMeasure":
        for p in self.points:
            m.check_point(p)
        return self

    def is_uniform(self) -> bool:
        return bool(np.allclose(self.weights, 1.0 / self.n, rtol=0.0, atol=WEIGHT_TOL))


@dataclass(frozen=True)
class CouplingPlan:
    """Sparse transport plan: (source index, target index, mass) plus its cost."""

    entries: list = field(default_factory=list)  # [(i, j, mass), ...]
    cost: float = 0.0

    def marginals(self, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
        row = np.zeros(n)
        col = np.zeros(m)
        for i, j, mass in self.entries:
            row[i] += mass
            col[j] += mass
        return row, col

    def check_feasible(self, rho: EmpiricalMeasure, sigma: EmpiricalMeasure,
                       tol: float = MARGINAL_TOL) -> float:
        """Max marginal violation; raises if beyond tol."""
        row, col = self.marginals(rho.n, sigma.n)
        worst = max(float(np.max(np.abs(row - rho.weights))),
                    float(np.max(np.abs(col - sigma.weights))))
        if worst > tol:
            raise ValueError(f"coupling marginals off by {worst!r}")
        return worst


def push_forward(rho: EmpiricalMeasure, psi) -> EmpiricalMeasure:
    """Push the cloud through a point map; weights are untouched (mass transport)."""
    moved = np.vstack([_as_vec(psi(p)) for p in rho.points])
    return EmpiricalMeasure(moved, rho.weights)


def support_radius(m: Manifold, rho: EmpiricalMeasure, p) -> float:
    """max_i d(p, x_i)."""
    p = _as_vec(p)
    return float(np.max(m.distance_matrix(p[None, :], rho.points)))


def support_diameter(m: Manifold, rho: EmpiricalMeasure) -> float:
    """max_{ij} d(x_i, x_j)."""
    if rho.n == 1:
        return 0.0
    return float(np.max(m.distance_matrix(rho.points, rho.points)))


# -- exact W1 -------------------------------------------------------------------

def _assignment_plan(cost: np.ndarray, w: float) -> CouplingPlan:
    rows, cols = linear_sum_assignment(cost)
    entries = [(int(i), int(j), w) for i, j in zip(rows, cols)]
    total = float(np.sum(cost[rows, cols]) * w)
    return CouplingPlan(entries=entries, cost=total)


def _lp_plan(cost: np.ndarray, wr: np.ndarray, wc: np.ndarray) -> CouplingPlan:
    n, m = cost.shape
    # marginal constraints: row sums = wr, column sums = wc
    a_rows = sp.kron(sp.eye(n, format="csr"), np.ones((1, m)), format="csr")
    a_cols = sp.kron(np.ones((1, n)), sp.eye(m, format="csr"), format="csr")
    a_eq = sp.vstack([a_rows, a_cols], format="csr")
    b_eq = np.concatenate([wr, wc])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:  # pragma: no cover - defensive
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = res.x.reshape(n, m)
    entries = [(int(i), int(j), float(plan[i, j]))
               for i, j in zip(*np.nonzero(plan > 1e-15))]
    total = float(sum(mass * cost[i, j] for i, j, mass in entries))
    return CouplingPlan(entries=entries, cost=total)


def w1_distance(m: Manifold, rho: EmpiricalMeasure,
                sigma: EmpiricalMeasure) -> tuple[float, CouplingPlan]:
    """Exact intrinsic 1-Wasserstein distance with an optimal coupling.

    The cost matrix is assembled once per call (no caching across calls).
    """
    cost = m.distance_matrix(rho.points, sigma.points)
    if rho.n == sigma.n and rho.is_uniform() and sigma.is_uniform():
        plan = _assignment_plan(cost, 1.0 / rho.n)
    else:
        plan = _lp_plan(cost, rho.weights, sigma.weights)
    return plan.cost, plan


def w1_bruteforce(m: Manifold, rho: EmpiricalMeasure, sigma: EmpiricalMeasure,
                  max_n: int = 8) -> float:
    """Permutation oracle: exhaustive minimum over all N! couplings.

    Only valid for equal-cardinality uniform measures; independent of the
    solver route in w1_distance.
    """
    if rho.n != sigma.n or not (rho.is_uniform() and sigma.is_uniform()):
        raise ValueError("permutation oracle requires equal-size uniform measures")
    if rho.n > max_n:
        raise ValueError(f"N = {rho.n} too large for exhaustive enumeration")
    cost = m.distance_matrix(rho.points, sigma.points)
    perms = np.array(list(itertools.permutations(range(rho.n))))
    totals = cost[np.arange(rho.n)[None, :], perms].sum(axis=1)
    return float(totals.min() / rho.n)


def w1_sup(m: Manifold, traj_a, traj_b) -> float:
    """sup over the shared time grid of W1(rho_t, sigma_t).

    Accepts any objects exposing .times and .measures (e.g. TrajectoryRecord).
    """
    ta, tb = np.asarray(traj_a.times, dtype=float), np.asarray(traj_b.times, dtype=float)
    if ta.shape != tb.shape or not np.allclose(ta, tb, rtol=0.0, atol=1e-12):
        raise GridMismatch("trajectories do not share a time grid")
    return max(
        w1_distance(m, ra, rb)[0]
        for ra, rb in zip(traj_a.measures, traj_b.measures)
    )


# -- serialization ----------------------------------------------------------------

def measure_to_json(rho: EmpiricalMeasure) -> dict:
    return {"points": rho.points.tolist(), "weights": rho.weights.tolist()}


def measure_from_json(data: dict) -> EmpiricalMeasure:
    return EmpiricalMeasure(np.asarray(data["points"], dtype=float),
                            np.asarray(data["weights"], dtype=float))


def save_measure(rho: EmpiricalMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_json(rho), fh)


def load_measure(path) -> EmpiricalMeasure:
    with open(path) as fh:
        return measure_from_json(json.load(fh))


def coupling_to_csv(plan: CouplingPlan, m: Manifold, rho: EmpiricalMeasure,
                    sigma: EmpiricalMeasure, path) -> None:
    """Rows (i, j, mass, distance), 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "mass", "distance"])
        for i, j, mass in plan.entries:
            d = m.distance(rho.points[i], sigma.points[j])
            writer.writerow([i, j, repr(mass), repr(d)])
