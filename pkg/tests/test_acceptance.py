"""Acceptance suite: every criterion at its stated tolerance and runtime budget.

Run with `pytest tests/test_acceptance.py -v -s` to see one line per criterion.
"""
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from manifold_agg.dynamics import (
    FlowConfig,
    geodesic_pair,
    picard_solve,
    simulate,
    two_body_exact,
)
from manifold_agg.geometry import Euclidean, Hyperbolic, Sphere
from manifold_agg.measures import (
    EmpiricalMeasure,
    w1_bruteforce,
    w1_distance,
    w1_sup,
)
from manifold_agg.potentials import bounded_attractive, check_kglob, quadratic
from manifold_agg.verify import (
    check_gronwall_flow_bound,
    check_hessian_bounds,
    check_log_lipschitz_second_arg,
    check_stability,
    check_support_containment,
    check_transport_identities,
    hessian_comparison_bounds,
    perturbed_copy,
    standard_cloud,
    standard_gronwall_inputs,
)

MANIFOLDS = (Euclidean(2), Sphere(), Hyperbolic())


@contextmanager
def criterion(number, name, budget_s):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:02d} {name}: FAIL")
        raise
    elapsed = time.perf_counter() - start
    print(f"ACCEPTANCE {number:02d} {name}: PASS ({elapsed:.1f} s, budget {budget_s} s)")
    assert elapsed < budget_s, f"runtime {elapsed:.1f} s exceeds budget {budget_s} s"


def test_c01_transport_identities_and_roundtrip():
    with criterion(1, "geometry round-trip and transport identities", 5.0):
        for m in MANIFOLDS:
            rep = check_transport_identities(m, samples=1000, seed=101)
            assert rep.passed, rep.summary_line()
            assert rep.worst_margin >= -1e-9


def test_c02_hessian_comparison():
    with criterion(2, "Hessian comparison bounds", 10.0):
        for m in MANIFOLDS:
            rep = check_hessian_bounds(m, samples=500, seed=202)
            assert rep.details["worst_quadform_margin"] >= -1e-3, rep.summary_line()
        # equality cases on the constant-curvature spaces, v orthogonal
        sph, hyp = Sphere(), Hyperbolic()
        for d in (math.pi / 6, math.pi / 4, math.pi / 3):
            x = sph.base_point
            b1, b2 = sph.tangent_basis(x)
            qf = sph.hessian_d2_quadform(x, sph.exp(x, d * b1), b2)
            lower, _ = hessian_comparison_bounds(sph, d, 1.0)
            assert abs(qf - lower) <= 1e-3
        for d in (0.5, 1.0, 2.0):
            x = hyp.base_point
            b1, b2 = hyp.tangent_basis(x)
            qf = hyp.hessian_d2_quadform(x, hyp.exp(x, d * b1), b2)
            _, upper = hessian_comparison_bounds(hyp, d, 1.0)
            assert abs(qf - upper) <= 1e-3


def test_c03_log_lipschitz_in_base_point():
    with criterion(3, "log-Lipschitz in the base point", 10.0):
        from manifold_agg.potentials import hessian_bound_L
        for m in MANIFOLDS:
            rep = check_hessian_bounds(m, samples=500, seed=303)
            assert rep.details["worst_log_lipschitz_margin"] >= -1e-6, (
                rep.summary_line())
            delta = rep.details["delta"]
            if m.kind == "hyperbolic":
                assert rep.details["L"] == pytest.approx(
                    2.0 * delta / math.tanh(delta), abs=1e-12)
            else:
                assert rep.details["L"] == 2.0
            assert rep.details["L"] == pytest.approx(
                hessian_bound_L(delta, m.curvature_lower), abs=1e-12)


def test_c04_log_lipschitz_in_second_argument():
    with criterion(4, "log-Lipschitz in the second argument", 10.0):
        for m in MANIFOLDS:
            rep = check_log_lipschitz_second_arg(m, samples=500, eps=math.pi / 2,
                                                 seed=404)
            assert rep.passed, rep.summary_line()
            assert rep.worst_margin >= -1e-9
            expected_ell = math.pi / 2 if m.curvature_upper > 0 else 1.0
            assert rep.details["ell"] == pytest.approx(expected_ell, abs=1e-15)


def test_c05_two_body_oracle_and_order():
    with criterion(5, "two-body oracle and integrator orders", 30.0):
        target = two_body_exact(quadratic(), 1.0, 1.0)
        assert target == pytest.approx(math.exp(-1.0), rel=1e-14)
        cfg = FlowConfig(dt=1e-3, t_final=1.0, scheme="geodesic-rk4",
                         record_every=10 ** 9)
        for m in MANIFOLDS:
            traj = simulate(m, quadratic(), geodesic_pair(m, 1.0), cfg)
            d1 = m.distance(traj.final.points[0], traj.final.points[1])
            assert abs(d1 - target) <= 1e-6, m.kind
        e2 = Euclidean(2)
        errs = {}
        for scheme in ("geodesic-euler", "geodesic-rk4"):
            errs[scheme] = []
            for dt in (0.1, 0.05, 0.025):
                c = FlowConfig(dt=dt, t_final=1.0, scheme=scheme, record_every=10 ** 9)
                traj = simulate(e2, quadratic(), geodesic_pair(e2, 1.0), c)
                d1 = e2.distance(traj.final.points[0], traj.final.points[1])
                errs[scheme].append(abs(d1 - target))
        for a, b in zip(errs["geodesic-euler"], errs["geodesic-euler"][1:]):
            assert 2.0 - 0.3 <= a / b <= 2.0 + 0.3
        for a, b in zip(errs["geodesic-rk4"], errs["geodesic-rk4"][1:]):
            assert 16.0 - 5.0 <= a / b <= 16.0 + 5.0


def test_c06_gronwall_flow_bound():
    with criterion(6, "Gronwall flow-map bound", 20.0):
        for m in MANIFOLDS:
            for seed in (0, 1, 2):
                fx, fy, starts, T, dt, lip = standard_gronwall_inputs(
                    m, quadratic(), seed=600 + seed)
                rep = check_gronwall_flow_bound(m, fx, fy, starts, T, dt, lip,
                                                seed=600 + seed)
                assert rep.passed, (m.kind, seed, rep.summary_line())


def test_c07_picard_contraction():
    with criterion(7, "Picard contraction and fixed-point consistency", 60.0):
        e2 = Euclidean(2)
        tol = 1e-8
        cfg = FlowConfig(dt=1e-3, t_final=0.5, scheme="geodesic-euler")
        rho0 = geodesic_pair(e2, 1.0)
        fixed, dists = picard_solve(e2, quadratic(), rho0, cfg, tol=tol, max_iter=60)
        bound = (math.exp(0.5) - 1.0) * (1.0 + 10.0 * cfg.dt)
        for prev, nxt in zip(dists, dists[1:]):
            if prev > 0:
                assert nxt / prev <= bound
        direct = simulate(e2, quadratic(), rho0, cfg)
        assert w1_sup(e2, fixed, direct) <= 10.0 * tol


def test_c08_stability_bound():
    with criterion(8, "stability in W1", 120.0):
        cfg = FlowConfig(dt=0.01, t_final=2.0, record_every=20)
        for m in MANIFOLDS:
            for k in range(5):
                rho0 = standard_cloud(m, seed=800 + k, n=50)
                sigma0 = perturbed_copy(m, rho0, seed=850 + k, size=0.01)
                rep = check_stability(m, quadratic(), rho0, sigma0, cfg)
                assert rep.passed, (m.kind, k, rep.summary_line())


def test_c09_support_containment():
    with criterion(9, "support containment for attractive runs", 120.0):
        cfg = FlowConfig(dt=0.01, t_final=5.0, record_every=25)
        for m in MANIFOLDS:
            rep = check_support_containment(m, quadratic(),
                                            standard_cloud(m, seed=900, n=50), cfg)
            assert rep.passed, (m.kind, rep.summary_line())


def test_c10_w1_exactness():
    with criterion(10, "W1 exactness and metric axioms", 30.0):
        for m in MANIFOLDS:
            rng = np.random.default_rng(1000)
            for _ in range(100):
                n = int(rng.integers(1, 7))
                rho = EmpiricalMeasure.uniform(
                    m.ball_points(rng, m.base_point, 0.7, n))
                sigma = EmpiricalMeasure.uniform(
                    m.ball_points(rng, m.base_point, 0.7, n))
                val, plan = w1_distance(m, rho, sigma)
                assert abs(val - w1_bruteforce(m, rho, sigma)) <= 1e-12
                plan.check_feasible(rho, sigma)
            for _ in range(50):
                n = int(rng.integers(2, 7))
                a, b, c = (EmpiricalMeasure.uniform(
                    m.ball_points(rng, m.base_point, 0.7, n)) for _ in range(3))
                dab = w1_distance(m, a, b)[0]
                assert abs(dab - w1_distance(m, b, a)[0]) <= 1e-9
                assert dab <= w1_distance(m, a, c)[0] + w1_distance(m, c, b)[0] + 1e-9


def test_c11_kglob_profile_gate():
    with criterion(11, "global-hypothesis profile gate", 10.0):
        rep = check_kglob(bounded_attractive(), lam=-1.0)
        assert rep.a_gprime == 0.5
        assert rep.lip_violation <= 1e-9
        assert rep.bound_violation <= 1e-9
        assert rep.remark_violation <= 1e-9
        assert rep.passed
        bad = check_kglob(quadratic(), lam=-1.0, grid_max=10.0)
        assert bad.lip_violation <= 1e-9
        assert bad.bound_violation > 0.0
        assert not bad.passed
