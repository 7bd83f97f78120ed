#!/usr/bin/env python3
"""Convergence study of the geodesic integrators on the two-body problem.

The separation of two equal masses with the quadratic potential obeys
d' = -d, so d(1) = d0/e exactly on every manifold; the table shows the error
of each scheme against that value and the Richardson ratios between step sizes.
"""
import math

from manifold_agg.dynamics import FlowConfig, geodesic_pair, simulate
from manifold_agg.geometry import Euclidean, Hyperbolic, Sphere
from manifold_agg.potentials import quadratic

D0 = 1.0
TARGET = D0 * math.exp(-1.0)
STEPS = (0.1, 0.05, 0.025, 0.0125)


def final_gap(m, scheme, dt):
    cfg = FlowConfig(dt=dt, t_final=1.0, scheme=scheme, record_every=10 ** 9)
    traj = simulate(m, quadratic(), geodesic_pair(m, D0), cfg)
    return m.distance(traj.final.points[0], traj.final.points[1])


def main():
    for m in (Euclidean(2), Sphere(), Hyperbolic()):
        print(f"\n== {m.kind} ==")
        for scheme in ("geodesic-euler", "geodesic-rk4"):
            errs = [abs(final_gap(m, scheme, dt) - TARGET) for dt in STEPS]
            ratios = [a / b for a, b in zip(errs, errs[1:])]
            cells = "  ".join(f"{e:.3e}" for e in errs)
            rcells = "  ".join(f"{r:5.2f}" for r in ratios)
            print(f"{scheme:>15}  err: {cells}   ratios: {rcells}")


if __name__ == "__main__":
    main()
