#!/usr/bin/env python3
"""Run the full certification suite on all three manifolds and print a table.

Exit code is nonzero if any check fails, mirroring `manifold-agg verify`.
"""
import sys

from manifold_agg.cli import check_jobs
from manifold_agg.config import RunConfig


def main():
    failures = 0
    for kind in ("euclidean", "sphere", "hyperbolic"):
        raw = {"manifold": {"kind": kind}, "checks": {"samples": 500, "seed": 0}}
        if kind == "euclidean":
            raw["manifold"]["dim"] = 2
        print(f"\n== {kind} ==")
        for _, job in check_jobs(RunConfig.from_dict(raw), overrides={}):
            report = job()
            print(report.summary_line())
            failures += not report.passed
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
