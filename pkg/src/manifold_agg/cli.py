"""Command-line front end: simulate, verify, w1, constants.

Exit codes: 0 success (verify: all checks passed), 1 check failure,
2 configuration error, 3 guard violation (the message names the guard).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import RunConfig, default_config_toml, parse_manifold_spec, parse_potential_spec
from .dynamics import (
    FlowConfig,
    contraction_horizon,
    simulate,
    trajectory_to_csv,
    trajectory_to_jsonl,
)
from .errors import (
    AntipodalPair,
    ConfigError,
    DiameterTooLarge,
    DiameterViolation,
    ExceedsInjectivity,
    ManifoldAggError,
    NotAttractive,
    OffManifold,
    RadiusTooLarge,
)
from .measures import load_measure, support_diameter, w1_bruteforce, w1_distance
from .potentials import profile_constants
from .verify import (
    CheckReport,
    check_contraction,
    check_gronwall_flow_bound,
    check_hessian_bounds,
    check_log_lipschitz_second_arg,
    check_stability,
    check_support_containment,
    check_transport_identities,
    perturbed_copy,
    standard_cloud,
    standard_gronwall_inputs,
    write_report,
)

GUARD_ERRORS = {
    DiameterViolation: "diameter guard",
    DiameterTooLarge: "diameter guard",
    ExceedsInjectivity: "injectivity guard",
    AntipodalPair: "antipodal guard",
    RadiusTooLarge: "convexity-radius guard",
    OffManifold: "manifold-invariant guard",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manifold-agg",
        description="Intrinsic aggregation dynamics on Riemannian manifolds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a particle simulation from a config file")
    sim.add_argument("--config", type=Path, help="TOML config file")
    sim.add_argument("--seed", type=int, help="override the config seeds")
    sim.add_argument("--threads", type=int, help="worker threads")
    sim.add_argument("--output", type=Path, help="override the output directory")
    sim.add_argument("--print-defaults", action="store_true",
                     help="print the default config as TOML and exit")

    ver = sub.add_parser("verify", help="run the certification checks")
    ver.add_argument("--config", type=Path, help="TOML config file")
    ver.add_argument("--seed", type=int, help="override the config seeds")
    ver.add_argument("--threads", type=int, help="worker threads for independent checks")
    ver.add_argument("--output", type=Path, help="override the output directory")
    ver.add_argument("--override-constant", action="append", default=[],
                     metavar="NAME=VALUE",
                     help="replace an analytic constant (failure-path testing)")
    ver.add_argument("--print-defaults", action="store_true",
                     help="print the default config as TOML and exit")

    w1p = sub.add_parser("w1", help="exact W1 distance between two measure files")
    w1p.add_argument("file_a", type=Path)
    w1p.add_argument("file_b", type=Path)
    w1p.add_argument("manifold", help="euclidean(n) | sphere | hyperbolic")
    w1p.add_argument("--oracle", action="store_true",
                     help="also print the N! permutation oracle value")

    con = sub.add_parser("constants", help="print the analytic constants table")
    con.add_argument("manifold", help="euclidean(n) | sphere | hyperbolic")
    con.add_argument("potential", help="quadratic | power(p) | bounded-attractive")
    con.add_argument("--delta", type=float, required=True, help="diameter bound")
    con.add_argument("--epsilon", type=float, default=math.pi / 2)

    return parser


def _resolve_threads(args, cfg: RunConfig | None) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("MANIFOLD_AGG_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"bad MANIFOLD_AGG_THREADS value {env!r}") from exc
    return max(1, cfg.data["threads"]) if cfg is not None else 1


def _load_config(args) -> RunConfig:
    if args.config is None:
        raise ConfigError("--config PATH is required (or use --print-defaults)")
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.data["initial"]["seed"] = args.seed
        cfg.data["checks"]["seed"] = args.seed
    if args.output is not None:
        cfg.data["outputs"]["directory"] = str(args.output)
    return cfg


def cmd_simulate(args) -> int:
    if args.print_defaults:
        print(default_config_toml(), end="")
        return 0
    cfg = _load_config(args)
    m = cfg.build_manifold()
    profile = cfg.build_profile()
    rho0 = cfg.build_initial(m)
    flow = cfg.build_flow()
    outdir = Path(cfg.data["outputs"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    traj = simulate(m, profile, rho0, flow)
    wall = time.perf_counter() - start

    trajectory_to_jsonl(traj, outdir / "trajectory.jsonl")
    trajectory_to_csv(traj, outdir / "trajectory.csv")
    summary = {
        "final_support_radius": traj.diagnostics[-1].support_radius,
        "final_max_pairwise_distance": traj.diagnostics[-1].max_pairwise_distance,
        "recorded_times": len(traj.times),
        "wall_time_s": wall,
        "threads": _resolve_threads(args, cfg),
        "config": cfg.resolved(),
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(f"simulate: {len(traj.times)} recorded times -> {outdir} "
          f"({wall:.2f} s)")
    return 0


OVERRIDABLE_CONSTANTS = ("delta", "c_gprime", "l_gprime", "L", "ell", "Lbar", "Lambda")


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        name, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--override-constant expects NAME=VALUE, got {pair!r}")
        name = name.strip()
        if name not in OVERRIDABLE_CONSTANTS:
            raise ConfigError(
                f"unknown constant {name!r}; overridable: {OVERRIDABLE_CONSTANTS}")
        try:
            out[name] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad override value in {pair!r}") from exc
    return out


def _merge_reports(name: str, reports: list[CheckReport]) -> CheckReport:
    worst = min(reports, key=lambda r: r.worst_margin)
    return CheckReport(
        check_name=name,
        samples=sum(r.samples for r in reports),
        worst_margin=worst.worst_margin,
        worst_case=worst.worst_case,
        passed=all(r.passed for r in reports),
        seed=reports[0].seed,
        tolerance=worst.tolerance,
        details={"runs": [r.to_dict() for r in reports]},
    )


def check_jobs(cfg: RunConfig, overrides: dict):
    """One zero-argument job per configured check name."""
    m = cfg.build_manifold()
    profile = cfg.build_profile()
    checks = cfg.data["checks"]
    samples = checks["samples"]
    seed = checks["seed"]
    eps = checks["epsilon"]
    delta = checks.get("delta")
    ov = overrides or None

    def transport():
        return check_transport_identities(m, samples=samples, seed=seed)

    def hessian():
        return check_hessian_bounds(m, samples=samples, delta=delta, seed=seed + 1,
                                    overrides=ov)

    def log_lip():
        return check_log_lipschitz_second_arg(m, samples=samples, delta=delta,
                                              eps=eps, seed=seed + 2, overrides=ov)

    def gronwall():
        reports = []
        for k in range(checks["gronwall_pairs"]):
            fx, fy, starts, T, dt, lip = standard_gronwall_inputs(
                m, profile, seed + 3 + k, eps=eps)
            reports.append(check_gronwall_flow_bound(
                m, fx, fy, starts, T, dt, lip, seed=seed + 3 + k))
        return _merge_reports("gronwall_flow_bound", reports)

    def stability():
        rho0 = standard_cloud(m, seed + 10, n=checks["cloud_size"])
        sigma0 = perturbed_copy(m, rho0, seed + 11, size=0.01)
        flow = FlowConfig(dt=checks["dt"], t_final=checks["stability_horizon"],
                          record_every=5)
        return check_stability(m, profile, rho0, sigma0, flow, eps=eps,
                               seed=seed + 10, overrides=ov)

    def contraction():
        rho0 = standard_cloud(m, seed + 20, n=checks["contraction_cloud_size"])
        consts = profile_constants(
            profile, max(support_diameter(m, rho0) * 1.1, 1e-9),
            m.curvature_lower, m.curvature_upper, eps=eps)
        horizon = contraction_horizon(consts, target=checks["contraction_target"])
        dt = min(checks["dt"], horizon / 50.0)
        n_steps = max(1, int(horizon / dt))
        flow = FlowConfig(dt=dt, t_final=n_steps * dt, scheme="geodesic-euler")
        return check_contraction(m, profile, rho0, flow, fp_tol=1e-6, max_iter=300,
                                 eps=eps, seed=seed + 20, overrides=ov)

    def containment():
        rho0 = standard_cloud(m, seed + 30, n=checks["cloud_size"])
        flow = FlowConfig(dt=checks["dt"], t_final=checks["containment_horizon"],
                          record_every=10)
        return check_support_containment(m, profile, rho0, flow, seed=seed + 30)

    builders = {
        "transport_identities": transport,
        "hessian_bounds": hessian,
        "log_lipschitz_second_arg": log_lip,
        "gronwall_flow_bound": gronwall,
        "stability": stability,
        "contraction": contraction,
        "support_containment": containment,
    }
    return [(name, builders[name]) for name in cfg.check_names()]


def cmd_verify(args) -> int:
    if args.print_defaults:
        print(default_config_toml(), end="")
        return 0
    cfg = _load_config(args)
    overrides = _parse_overrides(args.override_constant)
    threads = _resolve_threads(args, cfg)
    outdir = Path(cfg.data["outputs"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)

    jobs = check_jobs(cfg, overrides)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(lambda job: job[1](), jobs))
    else:
        reports = [job() for _, job in jobs]

    all_passed = True
    for report in reports:
        write_report(report, outdir / f"{report.check_name}.json")
        print(report.summary_line())
        all_passed &= report.passed
    return 0 if all_passed else 1


def _load_measure_file(path):
    try:
        return load_measure(path)
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad measure file {path}: {exc}") from exc


def cmd_w1(args) -> int:
    m = parse_manifold_spec(args.manifold)
    rho = _load_measure_file(args.file_a)
    sigma = _load_measure_file(args.file_b)
    rho.check_on(m)
    sigma.check_on(m)
    value, _ = w1_distance(m, rho, sigma)
    print(repr(value))
    if args.oracle:
        try:
            print(repr(w1_bruteforce(m, rho, sigma)))
        except ValueError as exc:
            raise ConfigError(f"oracle unavailable: {exc}") from exc
    return 0


def cmd_constants(args) -> int:
    m = parse_manifold_spec(args.manifold)
    profile = parse_potential_spec(args.potential)
    consts = profile_constants(profile, args.delta, m.curvature_lower,
                               m.curvature_upper, eps=args.epsilon)
    rows = [
        ("delta", consts.delta),
        ("c_gprime", consts.c_gprime),
        ("l_gprime", consts.l_gprime),
        ("L", consts.L),
        ("ell", consts.ell),
        ("Lbar", consts.Lbar),
        ("Lambda", consts.Lambda),
        ("epsilon", consts.eps),
    ]
    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value!r}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "simulate": cmd_simulate,
        "verify": cmd_verify,
        "w1": cmd_w1,
        "constants": cmd_constants,
    }[args.command]
    try:
        return handler(args)
    except (ConfigError, NotAttractive) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ManifoldAggError as exc:
        for err_type, guard in GUARD_ERRORS.items():
            if isinstance(exc, err_type):
                print(f"{guard}: {exc}", file=sys.stderr)
                return 3
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
