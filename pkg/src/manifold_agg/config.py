"""Run configuration: one human-editable TOML file drives every experiment.

All defaults are explicit (``default_config_toml`` is what --print-defaults
emits), and the fully resolved config is echoed into the run summary so every
output is reproducible from one artifact.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import toml

from .dynamics import FlowConfig
from .errors import ConfigError, OffManifold
from .geometry import Manifold, make_manifold
from .measures import EmpiricalMeasure
from .potentials import PotentialProfile, make_profile

CHECK_NAMES = (
    "transport_identities",
    "hessian_bounds",
    "log_lipschitz_second_arg",
    "gronwall_flow_bound",
    "stability",
    "contraction",
    "support_containment",
)

DEFAULTS: dict = {
    "manifold": {"kind": "euclidean", "dim": 2},
    "potential": {"name": "quadratic"},
    "initial": {
        # sampled-ball spec; give explicit "points" (+ optional "weights") instead
        # to bypass sampling
        "radius": 0.4,
        "count": 20,
        "seed": 7,
        "radial_mode": "volume",
    },
    "flow": {
        "dt": 0.01,
        "t_final": 1.0,
        "scheme": "geodesic-rk4",
        "record_every": 1,
        "diameter_margin": 0.1,
    },
    "outputs": {"directory": "out"},
    "checks": {
        "names": list(CHECK_NAMES),
        "samples": 500,
        "seed": 0,
        "epsilon": math.pi / 2,
        "dt": 0.02,
        "stability_horizon": 1.0,
        "containment_horizon": 2.0,
        "cloud_size": 20,
        "contraction_cloud_size": 6,
        "contraction_target": 0.9,
        "gronwall_pairs": 3,
    },
    "threads": 1,
}


def default_config_toml() -> str:
    return toml.dumps(DEFAULTS)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    """Parsed + defaulted run configuration."""

    data: dict

    # keys that are legal but have no default (alternative input forms)
    _EXTRA_KEYS = {
        "initial": {"points", "weights", "center"},
        "flow": {"reference_point"},
        "checks": {"delta"},
    }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for section, value in raw.items():
            if not isinstance(value, dict):
                if isinstance(DEFAULTS[section], dict):
                    raise ConfigError(f"section [{section}] must be a table")
                continue
            allowed = set(DEFAULTS[section]) | cls._EXTRA_KEYS.get(section, set())
            bad = set(value) - allowed
            if bad:
                raise ConfigError(
                    f"unknown keys in [{section}]: {sorted(bad)}; known: {sorted(allowed)}")
        return cls(_merge(DEFAULTS, raw))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                raw = toml.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except toml.TomlDecodeError as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        return cls.from_dict(raw)

    def resolved(self) -> dict:
        return copy.deepcopy(self.data)

    # -- section builders ---------------------------------------------------

    def build_manifold(self) -> Manifold:
        sec = self.data["manifold"]
        try:
            return make_manifold(sec["kind"], sec.get("dim"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_profile(self) -> PotentialProfile:
        sec = dict(self.data["potential"])
        name = sec.pop("name")
        try:
            return make_profile(name, **sec)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad potential spec: {exc}") from exc

    def build_initial(self, m: Manifold) -> EmpiricalMeasure:
        sec = self.data["initial"]
        try:
            if "points" in sec:
                pts = np.asarray(sec["points"], dtype=float)
                if "weights" in sec:
                    rho = EmpiricalMeasure(pts, np.asarray(sec["weights"], dtype=float))
                else:
                    rho = EmpiricalMeasure.uniform(pts)
            else:
                center = np.asarray(sec["center"], dtype=float) if "center" in sec \
                    else m.base_point
                pts = [p.coords for p in m.sample_in_ball(
                    center, sec["radius"], sec["count"], sec["seed"],
                    radial_mode=sec.get("radial_mode", "volume"))]
                rho = EmpiricalMeasure.uniform(np.asarray(pts))
            return rho.check_on(m)
        except ConfigError:
            raise
        except (ValueError, OffManifold) as exc:
            raise ConfigError(f"bad initial measure: {exc}") from exc

    def build_flow(self) -> FlowConfig:
        sec = self.data["flow"]
        try:
            return FlowConfig(
                dt=sec["dt"],
                t_final=sec["t_final"],
                scheme=sec["scheme"],
                record_every=sec["record_every"],
                diameter_margin=sec["diameter_margin"],
                reference_point=sec.get("reference_point"),
            )
        except ValueError as exc:
            raise ConfigError(f"bad flow config: {exc}") from exc

    def check_names(self) -> list[str]:
        names = self.data["checks"]["names"]
        bad = [n for n in names if n not in CHECK_NAMES]
        if bad:
            raise ConfigError(f"unknown checks: {bad}; known: {list(CHECK_NAMES)}")
        return list(names)


def parse_manifold_spec(spec: str) -> Manifold:
    """Parse 'sphere', 'hyperbolic', 'euclidean', or 'euclidean(n)'."""
    spec = spec.strip().lower()
    if "(" in spec:
        head, _, tail = spec.partition("(")
        if not tail.endswith(")"):
            raise ConfigError(f"malformed manifold spec {spec!r}")
        try:
            dim = int(tail[:-1])
        except ValueError as exc:
            raise ConfigError(f"malformed manifold spec {spec!r}") from exc
        name, arg = head, dim
    else:
        name, arg = spec, None
    try:
        return make_manifold(name, arg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_potential_spec(spec: str) -> PotentialProfile:
    """Parse 'quadratic', 'bounded-attractive', or 'power(p)'."""
    spec = spec.strip().lower()
    if "(" in spec:
        head, _, tail = spec.partition("(")
        if not tail.endswith(")"):
            raise ConfigError(f"malformed potential spec {spec!r}")
        try:
            return make_profile(head, p=float(tail[:-1]))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
    try:
        return make_profile(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
