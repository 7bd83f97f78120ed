"""End-to-end CLI behaviour: configs, outputs, exit codes."""
import json
import math

import numpy as np
import pytest
import toml

from manifold_agg.cli import main
from manifold_agg.config import (
    RunConfig,
    default_config_toml,
    parse_manifold_spec,
    parse_potential_spec,
)
from manifold_agg.errors import ConfigError


def write_config(tmp_path, name="cfg.toml", **sections):
    path = tmp_path / name
    path.write_text(toml.dumps(sections))
    return path


# --- config parsing -----------------------------------------------------------------

def test_default_config_roundtrips():
    data = toml.loads(default_config_toml())
    assert data["manifold"]["kind"] == "euclidean"
    assert data["flow"]["scheme"] == "geodesic-rk4"
    assert set(data["checks"]["names"]) >= {"transport_identities", "contraction"}


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"manyfold": {}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"flow": {"t_finale": 2.0}})  # typo'd key
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"flow": 3.0})


def test_console_script_entry_point():
    import shutil
    import subprocess
    exe = shutil.which("manifold-agg")
    if exe is None:
        pytest.skip("console script not installed")
    out = subprocess.run([exe, "simulate", "--print-defaults"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "[flow]" in out.stdout


def test_unknown_references_rejected(tmp_path):
    cfg = RunConfig.from_dict({"manifold": {"kind": "torus"}})
    with pytest.raises(ConfigError):
        cfg.build_manifold()
    cfg = RunConfig.from_dict({"potential": {"name": "gravity"}})
    with pytest.raises(ConfigError):
        cfg.build_profile()
    cfg = RunConfig.from_dict({"checks": {"names": ["transport_identities", "nope"]}})
    with pytest.raises(ConfigError):
        cfg.check_names()


def test_spec_parsers():
    assert parse_manifold_spec("euclidean(3)").dim == 3
    assert parse_manifold_spec("sphere").kind == "sphere"
    assert parse_manifold_spec("hyperbolic").kind == "hyperbolic"
    assert parse_potential_spec("power(4)").name == "power(4)"
    assert parse_potential_spec("bounded-attractive").a_gprime == 0.5
    with pytest.raises(ConfigError):
        parse_manifold_spec("euclidean(two)")
    with pytest.raises(ConfigError):
        parse_potential_spec("gravity")


def test_explicit_initial_points(tmp_path):
    cfg = RunConfig.from_dict({
        "manifold": {"kind": "sphere"},
        "initial": {"points": [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]},
    })
    m = cfg.build_manifold()
    rho = cfg.build_initial(m)
    assert rho.n == 2
    assert rho.is_uniform()
    bad = RunConfig.from_dict({
        "manifold": {"kind": "sphere"},
        "initial": {"points": [[0.0, 0.0, 2.0]]},
    })
    with pytest.raises(ConfigError):
        bad.build_initial(bad.build_manifold())


# --- simulate -------------------------------------------------------------------------

def test_simulate_single_particle(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        manifold={"kind": "euclidean", "dim": 2},
        initial={"points": [[0.25, -0.5]]},
        flow={"dt": 0.1, "t_final": 1.0},
        outputs={"directory": str(tmp_path / "out")},
    )
    assert main(["simulate", "--config", str(cfg)]) == 0
    lines = (tmp_path / "out" / "trajectory.jsonl").read_text().strip().splitlines()
    recs = [json.loads(l) for l in lines]
    assert recs[0]["t"] == 0.0 and recs[-1]["t"] == pytest.approx(1.0)
    for rec in recs:
        assert rec["points"] == [[0.25, -0.5]]
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["final_support_radius"] == 0.0
    assert summary["config"]["manifold"]["kind"] == "euclidean"


def test_simulate_two_body_matches_exact(tmp_path):
    cfg = write_config(
        tmp_path,
        manifold={"kind": "euclidean", "dim": 2},
        initial={"points": [[-0.5, 0.0], [0.5, 0.0]]},
        flow={"dt": 0.001, "t_final": 1.0, "scheme": "geodesic-rk4",
              "record_every": 1000},
        outputs={"directory": str(tmp_path / "out2")},
    )
    assert main(["simulate", "--config", str(cfg)]) == 0
    last = json.loads(
        (tmp_path / "out2" / "trajectory.jsonl").read_text().strip().splitlines()[-1])
    p, q = np.asarray(last["points"])
    assert np.linalg.norm(p - q) == pytest.approx(math.exp(-1.0), abs=1e-6)


def test_simulate_diameter_guard_exit_code(tmp_path, capsys):
    d0 = 1.5
    cfg = write_config(
        tmp_path,
        manifold={"kind": "sphere"},
        initial={"points": [[math.sin(d0 / 2), 0.0, math.cos(d0 / 2)],
                            [-math.sin(d0 / 2), 0.0, math.cos(d0 / 2)]]},
        flow={"dt": 0.01, "t_final": 1.0},
        outputs={"directory": str(tmp_path / "out3")},
    )
    assert main(["simulate", "--config", str(cfg)]) == 3
    assert "diameter guard" in capsys.readouterr().err


def test_simulate_config_error_exit_code(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "missing.toml")]) == 2
    assert main(["simulate"]) == 2


def test_print_defaults(capsys):
    assert main(["simulate", "--print-defaults"]) == 0
    out = capsys.readouterr().out
    assert toml.loads(out)["flow"]["dt"] == 0.01


# --- verify ---------------------------------------------------------------------------

def _verify_config(tmp_path, kind, outdir, **extra_checks):
    checks = {"samples": 200, "seed": 0}
    checks.update(extra_checks)
    sections = {
        "manifold": {"kind": kind},
        "checks": checks,
        "outputs": {"directory": str(outdir)},
    }
    if kind == "euclidean":
        sections["manifold"]["dim"] = 2
    return write_config(tmp_path, name=f"verify_{kind}.toml", **sections)


@pytest.mark.parametrize("kind", ["euclidean", "sphere", "hyperbolic"])
def test_verify_default_suite_passes(tmp_path, capsys, kind):
    cfg = _verify_config(tmp_path, kind, tmp_path / f"reports_{kind}")
    assert main(["verify", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 7 and "FAIL" not in out
    reports = sorted(p.name for p in (tmp_path / f"reports_{kind}").glob("*.json"))
    assert len(reports) == 7
    data = json.loads((tmp_path / f"reports_{kind}" / "stability.json").read_text())
    assert data["passed"] is True


def test_verify_override_constant_fails(tmp_path, capsys):
    cfg = _verify_config(tmp_path, "euclidean", tmp_path / "reports_bad")
    assert main(["verify", "--config", str(cfg), "--override-constant", "L=1.0"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_verify_bad_override_rejected(tmp_path, capsys):
    cfg = _verify_config(tmp_path, "euclidean", tmp_path / "r")
    assert main(["verify", "--config", str(cfg), "--override-constant", "L"]) == 2
    assert main(["verify", "--config", str(cfg),
                 "--override-constant", "nope=1.0"]) == 2


def test_verify_threads_reproducible(tmp_path, capsys, monkeypatch):
    cfg = _verify_config(tmp_path, "euclidean", tmp_path / "r1",
                         names=["transport_identities", "hessian_bounds"])
    assert main(["verify", "--config", str(cfg), "--threads", "1"]) == 0
    one = json.loads((tmp_path / "r1" / "hessian_bounds.json").read_text())
    cfg2 = _verify_config(tmp_path, "euclidean", tmp_path / "r2",
                          names=["transport_identities", "hessian_bounds"])
    monkeypatch.setenv("MANIFOLD_AGG_THREADS", "4")
    assert main(["verify", "--config", str(cfg2)]) == 0
    four = json.loads((tmp_path / "r2" / "hessian_bounds.json").read_text())
    assert one == four


# --- w1 -------------------------------------------------------------------------------

def _measure_file(tmp_path, name, points, weights=None):
    pts = np.asarray(points, dtype=float)
    w = ([1.0 / len(pts)] * len(pts)) if weights is None else weights
    path = tmp_path / name
    path.write_text(json.dumps({"points": pts.tolist(), "weights": list(w)}))
    return path


def test_w1_identical_files(tmp_path, capsys):
    a = _measure_file(tmp_path, "a.json", [[0.0, 0.0], [1.0, 1.0]])
    assert main(["w1", str(a), str(a), "euclidean(2)"]) == 0
    assert float(capsys.readouterr().out.strip()) == 0.0


def test_w1_two_diracs(tmp_path, capsys):
    a = _measure_file(tmp_path, "da.json", [[0.0, 0.0]])
    b = _measure_file(tmp_path, "db.json", [[3.0, 4.0]])
    assert main(["w1", str(a), str(b), "euclidean(2)"]) == 0
    assert float(capsys.readouterr().out.strip()) == pytest.approx(5.0, abs=1e-15)


def test_w1_oracle_flag(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a = _measure_file(tmp_path, "na.json", rng.normal(size=(6, 2)))
    b = _measure_file(tmp_path, "nb.json", rng.normal(size=(6, 2)))
    assert main(["w1", str(a), str(b), "euclidean(2)", "--oracle"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    assert abs(float(lines[0]) - float(lines[1])) <= 1e-12


def test_w1_off_manifold_rejected(tmp_path, capsys):
    a = _measure_file(tmp_path, "oa.json", [[0.0, 0.0, 2.0]])
    assert main(["w1", str(a), str(a), "sphere"]) == 3


def test_w1_malformed_files_rejected(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"points": [[0.0, 0.0]], "weights": [0.25]}')  # mass != 1
    assert main(["w1", str(bad), str(bad), "euclidean(2)"]) == 2
    assert main(["w1", str(tmp_path / "missing.json"), str(bad),
                 "euclidean(2)"]) == 2
    nonuniform = tmp_path / "nonuniform.json"
    nonuniform.write_text(
        '{"points": [[0.0, 0.0], [1.0, 0.0]], "weights": [0.7, 0.3]}')
    assert main(["w1", str(nonuniform), str(nonuniform), "euclidean(2)",
                 "--oracle"]) == 2  # oracle needs uniform weights


def test_simulate_seed_flag_overrides_config(tmp_path):
    cfg = write_config(
        tmp_path,
        manifold={"kind": "euclidean", "dim": 2},
        initial={"radius": 0.4, "count": 5, "seed": 7},
        flow={"dt": 0.1, "t_final": 0.2},
        outputs={"directory": str(tmp_path / "s1")},
    )
    assert main(["simulate", "--config", str(cfg), "--seed", "99"]) == 0
    assert main(["simulate", "--config", str(cfg), "--seed", "99",
                 "--output", str(tmp_path / "s2")]) == 0
    assert main(["simulate", "--config", str(cfg), "--output",
                 str(tmp_path / "s3")]) == 0
    first = json.loads((tmp_path / "s1" / "trajectory.jsonl").read_text().splitlines()[0])
    second = json.loads((tmp_path / "s2" / "trajectory.jsonl").read_text().splitlines()[0])
    third = json.loads((tmp_path / "s3" / "trajectory.jsonl").read_text().splitlines()[0])
    assert first["points"] == second["points"]       # same seed reproduces
    assert first["points"] != third["points"]        # config seed differs
    summary = json.loads((tmp_path / "s2" / "summary.json").read_text())
    assert summary["config"]["initial"]["seed"] == 99


# --- constants ---------------------------------------------------------------------------

def test_constants_euclidean(capsys):
    assert main(["constants", "euclidean(2)", "quadratic", "--delta", "1.0"]) == 0
    table = dict(line.split() for line in capsys.readouterr().out.strip().splitlines())
    assert float(table["L"]) == 2.0
    assert float(table["ell"]) == 1.0
    assert float(table["Lbar"]) == 1.0
    assert float(table["Lambda"]) == 1.0


def test_constants_hyperbolic(capsys):
    assert main(["constants", "hyperbolic", "quadratic", "--delta", "1.0"]) == 0
    table = dict(line.split() for line in capsys.readouterr().out.strip().splitlines())
    assert float(table["L"]) == pytest.approx(2.0 / math.tanh(1.0), abs=1e-14)
    assert float(table["Lbar"]) == pytest.approx(1.0 / math.tanh(1.0), abs=1e-14)


def test_constants_sphere(capsys):
    assert main(["constants", "sphere", "quadratic",
                 "--delta", str(math.pi / 3)]) == 0
    table = dict(line.split() for line in capsys.readouterr().out.strip().splitlines())
    assert float(table["ell"]) == pytest.approx(math.pi / 2, abs=1e-14)
    assert float(table["Lambda"]) == pytest.approx(math.pi / 2, abs=1e-14)


def test_constants_guard(capsys):
    assert main(["constants", "sphere", "quadratic", "--delta", "2.0"]) == 3
    assert "diameter guard" in capsys.readouterr().err
