import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner
from pydantic import ValidationError

from lagspec.field import SpectralField
from lagspec.harness.cli import main
from lagspec.harness.config import config_from_dict, load_config
from lagspec.harness.data import make_datum
from lagspec.harness.experiments import (
    heat_control,
    run_decay,
    run_linear_check,
    run_picard,
    run_simulate,
    run_stability,
    run_visco_limit,
)
from lagspec.harness.fitting import fit_rate
from lagspec.harness.io import read_csv, write_csv, write_json

BASE = {
    "model": {"pressure": {"law": "gamma", "gamma": 1.4}, "viscosity": {"law": "eulerian"}, "Ma": 1.0},
    "grid": {"n": 256, "length_pi": 16},
    "solver": {"dt": 0.02, "t_end": 1.0},
    "data": {"recipe": "bump", "amplitude": 0.02, "width": 2.0, "derivative": 1},
}


def cfg_with(**blocks):
    d = json.loads(json.dumps(BASE))
    for k, v in blocks.items():
        d[k] = {**d.get(k, {}), **v}
    return config_from_dict(d)


# ---------------------------------------------------------------- fitting


def test_fit_exact_power_law():
    t = np.geomspace(1, 50, 40)
    f = fit_rate(t, 3.0 * t**-0.5, (1, 50))
    assert abs(f.exponent + 0.5) < 1e-10 and f.residual_rms < 1e-10 and f.n_points == 40


def test_fit_perturbed_power_law():
    t = np.geomspace(1, 50, 200)
    f = fit_rate(t, t**-0.5 * (1 + 0.01 * np.sin(np.log(t))), (1, 50))
    assert abs(f.exponent + 0.5) < 0.02 and f.residual_rms > 0


def test_fit_scale_invariant():
    t = np.geomspace(1, 50, 30)
    v = t**-0.7 * (1 + 0.1 * np.cos(t))
    assert fit_rate(t, 17.0 * v).exponent == pytest.approx(fit_rate(t, v).exponent, abs=1e-12)


def test_fit_errors():
    t = np.geomspace(1, 50, 30)
    v = t**-0.5
    v[10] = 0.0
    with pytest.raises(ValueError, match="nonpositive"):
        fit_rate(t, v)
    with pytest.raises(ValueError, match="too few points"):
        fit_rate(t[:4], t[:4] ** -0.5)


# ----------------------------------------------------------------- config


def test_config_rejects_unknown_keys_and_bad_grid():
    d = json.loads(json.dumps(BASE))
    d["solver"]["dtt"] = 0.1
    with pytest.raises(ValidationError):
        config_from_dict(d)
    with pytest.raises(ValidationError, match="power of two"):
        cfg_with(grid={"n": 100})
    with pytest.raises(ValidationError, match="exactly one"):
        cfg_with(grid={"length": 3.0})
    with pytest.raises(ValidationError):
        cfg_with(data={"amplitude": 0.0})


def test_config_fit_window_inside_run():
    with pytest.raises(ValidationError, match="fit_window"):
        cfg_with(experiment={"kind": "decay", "fit_window": [0.5, 2.0]})
    c = cfg_with(solver={"output_times": {"geom": [0.01, 3.0, 10]}}, experiment={"fit_window": [0.5, 2.0]})
    assert max(c.solver.build().output_times) == pytest.approx(3.0)


def test_config_ma_target_and_yaml(tmp_path):
    c = cfg_with(model={"Ma": 0.5, "eta_bar": 2.0})
    p = c.model.build()
    assert p.Ma == pytest.approx(0.5, rel=1e-14) and p.nu_bar == pytest.approx(1.0 * 2.0 / 2.0 * 1.0)
    path = tmp_path / "c.yaml"
    path.write_text(yaml.safe_dump(BASE))
    assert load_config(path) == config_from_dict(BASE)


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.yaml"))
    assert len(files) >= 6
    for f in files:
        load_config(f)


# ------------------------------------------------------------------- data


def test_datum_recipes_deterministic_and_scaled():
    c = cfg_with()
    a1, v1 = make_datum(c.data, 256, c.grid.L)
    a2, _ = make_datum(c.data, 256, c.grid.L)
    np.testing.assert_array_equal(a1.values, a2.values)
    assert np.abs(a1.values).max() == pytest.approx(0.02) and abs(a1.mean) < 1e-15
    assert np.all(v1.values == 0)
    m = cfg_with(data={"recipe": "modes", "modes": [{"m": 2, "a": 1.0, "v": -2.0}]})
    a, v = make_datum(m.data, 256, m.grid.L)
    assert np.abs(v.values).max() == pytest.approx(0.02)
    np.testing.assert_allclose(a.values, -0.5 * v.values, atol=1e-17)
    b = cfg_with(data={"recipe": "broadband", "cutoff": 1.0})
    a, _ = make_datum(b.data, 256, b.grid.L)
    assert abs(a.mean) < 1e-15 and np.abs(a.hat[1:]).min() >= 0
    z = cfg_with(data={"recipe": "zero"})
    a, v = make_datum(z.data, 256, z.grid.L)
    assert not np.any(a.values) and not np.any(v.values)


def test_heat_control_exact_slope():
    n, L = 8192, 256 * np.pi
    b = cfg_with(data={"recipe": "broadband", "cutoff": 1.0})
    a, _ = make_datum(b.data, n, L)
    t = np.geomspace(1, 50, 40)
    assert fit_rate(t, heat_control(a, t)).exponent == pytest.approx(-0.5, abs=0.1)


# -------------------------------------------------------------------- io


def test_csv_json_round_trip(tmp_path):
    cols = {"t": np.array([0.0, 0.5, 1.0]), "x": [1e-300, 2.0, np.pi]}
    write_csv(tmp_path / "a.csv", cols)
    back = read_csv(tmp_path / "a.csv")
    np.testing.assert_array_equal(back["x"], np.asarray(cols["x"]))
    with pytest.raises(ValueError, match="unequal"):
        write_csv(tmp_path / "b.csv", {"a": [1, 2], "b": [1]})
    write_json(tmp_path / "s.json", {"v": np.float64(np.inf), "k": np.arange(2), "b": np.bool_(True)})
    d = json.loads((tmp_path / "s.json").read_text())
    assert d == {"v": "inf", "k": [0, 1], "b": True}


# ------------------------------------------------------------ experiments


def test_report_reproducible_from_embedded_config():
    r1 = run_simulate(cfg_with())
    r2 = run_simulate(config_from_dict(r1["config"]))
    assert r1["passed"] and r1["checks"]["mean_conserved"]
    np.testing.assert_allclose(r1["series"]["l2_a"], r2["series"]["l2_a"], rtol=1e-12, atol=0)


def test_decay_zero_datum_and_window_guard():
    c = cfg_with(data={"recipe": "zero"}, solver={"t_end": 5.0}, experiment={"kind": "decay", "fit_window": [1, 5]})
    r = run_decay(c)
    assert r["status"] == "no signal" and r["D_low"] == 0 and r["X20"] == 0
    c = cfg_with(solver={"t_end": 10.0}, experiment={"kind": "decay", "fit_window": [1, 10]},
                 grid={"length_pi": 4, "n": 256})
    with pytest.raises(ValueError, match="fit window outside validity"):
        run_decay(c)


def test_stability_linear_exact_two_and_zero_perturbation():
    pert = {"recipe": "modes", "amplitude": 1.0, "modes": [{"m": 3, "a": 1.0, "v": 0.5}]}
    c = cfg_with(experiment={"kind": "stability", "perturbation": pert})
    lin = run_stability(c, nonlinear=False)
    np.testing.assert_allclose(lin["ratios"], 2.0, rtol=1e-10)
    nl = run_stability(c)
    assert nl["passed"] and np.all((nl["ratios"] >= 1.8) & (nl["ratios"] <= 2.2))
    z = run_stability(cfg_with(experiment={"kind": "stability", "epsilons": [1e-3, 5e-4],
                                           "perturbation": {**pert, "modes": [{"m": 3}]}}))
    assert np.all(z["series"]["difference"] == 0)


def test_visco_sweep_guards():
    with pytest.raises(ValueError, match="sweep too short to fit"):
        run_visco_limit(cfg_with(model={"nu_bar_sweep": [4.0]}, experiment={"kind": "visco-limit"}))
    with pytest.raises(ValueError, match="non-geometric sweep"):
        run_visco_limit(cfg_with(model={"nu_bar_sweep": [4.0, 8.0, 12.0, 16.0]}, experiment={"kind": "visco-limit"}))


def test_visco_affine_semi_analytic_oracle():
    c = cfg_with(model={"pressure": {"law": "affine"}, "viscosity": {"law": "lagrangian"},
                        "nu_bar_sweep": [4.0, 8.0, 16.0, 32.0, 64.0]},
                 data={"recipe": "modes", "amplitude": 0.02, "modes": [{"m": 2, "a": 1.0}]},
                 solver={"dt": 0.05, "t_end": 2.0, "output_times": {"geom": [1e-4, 0.1, 12], "lin": [0.1, 2.0, 20]}},
                 experiment={"kind": "visco-limit"})
    r = run_visco_limit(c)
    assert r["checks"]["affine_oracle"] and r["checks"]["error_decreasing"]


def test_linear_check_and_picard_pass():
    r = run_linear_check(cfg_with(model={"pressure": {"law": "affine"}, "viscosity": {"law": "lagrangian"}}))
    assert r["passed"] and r["n_samples"] >= 200
    p = run_picard(cfg_with(solver={"t_end": 0.4}, experiment={"kind": "picard", "n_iters": 4}))
    assert p["passed"]


# -------------------------------------------------------------------- cli


def test_cli_runs_and_writes(tmp_path):
    cfgp = tmp_path / "s.yaml"
    cfgp.write_text(yaml.safe_dump({**BASE, "experiment": {"kind": "simulate"}}))
    out = tmp_path / "out"
    res = CliRunner().invoke(main, ["--config", str(cfgp), "--out", str(out), "simulate"])
    assert res.exit_code == 0, res.output
    assert "PASS" in res.output
    cols = read_csv(out / "simulate.csv")
    assert cols["t"][0] == 0.0
    summary = json.loads((out / "simulate.json").read_text())
    assert summary["passed"] and "series" not in summary


def test_cli_exit_code_on_failure(tmp_path):
    d = {**BASE, "experiment": {"kind": "stability", "epsilons": [1e-3, 5e-4],
                                "perturbation": {"recipe": "modes", "modes": [{"m": 3}]}}}
    cfgp = tmp_path / "s.yaml"
    cfgp.write_text(yaml.safe_dump(d))
    res = CliRunner().invoke(main, ["stability", "--config", str(cfgp), "--out", str(tmp_path)])
    assert res.exit_code == 1 and "FAIL" in res.output
    res = CliRunner().invoke(main, ["simulate"])
    assert res.exit_code != 0 and "missing --config" in res.output


def test_cli_besov(tmp_path):
    n, L = 256, 16 * np.pi
    y = L * np.arange(n) / n
    vals = np.cos(8 * 2 * np.pi * y / L)
    np.save(tmp_path / "f.npy", vals)
    np.savetxt(tmp_path / "f.txt", vals)
    from lagspec.lp_besov import BesovSpec, besov_norm, default_bank

    ref = besov_norm(SpectralField(vals, L), BesovSpec(sigma=0.5), default_bank(n, L))
    for name in ("f.npy", "f.txt"):
        res = CliRunner().invoke(main, ["besov", "--datum", str(tmp_path / name), "--length", repr(L),
                                        "--sigma", "0.5"])
        assert res.exit_code == 0, res.output
        assert float(res.output) == pytest.approx(ref, rel=1e-12)
