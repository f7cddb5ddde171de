from __future__ import annotations

import json
import math

import numpy as np
import pytest

from igflow import flows, hamiltonian as ham, io, manifold as mf
from igflow.cli import main


def run(tmp_path, command, cfg, *extra):
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    return main([command, "--config", str(path), "--out", str(out), *extra]), out


def test_fmt_uses_17_digits():
    assert io.fmt(0.1) == "0.10000000000000001"
    assert io.fmt(1.0) == "1" and io.fmt(0.0) == "0" and io.fmt(-0.0) == "0"
    assert float(io.fmt(math.pi)) == math.pi


def test_dumps_is_deterministic_json():
    obj = {"b": [0.1, 2, None, True], "a": {"x": np.float64(1e-300), "y": float("nan")}, "s": 'q"\n'}
    text = io.dumps(obj)
    assert text == io.dumps(obj)
    back = json.loads(text)
    assert back["b"] == [0.1, 2, None, True] and back["a"] == {"x": 1e-300, "y": None} and back["s"] == 'q"\n'


def test_trajectory_csv_round_trip(tmp_path):
    G = mf.GaussianModel()
    traj = flows.eta_flow(G, G.eta_from_mu_sigma(0, 1), (0.0, 0.01), theta_r=G.theta_from_mu_sigma(1.2, 0.8))
    path = io.write_trajectory_csv(tmp_path / "t.csv", traj)
    header, data = io.read_csv(path)
    assert header == ["param", "eta1", "eta2", "psi_star"]
    np.testing.assert_array_equal(data[:, 1:3], traj.points)
    np.testing.assert_array_equal(data[:, 0], traj.samples)


def test_phase_csv_header(tmp_path):
    spec = ham.HamiltonianSpec("conformal_ig", mf.QuadraticModel())
    traj = ham.integrate_hamilton(spec, np.array([0.6, -0.8]), (0.0, 0.01))
    header, data = io.read_csv(io.write_phase_csv(tmp_path / "p.csv", traj))
    assert header == ["param", "theta1", "theta2", "p1", "p2", "H"]
    assert data.shape == (len(traj), 6)


def test_json_has_schema_version(tmp_path):
    path = io.write_json(tmp_path / "x.json", {"a": 1})
    assert json.loads(path.read_text())["schema_version"] == io.SCHEMA_VERSION


def test_flow_gaussian_eta_converges(tmp_path):
    cfg = {"model": "gaussian", "flow": "eta", "initial": {"mu": 0, "sigma": 1},
           "reference": {"mu": 1.2, "sigma": 0.8}, "horizon": 10}
    code, out = run(tmp_path, "flow", cfg)
    assert code == 0
    meta = json.loads((out / "run.json").read_text())
    ms = meta["summary"]["final_mu_sigma"]
    assert abs(ms["mu"] - 1.2) <= 1e-4 and abs(ms["sigma"] - 0.8) <= 1e-4
    assert meta["config"]["horizon"] == 10 and meta["summary"]["final_divergence"] < 1e-8
    header, data = io.read_csv(out / "trajectory.csv")
    assert header[:3] == ["param", "eta1", "eta2"] and data[-1, 0] == pytest.approx(10)


def test_flow_quadratic_theta_reports_growth(tmp_path):
    cfg = {"model": "quadratic", "flow": "theta", "initial": {"theta": [0.3, -0.4]}, "horizon": 2}
    code, out = run(tmp_path, "flow", cfg)
    assert code == 0
    norm = json.loads((out / "run.json").read_text())["summary"]["final_eta_norm"]
    assert norm == pytest.approx(0.5 * math.e ** 2, rel=1e-10)


def test_flow_gaussian_mu_sigma(tmp_path):
    cfg = {"model": "gaussian", "flow": "gaussian", "initial": {"mu": 0, "sigma": 1},
           "reference": {"mu": 1.2, "sigma": 0.8}, "horizon": 1}
    code, out = run(tmp_path, "flow", cfg)
    assert code == 0
    header, data = io.read_csv(out / "trajectory.csv")
    assert header == ["param", "mu", "sigma"]
    assert abs(data[-1, 1] - 0.874339177475735) <= 1e-9


def test_flow_config_errors(tmp_path):
    assert run(tmp_path, "flow", {"flow": "theta", "horizon": 1})[0] == 2
    assert run(tmp_path, "flow", {"model": "cauchy", "horizon": 1})[0] == 2
    assert run(tmp_path, "flow", {"model": "gaussian", "initial": {"mu": 0, "sigma": 1}, "horizon": -1})[0] == 2
    assert run(tmp_path, "flow", {"model": "gaussian", "initial": {"mu": 0, "sigma": 1}, "horizon": 1,
                                  "integrator": {"step": 0}})[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["flow", "--config", str(bad)]) == 2


def test_flow_off_domain_start_is_numeric_error(tmp_path):
    cfg = {"model": "gaussian", "flow": "theta", "initial": {"theta": [0.0, 0.5]}, "horizon": 1}
    assert run(tmp_path, "flow", cfg)[0] == 3


def test_flags_override_config(tmp_path):
    cfg = {"model": "quadratic", "flow": "theta", "initial": {"theta": [0.3, -0.4]}, "horizon": 5}
    code, out = run(tmp_path, "flow", cfg, "--horizon", "0.5", "--step", "0.01")
    assert code == 0
    meta = json.loads((out / "run.json").read_text())
    assert meta["config"]["horizon"] == 0.5 and meta["summary"]["n_samples"] == 51


def test_hamilton_conformal_drift(tmp_path):
    cfg = {"model": "gaussian", "hamiltonian": {"kind": "conformal_ig"}, "initial": {"mu": 0.2, "sigma": 1.0},
           "horizon": 2}
    code, out = run(tmp_path, "hamilton", cfg)
    assert code == 0
    meta = json.loads((out / "run.json").read_text())
    assert meta["summary"]["H_drift"] <= 1e-8 and meta["spec"]["kind"] == "conformal_ig"
    header, _ = io.read_csv(out / "phase.csv")
    assert header == ["param", "theta1", "theta2", "p1", "p2", "H"]


def test_hamilton_quadratic_on_shell(tmp_path):
    cfg = {"model": "quadratic", "hamiltonian": "ig_quadratic_theta", "initial": {"theta": [0.3, 0.4]}, "horizon": 1}
    code, out = run(tmp_path, "hamilton", cfg)
    assert code == 0
    _, data = io.read_csv(out / "phase.csv")
    assert np.max(np.abs(data[:, -1])) <= 1e-12


def test_hamilton_singular_rf_exits_3(tmp_path):
    cfg = {"model": "quadratic", "hamiltonian": "rf_ig", "A": [0.5, 0], "initial": {"theta": [1, 0]}, "horizon": 1}
    assert run(tmp_path, "hamilton", cfg)[0] == 3


def test_compare_gaussian(tmp_path):
    cfg = {"model": "gaussian", "flow": "theta", "initial": {"mu": 0.1, "sigma": 1.0}, "horizon": 3}
    code, out = run(tmp_path, "compare", cfg)
    report = json.loads((out / "compare.json").read_text())["report"]
    assert code == 0 and report["sup_norm"] <= 1e-6 and report["passed"]
    header, dev = io.read_csv(out / "deviation.csv")
    assert header == ["t", "deviation"] and dev[:, 1].max() == pytest.approx(report["sup_norm"])


def test_compare_quadratic(tmp_path):
    cfg = {"model": "quadratic", "flow": "theta", "initial": {"theta": [0.6, -0.8]}, "horizon": 1,
           "tolerance": 1e-8}
    code, out = run(tmp_path, "compare", cfg)
    assert code == 0


def test_compare_tight_tolerance_fails_but_reports(tmp_path):
    cfg = {"model": "gaussian", "flow": "theta", "initial": {"mu": 0.1, "sigma": 1.0}, "horizon": 1,
           "tolerance": 1e-15}
    code, out = run(tmp_path, "compare", cfg)
    assert code == 1
    assert not json.loads((out / "compare.json").read_text())["report"]["passed"]


def test_compare_canonical_pair(tmp_path):
    cfg = {"model": "gaussian", "flow": "eta", "initial": {"mu": 0.3, "sigma": 0.9}, "horizon": 1}
    code, out = run(tmp_path, "compare", cfg)
    assert code == 0
    assert json.loads((out / "compare.json").read_text())["report"]["spec"]["kind"] == "ig_sqrt_eta"


def test_compare_rf_reports_both_clocks(tmp_path):
    cfg = {"model": "quadratic", "flow": "rf", "A": [0.05, 0.02], "initial": {"theta": [0.6, -0.8]}, "horizon": 0.5}
    code, out = run(tmp_path, "compare", cfg)
    report = json.loads((out / "compare.json").read_text())["report"]
    assert report["potential_rate"]["sup_norm"] <= 1e-8
    assert report["default"]["sup_norm"] > 1e-6
    assert code == 1


def test_field_examples(tmp_path):
    cfg = {"grid": {"mu": [0.0, 1.2, 3], "sigma": [0.8, 1.0, 2]}, "reference": {"mu": 1.2, "sigma": 0.8}}
    code, out = run(tmp_path, "field", cfg)
    assert code == 0
    header, data = io.read_csv(out / "field.csv")
    assert header == ["mu", "sigma", "dmu_dt", "dsigma_dt"] and len(data) == 6
    row = data[(data[:, 0] == 0) & (data[:, 1] == 1)][0]
    assert row[2] == pytest.approx(1.875) and row[3] == pytest.approx(-0.28125)
    fixed = data[(data[:, 0] == 1.2) & (data[:, 1] == 0.8)][0]
    assert fixed[2] == 0 and fixed[3] == 0


def test_field_default_grid(tmp_path):
    code, out = run(tmp_path, "field", {})
    assert code == 0
    _, data = io.read_csv(out / "field.csv")
    assert len(data) == 17 * 13
    assert data[:, 0].min() == 0.4 and data[:, 0].max() == 2.0 and data[:, 1].max() == 1.6
    assert run(tmp_path, "field", {"grid": {"sigma": [0.0, 1.0, 3]}})[0] == 2


def test_geometry_worked_block(tmp_path):
    cfg = {"adm": {"alpha": 1, "beta": [0.5, 0], "gamma": [[1, 0], [0, 1]]}}
    code, out = run(tmp_path, "geometry", cfg)
    assert code == 0
    g = json.loads((out / "geometry.json").read_text())
    assert g["zermelo"]["V2"] == pytest.approx(0.75, abs=1e-12)
    np.testing.assert_allclose(g["randers"]["a"], np.diag([16 / 9, 4 / 3]), atol=1e-12)
    np.testing.assert_allclose(g["randers"]["b"], [2 / 3, 0], atol=1e-12)
    assert max(g["residuals"].values()) <= 1e-12


def test_geometry_minkowski_and_signature(tmp_path):
    cfg = {"adm": {"alpha": 1, "beta": [0, 0], "gamma": [[1, 0], [0, 1]]}}
    code, out = run(tmp_path, "geometry", cfg)
    g = json.loads((out / "geometry.json").read_text())
    assert code == 0 and g["zermelo"]["V2"] == 1 and g["randers"]["b"] == [0, 0]
    bad = {"adm": {"alpha": 1, "beta": [1.0, 0], "gamma": [[1, 0], [0, 1]]}}
    assert run(tmp_path, "geometry", bad)[0] == 3
    zerm = {"zermelo": {"V2": 0.75, "h": [[1, 0], [0, 1]], "W": [-0.5, 0]}}
    code, out = run(tmp_path, "geometry", zerm)
    assert code == 0 and json.loads((out / "geometry.json").read_text())["adm"]["beta"] == [0.5, 0]


def test_check_passes_and_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["check", "--out", str(a), "--seed", "7"]) == 0
    assert main(["check", "--out", str(b), "--seed", "7"]) == 0
    assert (a / "check.json").read_bytes() == (b / "check.json").read_bytes()
    report = json.loads((a / "check.json").read_text())
    assert report["passed"] and all(c["passed"] for c in report["checks"])


def test_check_rejects_degenerate_reference(tmp_path):
    assert run(tmp_path, "check", {"reference": {"mu": 1.2, "sigma": 0}})[0] == 2
