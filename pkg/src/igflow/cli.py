"""``igflow`` command-line runner.

Every subcommand reads one JSON config; ``--seed``, ``--step``, ``--horizon`` and
``--out`` override the matching top-level keys. Exit codes: 0 success, 1 tolerance
failure, 2 config error, 3 numeric or domain error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import PchipInterpolator

from igflow import checks, flows, hamiltonian as ham, io, manifold as mf, spacetime as st
from igflow.errors import ConfigError, IGFlowError

EXIT_OK, EXIT_TOL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

DEFAULT_FIELD_GRID = {"mu": [0.4, 2.0, 17], "sigma": [0.4, 1.6, 13]}


# -- config helpers ---------------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def apply_overrides(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    for key in ("seed", "horizon", "out"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "step", None) is not None:
        cfg["integrator"] = {**cfg.get("integrator", {}), "step": args.step}
    return cfg


def build_model(cfg: dict) -> mf.DuallyFlatModel:
    spec = cfg.get("model")
    if spec is None:
        raise ConfigError("missing model name")
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    if name == "gaussian":
        return mf.GaussianModel()
    if name == "quadratic":
        Q = spec.get("Q")
        try:
            return mf.QuadraticModel(dim=int(spec.get("dim", 2)), Q=None if Q is None else np.asarray(Q, float))
        except ValueError as exc:
            raise ConfigError(f"bad quadratic model: {exc}") from exc
    if name is None:
        raise ConfigError("missing model name")
    raise ConfigError(f"unknown model {name!r}; use 'gaussian' or 'quadratic'")


def build_integrator(cfg: dict) -> flows.IntegratorConfig:
    try:
        return flows.IntegratorConfig(**cfg.get("integrator", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad integrator settings: {exc}") from exc


def horizon(cfg: dict, default=None) -> float:
    h = cfg.get("horizon", default)
    if h is None:
        raise ConfigError("missing horizon")
    h = float(h)
    if not h > 0:
        raise ConfigError("horizon must be positive")
    return h


def _vector(v, model, what):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.size != model.dim:
        raise ConfigError(f"{what} needs {model.dim} components")
    return arr


def resolve_point(model, d, what: str):
    """A config point (``theta``, ``eta`` or Gaussian ``mu``/``sigma``) as a ChartPoint."""
    if d is None:
        raise ConfigError(f"missing {what}")
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be an object with theta, eta or mu/sigma")
    if "mu" in d or "sigma" in d:
        if not isinstance(model, mf.GaussianModel):
            raise ConfigError(f"{what}: mu/sigma only apply to the gaussian model")
        try:
            mu, sigma = float(d["mu"]), float(d["sigma"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{what} needs numeric mu and sigma") from exc
        if not sigma > 0:
            raise ConfigError(f"{what}: sigma must be positive, got {sigma}")
        return mf.theta_point(model.theta_from_mu_sigma(mu, sigma))
    if "theta" in d:
        return mf.theta_point(_vector(d["theta"], model, what))
    if "eta" in d:
        return mf.eta_point(_vector(d["eta"], model, what))
    raise ConfigError(f"{what} must give theta, eta or mu/sigma")


def resolve_reference(model, cfg):
    """Reference point or ``None`` when the config asks for the origin of the dual chart."""
    ref = cfg.get("reference")
    if ref is None:
        return None
    return resolve_point(model, ref, "reference")


def _mu_sigma(model, theta):
    if isinstance(model, mf.GaussianModel):
        mu, sigma = model.mu_sigma_from_theta(theta)
        return {"mu": mu, "sigma": sigma}
    return None


def _write_meta(out: Path, name: str, cfg: dict, **fields) -> Path:
    return io.write_json(out / name, {"command": fields.pop("command"), "config": cfg, **fields})


def _out_dir(cfg) -> Path:
    return Path(cfg.get("out", "igflow_out"))


# -- commands -----------------------------------------------------------------------------

def _run_gradient_flow(model, cfg, kind, t_end, config):
    """Integrate the configured gradient flow; returns (trajectory, theta-reference or None)."""
    if kind == "gaussian":
        if not isinstance(model, mf.GaussianModel):
            raise ConfigError("the gaussian flow needs the gaussian model")
        start = cfg.get("initial", {})
        ref = cfg.get("reference")
        if ref is None:
            raise ConfigError("the gaussian flow needs a reference mu/sigma")
        p0 = resolve_point(model, start, "initial")
        pr = resolve_point(model, ref, "reference")
        mu0, s0 = model.mu_sigma_from_theta(p0.coords)
        mur, sr = model.mu_sigma_from_theta(pr.coords)
        return flows.gaussian_flow(mu0, s0, mur, sr, (0.0, t_end), config), pr
    start = resolve_point(model, cfg.get("initial"), "initial")
    ref = resolve_reference(model, cfg)
    if kind == "theta":
        theta0 = mf.as_theta(model, start)
        if ref is None:
            return flows.theta_flow(model, theta0, (0.0, t_end), config=config), None
        if ref.chart is mf.Chart.ETA:
            return flows.theta_flow(model, theta0, (0.0, t_end), eta_r=ref.coords, config=config), None
        return flows.theta_flow(model, theta0, (0.0, t_end), ref.coords, config=config), ref
    if kind == "eta":
        eta0 = mf.as_eta(model, start)
        if ref is None:
            return flows.eta_flow(model, eta0, (0.0, t_end), theta_r=np.zeros(model.dim), config=config), None
        theta_r = mf.as_theta(model, ref)
        return flows.eta_flow(model, eta0, (0.0, t_end), theta_r=theta_r, config=config), mf.theta_point(theta_r)
    if kind == "rf":
        if "A" not in cfg:
            raise ConfigError("the rf flow needs a constant covector A")
        A = _vector(cfg["A"], model, "A")
        return flows.rf_flow(model, mf.as_theta(model, start), A, (0.0, t_end), config=config), None
    raise ConfigError(f"unknown flow {kind!r}; use theta, eta, rf or gaussian")


def cmd_flow(cfg: dict) -> int:
    model = build_model(cfg)
    kind = cfg.get("flow", "theta")
    config = build_integrator(cfg)
    t_end = horizon(cfg)
    traj, ref = _run_gradient_flow(model, cfg, kind, t_end, config)
    out = _out_dir(cfg)
    names = ["mu", "sigma"] if kind == "gaussian" else None
    io.write_trajectory_csv(out / "trajectory.csv", traj, names)
    final = traj.final
    summary = {"n_samples": len(traj), "t_final": traj.samples[-1], "final": final,
               "converged": traj.converged, "boundary_hit": traj.boundary_hit, "norm_capped": traj.norm_capped}
    if kind == "gaussian":
        summary["final_mu_sigma"] = {"mu": final[0], "sigma": final[1]}
        final_theta = model.theta_from_mu_sigma(*final)
    else:
        final_theta = mf.as_theta(model, traj.point(-1))
        ms = _mu_sigma(model, final_theta)
        if ms is not None:
            summary["final_mu_sigma"] = ms
    summary["final_eta_norm"] = float(np.linalg.norm(model.eta_of_theta(final_theta)))
    summary["final_divergence"] = (mf.divergence_theta(model, final_theta, ref.coords)
                                   if ref is not None else None)
    _write_meta(out, "run.json", cfg, command="flow", summary=summary)
    print(f"flow: {len(traj)} samples up to t={io.fmt(traj.samples[-1])}, written to {out}")
    return EXIT_OK


def build_hamiltonian(model, cfg) -> ham.HamiltonianSpec:
    hcfg = cfg.get("hamiltonian", {})
    if isinstance(hcfg, str):
        hcfg = {"kind": hcfg}
    kind = hcfg.get("kind", "conformal_ig")
    A = cfg.get("A") if kind == "rf_ig" else None
    if kind == "rf_ig" and A is None:
        raise ConfigError("rf_ig needs a constant covector A")
    try:
        return ham.HamiltonianSpec(kind, model, A=None if A is None else _vector(A, model, "A"),
                                   chart=hcfg.get("chart", "theta"), branch=int(hcfg.get("branch", 1)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _hamilton_start(spec, cfg):
    model = spec.model
    start = resolve_point(model, cfg.get("initial"), "initial")
    x0 = mf.as_eta(model, start) if spec.chart is mf.Chart.ETA else mf.as_theta(model, start)
    mom = cfg.get("momentum")
    if mom is None:
        p0 = ham.on_shell_momentum(spec, x0)
        if cfg.get("reverse_momentum", False):
            p0 = -p0
    else:
        p0 = _vector(mom, model, "momentum")
    return x0, p0


def cmd_hamilton(cfg: dict) -> int:
    model = build_model(cfg)
    spec = build_hamiltonian(model, cfg)
    x0, p0 = _hamilton_start(spec, cfg)
    traj = ham.integrate_hamilton(spec, (x0, p0), (0.0, horizon(cfg)), build_integrator(cfg))
    out = _out_dir(cfg)
    io.write_phase_csv(out / "phase.csv", traj)
    summary = {"n_samples": len(traj), "x0_final": traj.samples[-1], "H_initial": traj.H_values[0],
               "H_drift": traj.H_drift, "boundary_hit": traj.boundary_hit}
    _write_meta(out, "run.json", cfg, command="hamilton", spec=spec.to_dict(), summary=summary)
    print(f"hamilton: {len(traj)} samples, H drift {io.fmt(traj.H_drift)}, written to {out}")
    return EXIT_OK


_COUNTERPART = {"theta": "conformal_ig", "eta": "ig_sqrt_eta", "rf": "rf_ig"}


def _sup_deviation(a, b):
    """Resample the denser trajectory onto the other's samples over the shared range."""
    lo = max(a.samples[0], b.samples[0])
    hi = min(a.samples[-1], b.samples[-1])
    dens_a = len(a) / max(a.samples[-1] - a.samples[0], 1e-300)
    dens_b = len(b) / max(b.samples[-1] - b.samples[0], 1e-300)
    dense, sparse = (a, b) if dens_a >= dens_b else (b, a)
    mask = (sparse.samples >= lo) & (sparse.samples <= hi)
    t = sparse.samples[mask]
    interp = PchipInterpolator(dense.samples, dense.points, axis=0)(t)
    dev = np.max(np.abs(interp - sparse.points[mask]), axis=1)
    return t, dev


def cmd_compare(cfg: dict) -> int:
    model = build_model(cfg)
    kind = cfg.get("flow", "theta")
    if kind not in _COUNTERPART:
        raise ConfigError(f"compare supports flows {sorted(_COUNTERPART)}")
    if kind == "theta" and cfg.get("reference") is not None:
        raise ConfigError("the theta-flow comparison uses eta_r = 0; drop the reference")
    cfg_h = dict(cfg)
    cfg_h.setdefault("hamiltonian", {"kind": _COUNTERPART[kind]})
    if kind == "eta":
        cfg_h["hamiltonian"] = {**cfg_h["hamiltonian"], "chart": "eta"}
        cfg_h.setdefault("reverse_momentum", True)
    spec = build_hamiltonian(model, cfg_h)
    config = build_integrator(cfg)
    t_end = horizon(cfg)
    tol = float(cfg.get("tolerance", 1e-6))
    method = cfg.get("quadrature", "simpson")

    grad, _ = _run_gradient_flow(model, {**cfg, "reference": None}, kind, t_end, config)
    clocks = {"default": spec}
    if kind == "rf":
        A = spec.A
        clocks["potential_rate"] = lambda x: ham.rf_potential_clock_rate(model, x, A)
    x0, p0 = _hamilton_start(spec, cfg_h)
    out = _out_dir(cfg)
    report = {"flow": kind, "spec": spec.to_dict(), "tolerance": tol, "quadrature": method}
    primary = None
    for name, clock in clocks.items():
        rate = clock if callable(clock) else (lambda x: ham.clock_rate(spec, x))
        rates = np.array([rate(p) for p in grad.points])
        span = float(simpson(rates, x=grad.samples)) if len(grad) > 2 else float(rates[0] * t_end)
        phase = ham.integrate_hamilton(spec, (x0, p0), (0.0, span * 1.001 + config.step), config)
        repar = ham.reparametrize(phase, clock, method=method)
        t, dev = _sup_deviation(grad, repar)
        sup = float(dev.max()) if dev.size else float("inf")
        report[name] = {"sup_norm": sup, "t_compared": [float(t[0]), float(t[-1])] if t.size else None,
                        "n_compared": int(t.size), "H_drift": phase.H_drift}
        if primary is None:
            primary = sup
            io.write_csv(out / "deviation.csv", ["t", "deviation"], zip(t, dev))
    report["sup_norm"] = primary
    report["passed"] = bool(primary <= tol)
    _write_meta(out, "compare.json", cfg, command="compare", report=report)
    print(f"compare: sup-norm {io.fmt(primary)} (tolerance {io.fmt(tol)})")
    return EXIT_OK if report["passed"] else EXIT_TOL


def _grid_axis(spec, name):
    try:
        lo, hi, n = float(spec[0]), float(spec[1]), int(spec[2])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"grid {name} must be [lo, hi, n]") from exc
    if n < 1 or hi < lo:
        raise ConfigError(f"grid {name} must have n >= 1 and hi >= lo")
    return np.linspace(lo, hi, n)


def cmd_field(cfg: dict) -> int:
    grid = {**DEFAULT_FIELD_GRID, **cfg.get("grid", {})}
    mus = _grid_axis(grid["mu"], "mu")
    sigmas = _grid_axis(grid["sigma"], "sigma")
    if sigmas.min() <= 0:
        raise ConfigError("sigma grid must be positive")
    ref = cfg.get("reference", {"mu": 1.2, "sigma": 0.8})
    try:
        mu_r, sigma_r = float(ref["mu"]), float(ref["sigma"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("reference needs numeric mu and sigma") from exc
    if not sigma_r > 0:
        raise ConfigError("reference sigma must be positive")
    rows = []
    for mu in mus:
        for sigma in sigmas:
            dmu, dsigma = flows.gaussian_mu_sigma_rhs(mu, sigma, mu_r, sigma_r)
            rows.append((mu, sigma, dmu, dsigma))
    out = _out_dir(cfg)
    io.write_csv(out / "field.csv", ["mu", "sigma", "dmu_dt", "dsigma_dt"], rows)
    _write_meta(out, "run.json", cfg, command="field", summary={"rows": len(rows), "nx": len(mus), "ny": len(sigmas)})
    print(f"field: {len(rows)} rows written to {out}")
    return EXIT_OK


def _geometry_block(cfg):
    try:
        if "adm" in cfg:
            return st.ADMMetric.from_dict(cfg["adm"])
        if "zermelo" in cfg:
            z = cfg["zermelo"]
            W = np.asarray(z["W"], float)
            zd = st.ZermeloData(float(z["V2"]), np.asarray(z["h"], float).reshape(W.size, W.size), W)
            return st.adm_from_zermelo(zd)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, IGFlowError):
            raise
        raise ConfigError(f"bad geometry block: {exc}") from exc
    raise ConfigError("geometry needs an 'adm' or 'zermelo' block")


def cmd_geometry(cfg: dict) -> int:
    adm = _geometry_block(cfg)
    z = st.zermelo_from_adm(adm)
    rd = st.randers_from_adm(adm)
    back = st.adm_from_zermelo(z)
    rt = max(abs(back.lapse() - adm.lapse()), float(np.max(np.abs(back.shift() - adm.shift()))),
             float(np.max(np.abs(back.metric() - adm.metric()))))
    rng = np.random.default_rng(int(cfg.get("seed", 0)))
    legendre = 0.0
    for _ in range(int(cfg.get("samples", 16))):
        v = rng.normal(size=adm.dim)
        p = st.randers_legendre_momentum(rd, None, v)
        legendre = max(legendre, abs(st.null_hamiltonian(adm, None, p, 1) - st.randers_function(rd, None, v)))
    result = {
        "adm": adm.to_dict(),
        "adm_inverse": st.adm_inverse_components(adm),
        "zermelo": z.to_dict(),
        "randers": rd.to_dict(),
        "residuals": {"zermelo_round_trip": rt,
                      "zermelo_conformal_check": abs(st.zermelo_conformal_check(z) - adm.lapse() ** 2),
                      "randers_legendre": legendre},
    }
    io.write_json(_out_dir(cfg) / "geometry.json", {"command": "geometry", **result})
    print(io.dumps(result), end="")
    return EXIT_OK


def cmd_check(cfg: dict) -> int:
    ref = cfg.get("reference", {"mu": 1.2, "sigma": 0.8})
    try:
        mu_r, sigma_r = float(ref["mu"]), float(ref["sigma"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("reference needs numeric mu and sigma") from exc
    if not sigma_r > 0:
        raise ConfigError("reference sigma must be positive")
    seed = int(cfg.get("seed", 0))
    n = int(cfg.get("samples", 100))
    if n < 1:
        raise ConfigError("samples must be positive")
    results = checks.run_checks(seed, n, checks.default_checks(mu_r, sigma_r))
    passed = all(r.passed for r in results)
    report = {"command": "check", "seed": seed, "samples": n, "passed": passed,
              "checks": [r.to_dict() for r in results]}
    io.write_json(_out_dir(cfg) / "check.json", report)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {io.fmt(r.defect)} <= {io.fmt(r.tol)}")
    return EXIT_OK if passed else EXIT_TOL


COMMANDS = {"flow": cmd_flow, "hamilton": cmd_hamilton, "compare": cmd_compare,
            "field": cmd_field, "geometry": cmd_geometry, "check": cmd_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="igflow", description="Information-geometric flow experiments.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--step", type=float)
    parser.add_argument("--horizon", type=float)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IGFlowError as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
