"""Gradient flows on a dually-flat model and the integrators that drive them.

Two divergence flows are provided: the theta-chart flow, whose eta image obeys
``d eta / dt = eta - eta_r``, and the eta-chart flow, whose theta image obeys
``d theta / dt = -(theta - theta_r)``. The Randers-Finsler deformation replaces the
constant reference covector by a field ``A(theta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import RK45

from igflow.errors import (
    DomainBoundaryHit,
    DomainError,
    InsufficientSamples,
    SingularFieldError,
    StepLimitExceeded,
)
from igflow.manifold import (
    Chart,
    ChartPoint,
    DuallyFlatModel,
    as_eta,
    as_theta,
    eta_squared,
    theta_squared,
)

METHODS = ("rk4_fixed", "rk45_adaptive")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator settings.

    ``converge_tol`` stops the run early once the right-hand side norm drops below it
    (set to 0 to disable). ``max_norm`` caps the state norm, which keeps diverging
    flows finite.
    """

    method: str = "rk4_fixed"
    step: float = 1e-3
    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 10_000_000
    domain_guard: bool = True
    converge_tol: float = 1e-13
    max_norm: Optional[float] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown integrator method {self.method!r}; use one of {METHODS}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.converge_tol < 0:
            raise ValueError("converge_tol must be >= 0")


@dataclass
class Trajectory:
    """Samples of a flow: a strictly increasing parameter and one point per sample."""

    param_name: str
    samples: np.ndarray
    points: np.ndarray
    chart: Optional[Chart] = None
    scalars: dict = field(default_factory=dict)
    converged: bool = False
    boundary_hit: bool = False
    norm_capped: bool = False

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(len(self.samples), -1)
        if self.param_name not in ("t", "x0", "tau"):
            raise ValueError(f"unknown parameter name {self.param_name!r}")
        if len(self.points) != len(self.samples):
            raise ValueError("points and samples differ in length")
        if np.any(np.diff(self.samples) <= 0):
            raise ValueError("samples must be strictly increasing")
        if self.chart is not None:
            self.chart = Chart(self.chart)

    def __len__(self):
        return len(self.samples)

    @property
    def final(self) -> np.ndarray:
        return self.points[-1]

    def point(self, i: int) -> ChartPoint:
        if self.chart is None:
            raise ValueError("trajectory carries no chart")
        return ChartPoint(self.chart, self.points[i])


def _stop_value(y, config):
    return config.max_norm is not None and float(np.max(np.abs(y))) > config.max_norm


def integrate(rhs: Callable, y0, t_span: Sequence[float], config: Optional[IntegratorConfig] = None,
              domain: Optional[Callable] = None, param_name: str = "t",
              chart: Optional[Chart] = None) -> Trajectory:
    """Integrate ``dy/dt = rhs(t, y)`` over ``t_span``.

    Args:
        rhs: Right-hand side ``rhs(t, y) -> array``. May raise DomainError.
        y0: Initial state.
        t_span: ``(t0, t1)`` with ``t1 > t0``.
        config: Integrator settings; defaults to fixed-step RK4 with step 1e-3.
        domain: Optional predicate on the state. With ``config.domain_guard`` the run
            stops at the last valid state and sets ``boundary_hit``; without it a
            DomainBoundaryHit is raised.
        param_name: Name of the evolution parameter recorded on the trajectory.
        chart: Chart tag recorded on the trajectory.

    Returns:
        The sampled trajectory, including the initial state.
    """
    config = config or IntegratorConfig()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t0) and math.isfinite(t1)) or t1 <= t0:
        raise ValueError(f"invalid span {t_span}")
    y0 = np.array(y0, dtype=float).reshape(-1)
    if domain is not None and not domain(y0):
        raise DomainError(f"initial state {y0} is outside the domain")

    ts, ys = [t0], [y0]
    flags = {"converged": False, "boundary_hit": False, "norm_capped": False}

    def finish():
        return Trajectory(param_name, np.array(ts), np.array(ys), chart=chart, **flags)

    def boundary(message):
        if config.domain_guard:
            flags["boundary_hit"] = True
            return finish()
        raise DomainBoundaryHit(message, param=ts[-1], state=ys[-1], trajectory=finish())

    def valid(y):
        return np.all(np.isfinite(y)) and (domain is None or domain(y))

    try:
        if config.method == "rk4_fixed":
            h = config.step
            n = max(1, int(math.ceil((t1 - t0) / h - 1e-9)))
            if n > config.max_steps:
                raise StepLimitExceeded(f"{n} steps needed, max_steps={config.max_steps}")
            y = y0
            for k in range(n):
                t = ts[-1]
                t_next = t1 if k == n - 1 else t0 + (k + 1) * h
                dt = t_next - t
                try:
                    k1 = np.asarray(rhs(t, y), dtype=float)
                    if config.converge_tol > 0 and np.linalg.norm(k1) < config.converge_tol:
                        flags["converged"] = True
                        return finish()
                    k2 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k1), dtype=float)
                    k3 = np.asarray(rhs(t + 0.5 * dt, y + 0.5 * dt * k2), dtype=float)
                    k4 = np.asarray(rhs(t_next, y + dt * k3), dtype=float)
                except DomainError as exc:
                    return boundary(f"domain left near t={t}: {exc}")
                y_next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                if not valid(y_next):
                    return boundary(f"domain left near t={t}")
                ts.append(t_next)
                ys.append(y_next)
                y = y_next
                if _stop_value(y, config):
                    flags["norm_capped"] = True
                    return finish()
            return finish()

        # adaptive Dormand-Prince stepping; we own the loop so partial results survive
        try:
            solver = RK45(rhs, t0, y0, t1, rtol=config.rtol, atol=config.atol)
        except DomainError as exc:
            return boundary(f"domain left at t={t0}: {exc}")
        steps = 0
        while solver.status == "running":
            steps += 1
            if steps > config.max_steps:
                raise StepLimitExceeded(f"more than max_steps={config.max_steps} adaptive steps")
            try:
                msg = solver.step()
            except DomainError as exc:
                return boundary(f"domain left near t={ts[-1]}: {exc}")
            if solver.status == "failed":
                raise StepLimitExceeded(f"adaptive integration failed: {msg}")
            if not valid(solver.y):
                return boundary(f"domain left near t={ts[-1]}")
            ts.append(float(solver.t))
            ys.append(np.array(solver.y))
            if config.converge_tol > 0 and np.linalg.norm(rhs(solver.t, solver.y)) < config.converge_tol:
                flags["converged"] = True
                break
            if _stop_value(solver.y, config):
                flags["norm_capped"] = True
                break
        return finish()
    except SingularFieldError as exc:
        exc.trajectory = finish()
        raise


# -- right-hand sides -------------------------------------------------------------------

def field_value(A, theta) -> np.ndarray:
    """Evaluate a covector field given as a constant array or a callable."""
    return np.asarray(A(theta) if callable(A) else A, dtype=float)


def _reference_eta(model, theta_r, eta_r):
    if eta_r is not None:
        return as_eta(model, eta_r) if isinstance(eta_r, ChartPoint) else np.asarray(eta_r, float)
    if theta_r is None:
        return np.zeros(model.dim)
    if isinstance(theta_r, ChartPoint):
        return as_eta(model, theta_r)
    return model.eta_of_theta(theta_r)


def _reference_theta(model, eta_r, theta_r):
    if theta_r is not None:
        return as_theta(model, theta_r) if isinstance(theta_r, ChartPoint) else np.asarray(theta_r, float)
    if eta_r is None:
        return np.zeros(model.dim)
    if isinstance(eta_r, ChartPoint):
        return as_theta(model, eta_r)
    return model.theta_of_eta(eta_r)


def grad_rhs_theta(model: DuallyFlatModel, theta, theta_r=None, *, eta_r=None) -> np.ndarray:
    """``g^ij(theta) (eta_j(theta) - eta_r_j)``.

    The reference is given either as ``theta_r`` or directly as ``eta_r``; with
    neither, ``eta_r = 0`` (the flow of the bare potential).
    """
    th = as_theta(model, theta)
    ref = _reference_eta(model, theta_r, eta_r)
    return np.linalg.solve(model.hessian(th), model.eta_of_theta(th) - ref)


def grad_rhs_eta(model: DuallyFlatModel, eta, eta_r=None, *, theta_r=None) -> np.ndarray:
    """``-g_ij(eta) (theta^j(eta) - theta_r^j)``."""
    e = as_eta(model, eta)
    ref = _reference_theta(model, eta_r, theta_r)
    th = model.theta_of_eta(e)
    return -model.hessian(th) @ (th - ref)


def rf_rhs_theta(model: DuallyFlatModel, theta, A) -> np.ndarray:
    """Randers-Finsler deformed flow ``g^ij(theta) (eta_j(theta) - A_j(theta))``."""
    th = as_theta(model, theta)
    return np.linalg.solve(model.hessian(th), model.eta_of_theta(th) - field_value(A, th))


def linear_solution_theta(theta0, theta_r, t):
    """``theta_r + (theta0 - theta_r) exp(-t)``: theta image of the eta-chart flow."""
    theta0, theta_r = np.asarray(theta0, float), np.asarray(theta_r, float)
    return theta_r + (theta0 - theta_r) * np.exp(-np.asarray(t, float))


def linear_solution_eta(eta0, eta_r, t):
    """``eta_r + (eta0 - eta_r) exp(t)``: eta image of the theta-chart flow."""
    eta0, eta_r = np.asarray(eta0, float), np.asarray(eta_r, float)
    return eta_r + (eta0 - eta_r) * np.exp(np.asarray(t, float))


def gaussian_closed_form(mu0, sigma0, mu_r, sigma_r, t):
    """Exact (mu, sigma) along the Gaussian eta-chart flow towards (mu_r, sigma_r)."""
    if not (sigma0 > 0 and sigma_r > 0):
        raise DomainError("sigma0 and sigma_r must be positive")
    t = np.asarray(t, dtype=float)
    em1 = np.expm1(t)
    denom = sigma_r ** 2 + sigma0 ** 2 * em1
    mu = (mu0 * sigma_r ** 2 + mu_r * sigma0 ** 2 * em1) / denom
    sigma = sigma_r * sigma0 * np.exp(0.5 * t) / np.sqrt(denom)
    return mu, sigma


def gaussian_mu_sigma_rhs(mu, sigma, mu_r, sigma_r):
    """``(d mu/dt, d sigma/dt)`` of the Gaussian eta-chart flow in (mu, sigma)."""
    dmu = sigma ** 2 / sigma_r ** 2 * (mu_r - mu)
    dsigma = 0.5 * (sigma - sigma ** 3 / sigma_r ** 2)
    return dmu, dsigma


def potential_rate(model: DuallyFlatModel, theta, eta_r) -> float:
    """``d psi / dt`` along the theta-chart flow: ``eta^2 - g^ij eta_i eta_r_j``."""
    th = as_theta(model, theta)
    eta = model.eta_of_theta(th)
    u = np.linalg.solve(model.hessian(th), eta)
    return eta_squared(model, th) - u @ np.asarray(eta_r, float)


def entropy_rate(model: DuallyFlatModel, eta, theta_r) -> float:
    """``d psi_star / dt`` along the eta-chart flow: ``-theta^2 + g_ij theta^i theta_r^j``.

    ``psi_star`` is minus the entropy, so the entropy changes at minus this rate.
    """
    e = as_eta(model, eta)
    th = model.theta_of_eta(e)
    return -theta_squared(model, e) + th @ model.hessian(th) @ np.asarray(theta_r, float)


# -- convenience drivers ----------------------------------------------------------------

def theta_flow(model, theta0, t_span, theta_r=None, *, eta_r=None, config=None) -> Trajectory:
    """Integrate the theta-chart divergence flow; records psi per sample."""
    ref = _reference_eta(model, theta_r, eta_r)

    def rhs(t, y):
        return np.linalg.solve(model.hessian(y), model.eta_of_theta(y) - ref)

    traj = integrate(rhs, as_theta(model, theta0), t_span, config,
                     domain=model.in_domain_theta, chart=Chart.THETA)
    traj.scalars["psi"] = np.array([model.potential(p) for p in traj.points])
    return traj


def eta_flow(model, eta0, t_span, eta_r=None, *, theta_r=None, config=None) -> Trajectory:
    """Integrate the eta-chart divergence flow; records psi_star per sample."""
    ref = _reference_theta(model, eta_r, theta_r)

    def rhs(t, y):
        th = model.theta_of_eta(y)
        return -model.hessian(th) @ (th - ref)

    traj = integrate(rhs, as_eta(model, eta0), t_span, config,
                     domain=model.in_domain_eta, chart=Chart.ETA)
    traj.scalars["psi_star"] = np.array([model.dual_potential(p) for p in traj.points])
    return traj


def rf_flow(model, theta0, A, t_span, config=None) -> Trajectory:
    """Integrate the Randers-Finsler deformed theta flow."""

    def rhs(t, y):
        return rf_rhs_theta(model, y, A)

    traj = integrate(rhs, as_theta(model, theta0), t_span, config,
                     domain=model.in_domain_theta, chart=Chart.THETA)
    traj.scalars["psi"] = np.array([model.potential(p) for p in traj.points])
    return traj


def gaussian_flow(mu0, sigma0, mu_r, sigma_r, t_span, config=None) -> Trajectory:
    """Integrate the Gaussian eta-chart flow written directly in (mu, sigma)."""
    if not (sigma0 > 0 and sigma_r > 0):
        raise DomainError("sigma0 and sigma_r must be positive")

    def rhs(t, y):
        return np.array(gaussian_mu_sigma_rhs(y[0], y[1], mu_r, sigma_r))

    return integrate(rhs, [mu0, sigma0], t_span, config, domain=lambda y: y[1] > 0)


def to_chart(model, traj: Trajectory, chart: Chart) -> Trajectory:
    """Map every point of a trajectory into the other chart."""
    chart = Chart(chart)
    if traj.chart is chart:
        return traj
    if chart is Chart.THETA:
        pts = np.array([model.theta_of_eta(p) for p in traj.points])
    else:
        pts = np.array([model.eta_of_theta(p) for p in traj.points])
    return Trajectory(traj.param_name, traj.samples, pts, chart=chart, scalars=dict(traj.scalars),
                      converged=traj.converged, boundary_hit=traj.boundary_hit,
                      norm_capped=traj.norm_capped)


# -- trajectory diagnostics -------------------------------------------------------------

def fd_derivatives(samples, values):
    """Three-point first and second derivatives at interior samples.

    Works on non-uniform grids. ``values`` has shape ``(n,)`` or ``(n, d)``; the
    results have ``n - 2`` rows.
    """
    s = np.asarray(samples, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(s) < 3:
        raise InsufficientSamples(f"need at least 3 samples, got {len(s)}")
    h1 = s[1:-1] - s[:-2]
    h2 = s[2:] - s[1:-1]
    if v.ndim == 2:
        h1, h2 = h1[:, None], h2[:, None]
    vm, v0, vp = v[:-2], v[1:-1], v[2:]
    first = (-h2 / (h1 * (h1 + h2))) * vm + ((h2 - h1) / (h1 * h2)) * v0 + (h1 / (h2 * (h1 + h2))) * vp
    second = 2.0 * (vm / (h1 * (h1 + h2)) - v0 / (h1 * h2) + vp / (h2 * (h1 + h2)))
    return first, second


def pre_geodesic_residual(traj: Trajectory, model: Optional[DuallyFlatModel] = None) -> np.ndarray:
    """Norm of ``d^2 theta/dt^2 + d theta/dt`` at interior samples.

    The trajectory should be an eta-chart divergence flow. Points are read in the
    theta chart; eta-chart trajectories are converted with ``model``.
    """
    if len(traj) < 3:
        raise InsufficientSamples(f"need at least 3 samples, got {len(traj)}")
    pts = traj.points
    if traj.chart is Chart.ETA:
        if model is None:
            raise ValueError("an eta-chart trajectory needs the model to convert it")
        pts = np.array([model.theta_of_eta(p) for p in pts])
    first, second = fd_derivatives(traj.samples, pts)
    return np.linalg.norm(second + first, axis=1)


def potential_rate_defect(model, traj: Trajectory, eta_r) -> float:
    """Max gap between centred differences of psi(theta(t)) and the analytic rate."""
    pts = to_chart(model, traj, Chart.THETA).points
    psi = np.array([model.potential(p) for p in pts])
    fd, _ = fd_derivatives(traj.samples, psi)
    rates = np.array([potential_rate(model, p, eta_r) for p in pts[1:-1]])
    return float(np.max(np.abs(fd - rates)))


def entropy_rate_defect(model, traj: Trajectory, theta_r) -> float:
    """Max gap between centred differences of psi_star(eta(t)) and the analytic rate."""
    pts = to_chart(model, traj, Chart.ETA).points
    psi_star = np.array([model.dual_potential(p) for p in pts])
    fd, _ = fd_derivatives(traj.samples, psi_star)
    rates = np.array([entropy_rate(model, p, theta_r) for p in pts[1:-1]])
    return float(np.max(np.abs(fd - rates)))
