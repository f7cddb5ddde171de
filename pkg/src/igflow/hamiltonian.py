"""Hamiltonians whose flows reproduce the information-geometric gradient flows.

Four families are implemented on a dually-flat model, each with analytic momentum
and position gradients (the latter use the model's cubic tensor):

* ``sqrt``:       sqrt(g^ij p_i p_j) - sqrt(eta^2(theta))
* ``quadratic``:  (g^ij p_i p_j - eta^2(theta)) / 2
* ``conformal``:  sqrt(g^ij p_i p_j / eta^2(theta))          (null geodesic, degree 1)
* ``rf``:         Randers-Finsler deformation of ``conformal`` by a covector field A

The eta-chart variants run the same formulas on :class:`~igflow.manifold.DualModel`.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from igflow.errors import DomainError, InsufficientSamples, SingularFieldError
from igflow.flows import IntegratorConfig, Trajectory, fd_derivatives, field_value, integrate
from igflow.manifold import (
    Chart,
    ChartPoint,
    DuallyFlatModel,
    DualModel,
    fd_jacobian,
    spd_inverse,
)

#: Threshold below which eta^2, theta^2 or xi*chi^2 count as singular.
EPS_SING = 1e-12

KINDS = ("ig_sqrt_theta", "ig_sqrt_eta", "ig_quadratic_theta", "ig_quadratic_eta",
         "conformal_ig", "rf_ig")

_BASE = {
    "ig_sqrt_theta": ("sqrt", Chart.THETA),
    "ig_sqrt_eta": ("sqrt", Chart.ETA),
    "ig_quadratic_theta": ("quadratic", Chart.THETA),
    "ig_quadratic_eta": ("quadratic", Chart.ETA),
    "conformal_ig": ("conformal", None),
    "rf_ig": ("rf", None),
}


@dataclass(frozen=True)
class HamiltonianSpec:
    """Which Hamiltonian to use, on which model and chart.

    ``chart`` only matters for ``conformal_ig`` and ``rf_ig``; the other kinds fix it
    by name. ``A`` is a constant covector or a callable ``theta -> covector`` and must
    be given exactly when ``kind == "rf_ig"``.
    """

    kind: str
    model: DuallyFlatModel
    A: object = None
    chart: Chart = Chart.THETA
    branch: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown Hamiltonian kind {self.kind!r}; use one of {KINDS}")
        if (self.A is not None) != (self.kind == "rf_ig"):
            raise ValueError("A must be given for rf_ig and only for rf_ig")
        if self.branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        fixed = _BASE[self.kind][1]
        object.__setattr__(self, "chart", Chart(fixed if fixed is not None else self.chart))

    @property
    def base(self) -> str:
        return _BASE[self.kind][0]

    @cached_property
    def working_model(self) -> DuallyFlatModel:
        """The model whose theta chart the position lives in."""
        if self.chart is Chart.ETA:
            return DualModel(self.model)
        return self.model

    @property
    def degree_one(self) -> bool:
        """True for the Hamiltonians homogeneous of first order in the momentum."""
        return self.base in ("conformal", "rf")

    def to_dict(self) -> dict:
        A = self.A
        if A is not None and not callable(A):
            A = [float(v) for v in np.asarray(A, float)]
        elif callable(A):
            A = "<callable>"
        return {"kind": self.kind, "model": self.model.name, "chart": self.chart.value,
                "branch": self.branch, "A": A}


@dataclass(frozen=True)
class PhaseState:
    position: ChartPoint
    momentum: np.ndarray

    def __post_init__(self):
        p = np.array(self.momentum, dtype=float).reshape(-1)
        if p.size != self.position.dim:
            raise ValueError("momentum and position differ in length")
        if not np.all(np.isfinite(p)):
            raise ValueError("non-finite momentum")
        p.setflags(write=False)
        object.__setattr__(self, "momentum", p)


@dataclass
class PhaseTrajectory:
    """Samples of a Hamiltonian flow with positions, momenta and H per sample."""

    param_name: str
    samples: np.ndarray
    positions: np.ndarray
    momenta: np.ndarray
    H_values: np.ndarray
    chart: Chart = Chart.THETA
    boundary_hit: bool = False
    converged: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1)
        n = len(self.samples)
        self.positions = np.asarray(self.positions, dtype=float).reshape(n, -1)
        self.momenta = np.asarray(self.momenta, dtype=float).reshape(n, -1)
        self.H_values = np.asarray(self.H_values, dtype=float).reshape(-1)
        if not (len(self.positions) == len(self.momenta) == len(self.H_values) == n):
            raise ValueError("phase trajectory arrays differ in length")
        if np.any(np.diff(self.samples) <= 0):
            raise ValueError("samples must be strictly increasing")
        self.chart = Chart(self.chart)

    def __len__(self):
        return len(self.samples)

    @property
    def H_drift(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(np.max(np.abs(self.H_values - self.H_values[0])))

    def state(self, i: int) -> PhaseState:
        return PhaseState(ChartPoint(self.chart, self.positions[i]), self.momenta[i])

    def position_trajectory(self) -> Trajectory:
        return Trajectory(self.param_name, self.samples, self.positions, chart=self.chart,
                          scalars={"H": self.H_values}, boundary_hit=self.boundary_hit,
                          converged=self.converged)


# -- evaluation core ------------------------------------------------------------------

class _Geometry:
    """Metric quantities at one position, shared by values and gradients."""

    __slots__ = ("x", "G", "eta", "C", "model")

    def __init__(self, model: DuallyFlatModel, x, need_third: bool):
        self.model = model
        self.x = model.check_theta(x)
        self.G = spd_inverse(model.hessian(self.x))
        self.eta = model.eta_of_theta(self.x)
        self.C = model.third(self.x) if need_third else None

    def contract(self, a, b):
        """``C_abk a^a b^b`` as a covector in k."""
        return np.einsum("abk,a,b->k", self.C, a, b)


def _A_value_and_jacobian(A, x, need_jac):
    val = field_value(A, x)
    if not need_jac:
        return val, None
    if callable(A):
        jac = getattr(A, "jacobian", None)
        J = np.asarray(jac(x), float) if jac is not None else fd_jacobian(lambda y: field_value(A, y), x)
    else:
        J = np.zeros((x.size, x.size))
    return val, J


def _evaluate(spec: HamiltonianSpec, x, p, want_grads: bool):
    """Return ``H`` and, optionally, ``(dH/dp, dH/dx)``."""
    geo = _Geometry(spec.working_model, x, need_third=want_grads)
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != geo.x.size:
        raise ValueError("momentum and position differ in length")
    G, eta = geo.G, geo.eta
    w = G @ p
    u = G @ eta
    q = float(p @ w)
    e = float(eta @ u)
    base = spec.base

    if base == "sqrt":
        H = math.sqrt(q) - math.sqrt(max(e, 0.0))
        if not want_grads:
            return H
        if q <= 0.0:
            raise SingularFieldError("sqrt Hamiltonian has no momentum gradient at p = 0")
        if e <= EPS_SING:
            raise SingularFieldError(f"eta^2 = {e:.3e} is singular")
        dq = -geo.contract(w, w)
        de = 2.0 * eta - geo.contract(u, u)
        return H, w / math.sqrt(q), dq / (2.0 * math.sqrt(q)) - de / (2.0 * math.sqrt(e))

    if base == "quadratic":
        H = 0.5 * q - 0.5 * e
        if not want_grads:
            return H
        dq = -geo.contract(w, w)
        de = 2.0 * eta - geo.contract(u, u)
        return H, w, 0.5 * dq - 0.5 * de

    if base == "conformal":
        if e <= EPS_SING:
            raise SingularFieldError(f"eta^2 = {e:.3e} is singular")
        H = math.sqrt(q / e)
        if not want_grads:
            return H
        if H == 0.0:
            raise SingularFieldError("conformal Hamiltonian has no gradient at p = 0")
        dq = -geo.contract(w, w)
        de = 2.0 * eta - geo.contract(u, u)
        return H, w / (e * H), (dq / e - q * de / e ** 2) / (2.0 * H)

    # Randers-Finsler deformation
    A, J = _A_value_and_jacobian(spec.A, geo.x, want_grads)
    Av = G @ A
    a = float(Av @ p)
    s = e - 2.0 * float(A @ u)  # xi * chi^2 = chi^2 - A^2
    if s <= EPS_SING:
        raise SingularFieldError(f"xi * chi^2 = {s:.3e} is singular")
    R2 = q / s + a * a / (s * s)
    R = math.sqrt(max(R2, 0.0))
    H = -a / s + R
    if not want_grads:
        return H
    if R == 0.0:
        raise SingularFieldError("Randers Hamiltonian has no gradient at p = 0")
    grad_p = -Av / s + (w / s + a * Av / (s * s)) / R
    dq = -geo.contract(w, w)
    de = 2.0 * eta - geo.contract(u, u)
    da = J.T @ w - geo.contract(Av, w)
    ds = de - 2.0 * (J.T @ u - geo.contract(Av, u) + A)
    grad_x = (-da / s + a * ds / s ** 2
              + (dq / s - q * ds / s ** 2 + 2.0 * a * da / s ** 2 - 2.0 * a * a * ds / s ** 3) / (2.0 * R))
    return H, grad_p, grad_x


def _split_state(state, p=None):
    if isinstance(state, PhaseState):
        return np.asarray(state.position.coords), np.asarray(state.momentum)
    if p is not None:
        return np.asarray(state, float), np.asarray(p, float)
    x, p = state
    return np.asarray(x, float), np.asarray(p, float)


def hamiltonian_value(spec: HamiltonianSpec, state, p=None) -> float:
    x, p = _split_state(state, p)
    return float(_evaluate(spec, x, p, want_grads=False))


def hamilton_rhs(spec: HamiltonianSpec, state, p=None):
    """Hamilton's equations ``(dH/dp, -dH/dx)`` at a phase state."""
    x, p = _split_state(state, p)
    _, gp, gx = _evaluate(spec, x, p, want_grads=True)
    return gp, -gx


def position_gradient_fd(spec: HamiltonianSpec, state, p=None) -> np.ndarray:
    """Central-difference ``dH/dx``; an independent check on the analytic gradient."""
    x, p = _split_state(state, p)
    h = 1e-6 * (1.0 + np.abs(x))
    out = np.empty(x.size)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h[k]
        out[k] = (hamiltonian_value(spec, x + e, p) - hamiltonian_value(spec, x - e, p)) / (2.0 * h[k])
    return out


# -- named Hamiltonians ------------------------------------------------------------------

def ig_hamiltonian_theta(model, theta, p) -> float:
    """``sqrt(g^ij p_i p_j) - sqrt(eta^2(theta))``; zero on-shell."""
    return hamiltonian_value(HamiltonianSpec("ig_sqrt_theta", model), theta, p)


def ig_hamiltonian_eta(model, eta, p) -> float:
    """``sqrt(g_ij p^i p^j) - sqrt(theta^2(eta))``; zero when ``p = theta(eta)``."""
    return hamiltonian_value(HamiltonianSpec("ig_sqrt_eta", model), eta, p)


def ig_hamiltonian_quadratic(model, point, p, chart: Union[Chart, str] = Chart.THETA) -> float:
    kind = "ig_quadratic_theta" if Chart(chart) is Chart.THETA else "ig_quadratic_eta"
    return hamiltonian_value(HamiltonianSpec(kind, model), point, p)


def conformal_ig_hamiltonian(model, theta, p) -> float:
    """``sqrt(g^ij p_i p_j / eta^2(theta))``; equals 1 on-shell."""
    return hamiltonian_value(HamiltonianSpec("conformal_ig", model), theta, p)


def rf_ig_hamiltonian(model, theta, p, A) -> float:
    """Randers-Finsler deformed null Hamiltonian; equals 1 on-shell."""
    return hamiltonian_value(HamiltonianSpec("rf_ig", model, A=A), theta, p)


def on_shell_momentum(spec: HamiltonianSpec, x) -> np.ndarray:
    """Gradient of the working potential at ``x``, the momentum that makes H null."""
    return spec.working_model.eta_of_theta(x)


# -- flows --------------------------------------------------------------------------------

def integrate_hamilton(spec: HamiltonianSpec, state0, span, config: Optional[IntegratorConfig] = None,
                       p0=None) -> PhaseTrajectory:
    """Integrate Hamilton's equations in the parameter x0 and record H per sample.

    Args:
        spec: Hamiltonian to integrate.
        state0: PhaseState, ``(x, p)`` pair, or a position (then ``p0`` or the on-shell
            momentum is used).
        span: ``(x0_start, x0_end)``.
        config: Integrator settings.
    """
    model = spec.working_model
    if isinstance(state0, (PhaseState, tuple)):
        x0, mom0 = _split_state(state0)
    else:
        x0 = np.asarray(state0, float)
        mom0 = on_shell_momentum(spec, x0) if p0 is None else np.asarray(p0, float)
    x0 = model.check_theta(x0)
    n = x0.size

    def rhs(t, y):
        gp, gx = hamilton_rhs(spec, y[:n], y[n:])
        return np.concatenate([gp, gx])

    hamiltonian_value(spec, x0, mom0)  # surfaces singular starts before stepping
    traj = integrate(rhs, np.concatenate([x0, mom0]), span, config,
                     domain=lambda y: model.in_domain_theta(y[:n]), param_name="x0")
    H = np.array([hamiltonian_value(spec, y[:n], y[n:]) for y in traj.points])
    return PhaseTrajectory("x0", traj.samples, traj.points[:, :n], traj.points[:, n:], H,
                           chart=spec.chart, boundary_hit=traj.boundary_hit,
                           converged=traj.converged, meta={"spec": spec.to_dict()})


def clock_rate(spec: HamiltonianSpec, x) -> float:
    """``dx0/dt`` that maps an on-shell Hamiltonian flow onto the gradient flow.

    eta^2 for ``conformal`` (theta^2 in the eta chart), its square root for ``sqrt``,
    1 for ``quadratic`` and xi*chi^2 for ``rf``.
    """
    if spec.base == "quadratic":
        return 1.0
    geo = _Geometry(spec.working_model, x, need_third=False)
    u = geo.G @ geo.eta
    e = float(geo.eta @ u)
    if spec.base == "rf":
        return e - 2.0 * float(field_value(spec.A, geo.x) @ u)
    if spec.base == "sqrt":
        return math.sqrt(max(e, 0.0))
    return e


def rf_potential_clock_rate(model, theta, A) -> float:
    """``eta . g^-1 (eta - A)``, the rate d psi/dt along the deformed flow.

    Using this instead of xi*chi^2 as ``dx0/dt`` maps the Randers-Finsler Hamiltonian
    flow exactly onto the deformed gradient flow (the two differ by
    ``A . g^-1 eta`` in the denominator).
    """
    th = model.check_theta(theta)
    eta = model.eta_of_theta(th)
    return float(eta @ np.linalg.solve(model.hessian(th), eta - field_value(A, th)))


def reparametrize(traj: Union[PhaseTrajectory, Trajectory], rate, method: str = "simpson",
                  t_start: float = 0.0) -> Trajectory:
    """Change the evolution parameter from x0 to t with ``dt = dx0 / rate(x)``.

    Args:
        traj: Trajectory sampled in x0.
        rate: A HamiltonianSpec (uses :func:`clock_rate`), a model (uses eta^2), or a
            callable ``position -> dx0/dt``.
        method: Cumulative quadrature, ``"simpson"`` (default) or ``"trapezoid"``.
        t_start: Value of t at the first sample.

    Returns:
        Position trajectory with ``param_name == "t"``; the original parameter is kept
        in ``scalars["x0"]``.
    """
    if isinstance(traj, PhaseTrajectory):
        positions, chart = traj.positions, traj.chart
        scalars = {"H": traj.H_values}
    else:
        positions, chart = traj.points, traj.chart
        scalars = dict(traj.scalars)
    if len(traj) == 0:
        return Trajectory("t", np.empty(0), np.empty((0, positions.shape[1] if positions.ndim == 2 else 0)),
                          chart=chart)
    if isinstance(rate, HamiltonianSpec):
        spec = rate
        rate_fn = lambda x: clock_rate(spec, x)  # noqa: E731
    elif isinstance(rate, DuallyFlatModel):
        model = rate
        rate_fn = lambda x: clock_rate(HamiltonianSpec("conformal_ig", model), x)  # noqa: E731
    else:
        rate_fn = rate
    rates = np.array([float(rate_fn(x)) for x in positions])
    if np.any(rates <= EPS_SING):
        raise SingularFieldError(f"reparametrization rate fell to {rates.min():.3e}")
    inv = 1.0 / rates
    x0 = traj.samples
    if len(traj) == 1:
        t = np.array([t_start])
    elif method == "trapezoid" or len(traj) < 3:
        t = t_start + cumulative_trapezoid(inv, x0, initial=0.0)
    elif method == "simpson":
        t = t_start + cumulative_simpson(inv, x=x0, initial=0.0)
    else:
        raise ValueError(f"unknown quadrature {method!r}")
    scalars["x0"] = x0
    return Trajectory("t", t, positions, chart=chart, scalars=scalars,
                      boundary_hit=traj.boundary_hit)


# -- integrability diagnostics ---------------------------------------------------------

def euler_homogeneity_defect(spec: HamiltonianSpec, state, p=None, method: str = "analytic") -> float:
    """``p . dH/dp - H``; zero exactly when H is first-order homogeneous in p."""
    x, p = _split_state(state, p)
    if method == "analytic":
        H, gp, _ = _evaluate(spec, x, p, want_grads=True)
        return float(p @ gp - H)
    if method == "fd":
        h = 1e-5
        d = (hamiltonian_value(spec, x, (1 + h) * p) - hamiltonian_value(spec, x, (1 - h) * p)) / (2 * h)
        return float(d - hamiltonian_value(spec, x, p))
    raise ValueError(f"unknown method {method!r}")


def null_lagrangian_residual(spec: HamiltonianSpec, traj: PhaseTrajectory) -> np.ndarray:
    """``p . dx/dparam - H`` at interior samples, velocities by centred differences."""
    if not spec.degree_one:
        raise ValueError(f"{spec.kind} is not homogeneous of first order in the momentum")
    if len(traj) < 3:
        raise InsufficientSamples(f"need at least 3 samples, got {len(traj)}")
    vel, _ = fd_derivatives(traj.samples, traj.positions)
    p = traj.momenta[1:-1]
    return np.einsum("ij,ij->i", p, vel) - traj.H_values[1:-1]


def on_shell_defect(spec: HamiltonianSpec, traj: PhaseTrajectory) -> float:
    """Largest ``|p - grad psi(x)|`` along a trajectory."""
    model = spec.working_model
    return float(max(np.max(np.abs(p - model.eta_of_theta(x)))
                     for x, p in zip(traj.positions, traj.momenta)))
