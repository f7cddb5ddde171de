"""Stationary spacetimes in lapse/shift form, their Zermelo and Randers pictures,
and the bridge that turns a dually-flat model into such a spacetime.

Fields are either constants or callables of the spatial position. Everything is
evaluated pointwise; there is no atlas machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from igflow.errors import EvaluationError, IGFlowError, SignatureError, SingularFieldError, ZeroVelocityError
from igflow.flows import field_value
from igflow.manifold import DuallyFlatModel, spd_inverse

Field = Union[float, np.ndarray, Callable]

EPS_SING = 1e-12


def _eval(f: Field, x, name: str) -> np.ndarray:
    try:
        val = f(x) if callable(f) else f
        out = np.array(val, dtype=float)
    except IGFlowError:
        raise
    except Exception as exc:
        raise EvaluationError(f"field {name} failed at x={x}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"field {name} is not finite at x={x}")
    return out


def _is_spd(m: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return True


def _tolist(v) -> list:
    return np.asarray(v, float).tolist()


@dataclass(frozen=True)
class ADMMetric:
    """Lapse ``alpha``, contravariant shift ``beta`` and spatial metric.

    Give the spatial metric either covariantly (``gamma``) or contravariantly
    (``gamma_upper``); the other is its matrix inverse.
    """

    dim: int
    alpha: Field
    beta: Field
    gamma: Optional[Field] = None
    gamma_upper: Optional[Field] = None

    def __post_init__(self):
        if (self.gamma is None) == (self.gamma_upper is None):
            raise ValueError("give exactly one of gamma and gamma_upper")
        if self.dim < 1:
            raise ValueError("spatial dimension must be positive")

    @property
    def is_constant(self) -> bool:
        return not any(callable(f) for f in (self.alpha, self.beta, self.gamma, self.gamma_upper))

    def lapse(self, x=None) -> float:
        a = float(_eval(self.alpha, x, "alpha"))
        if not a > 0:
            raise EvaluationError(f"lapse must be positive, got {a}")
        return a

    def shift(self, x=None) -> np.ndarray:
        b = _eval(self.beta, x, "beta").reshape(-1)
        if b.size != self.dim:
            raise EvaluationError(f"shift has {b.size} components, expected {self.dim}")
        return b

    def _spatial(self, f, x, name):
        m = _eval(f, x, name)
        if m.shape != (self.dim, self.dim) or not np.allclose(m, m.T, rtol=1e-12, atol=0):
            raise EvaluationError(f"{name} must be a symmetric {self.dim}x{self.dim} matrix")
        m = 0.5 * (m + m.T)
        if not _is_spd(m):
            raise EvaluationError(f"{name} is not positive definite at x={x}")
        return m

    def metric(self, x=None) -> np.ndarray:
        """Covariant spatial metric gamma_ij."""
        if self.gamma is not None:
            return self._spatial(self.gamma, x, "gamma")
        return spd_inverse(self._spatial(self.gamma_upper, x, "gamma_upper"))

    def metric_upper(self, x=None) -> np.ndarray:
        """Contravariant spatial metric gamma^ij."""
        if self.gamma_upper is not None:
            return self._spatial(self.gamma_upper, x, "gamma_upper")
        return spd_inverse(self._spatial(self.gamma, x, "gamma"))

    def to_dict(self) -> dict:
        if not self.is_constant:
            raise EvaluationError("only constant-field metrics serialize")
        return {"dim": self.dim, "alpha": self.lapse(), "beta": _tolist(self.shift()),
                "gamma": _tolist(self.metric())}

    @classmethod
    def from_dict(cls, d: dict) -> "ADMMetric":
        beta = np.asarray(d["beta"], float)
        gamma = np.asarray(d["gamma"], float).reshape(beta.size, beta.size)
        return cls(dim=beta.size, alpha=float(d["alpha"]), beta=beta, gamma=gamma)


@dataclass(frozen=True)
class SpacetimeMomentum:
    p0: float
    p_spatial: np.ndarray

    def __post_init__(self):
        p = np.array(self.p_spatial, dtype=float).reshape(-1)
        if not (math.isfinite(self.p0) and np.all(np.isfinite(p))):
            raise ValueError("momentum entries must be finite")
        object.__setattr__(self, "p_spatial", p)
        object.__setattr__(self, "p0", float(self.p0))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([[self.p0], self.p_spatial])


@dataclass(frozen=True)
class ZermeloData:
    """Speed squared ``V2``, spatial metric ``h`` and wind ``W``."""

    V2: Field
    h: Field
    W: Field

    def at(self, x=None):
        V2 = float(_eval(self.V2, x, "V2"))
        h = _eval(self.h, x, "h")
        W = _eval(self.W, x, "W").reshape(-1)
        if not V2 > 0:
            raise SignatureError(f"V2 = {V2} is not positive")
        if not 1.0 - W @ h @ W > 0:
            raise SignatureError("wind is not slower than unit speed in h")
        return V2, h, W

    def to_dict(self) -> dict:
        V2, h, W = self.at()
        return {"V2": V2, "h": _tolist(h), "W": _tolist(W)}


@dataclass(frozen=True)
class RandersData:
    """Randers structure ``F(v) = sqrt(a_ij v^i v^j) + b_i v^i``."""

    a: Field
    b: Field

    def at(self, x=None):
        a = _eval(self.a, x, "a")
        b = _eval(self.b, x, "b").reshape(-1)
        if not _is_spd(a):
            raise SignatureError("Randers metric a is not positive definite")
        if not b @ np.linalg.solve(a, b) < 1.0:
            raise SignatureError("|b|_a must be below 1")
        return a, b

    def to_dict(self) -> dict:
        a, b = self.at()
        return {"a": _tolist(a), "b": _tolist(b)}


# -- ADM algebra -------------------------------------------------------------------------

def adm_metric_components(adm: ADMMetric, x=None) -> np.ndarray:
    """The (N+1)x(N+1) spacetime metric with the time coordinate first."""
    a, b, g = adm.lapse(x), adm.shift(x), adm.metric(x)
    b_low = g @ b
    out = np.empty((adm.dim + 1, adm.dim + 1))
    out[0, 0] = -a * a + b_low @ b
    out[0, 1:] = out[1:, 0] = b_low
    out[1:, 1:] = g
    return out


def adm_inverse_components(adm: ADMMetric, x=None) -> np.ndarray:
    """Inverse spacetime metric in closed block form."""
    a, b, gu = adm.lapse(x), adm.shift(x), adm.metric_upper(x)
    a2 = a * a
    out = np.empty((adm.dim + 1, adm.dim + 1))
    out[0, 0] = -1.0 / a2
    out[0, 1:] = out[1:, 0] = b / a2
    out[1:, 1:] = gu - np.outer(b, b) / a2
    return out


def null_condition_residual(adm: ADMMetric, x, P: SpacetimeMomentum) -> float:
    """``omega^2 = G^{mu nu} p_mu p_nu``; zero exactly for null momenta."""
    p = P.as_vector()
    if p.size != adm.dim + 1:
        raise ValueError("momentum dimension does not match the metric")
    return float(p @ adm_inverse_components(adm, x) @ p)


def _shift_and_root(adm, x, p):
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.size != adm.dim:
        raise ValueError("momentum dimension does not match the metric")
    a = adm.lapse(x)
    gu = adm.metric_upper(x)
    bp = float(adm.shift(x) @ p)
    root = a * math.sqrt(max(float(p @ gu @ p), 0.0))
    return bp, root, a, gu, p


def _branch(branch) -> int:
    if branch in (1, "+", "plus"):
        return 1
    if branch in (-1, "-", "minus"):
        return -1
    raise ValueError(f"branch must be +1 or -1, got {branch!r}")


def solve_p0(adm: ADMMetric, x, p_spatial, branch=1) -> float:
    """Time component that makes ``(p0, p)`` null: ``beta.p +/- sqrt(alpha^2 gamma^-1(p, p))``."""
    bp, root, *_ = _shift_and_root(adm, x, p_spatial)
    return bp + _branch(branch) * root


def null_hamiltonian(adm: ADMMetric, x, p_spatial, branch=1) -> float:
    """``-beta.p +/- sqrt(alpha^2 gamma^-1(p, p))``, first-order homogeneous in p."""
    bp, root, *_ = _shift_and_root(adm, x, p_spatial)
    return -bp + _branch(branch) * root


def null_hamiltonian_grad_p(adm: ADMMetric, x, p_spatial, branch=1) -> np.ndarray:
    bp, root, a, gu, p = _shift_and_root(adm, x, p_spatial)
    if root == 0.0:
        raise SingularFieldError("null Hamiltonian has no momentum gradient at p = 0")
    return -adm.shift(x) + _branch(branch) * a * a * (gu @ p) / root


def null_residual_factorized(adm: ADMMetric, x, p_spatial, p0: float = -1.0) -> float:
    """``omega^2`` rebuilt from the two branch roots of the null condition in p0.

    ``omega^2 = -(1/alpha^2) (p0 - beta.p - R)(p0 - beta.p + R)`` with
    ``R = sqrt(alpha^2 gamma^-1(p, p))``; the default ``p0 = -1`` is the convention used
    to identify the flows.
    """
    bp, root, a, *_ = _shift_and_root(adm, x, p_spatial)
    return -(p0 - bp - root) * (p0 - bp + root) / (a * a)


def adm_hamilton_rhs(adm: ADMMetric, x, p_spatial, branch=1):
    """Hamilton's equations of the reduced null Hamiltonian; position gradient by differences."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p_spatial, dtype=float)
    h = 1e-6 * (1.0 + np.abs(x))
    gx = np.empty(x.size)
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h[k]
        gx[k] = (null_hamiltonian(adm, x + e, p, branch) - null_hamiltonian(adm, x - e, p, branch)) / (2 * h[k])
    return null_hamiltonian_grad_p(adm, x, p, branch), -gx


# -- Zermelo and Randers ------------------------------------------------------------------

def _zermelo_values(a, b, g):
    V2 = a * a - float(b @ g @ b)
    if not V2 > 0:
        raise SignatureError(f"shift outruns the lapse: V2 = {V2:.6g}")
    return V2, g / (a * a), 0.0 - b


def _pointwise(fn, source, n_out):
    """Build constant or lazily evaluated outputs of ``fn(x)``."""
    if source.is_constant:
        return fn(None)
    return tuple((lambda x, i=i: fn(x)[i]) for i in range(n_out))


def zermelo_from_adm(adm: ADMMetric) -> ZermeloData:
    fn = lambda x: _zermelo_values(adm.lapse(x), adm.shift(x), adm.metric(x))  # noqa: E731
    return ZermeloData(*_pointwise(fn, adm, 3))


def adm_from_zermelo(z: ZermeloData, dim: Optional[int] = None) -> ADMMetric:
    def fn(x):
        V2, h, W = z.at(x)
        a2 = V2 / (1.0 - W @ h @ W)
        return math.sqrt(a2), -W, a2 * h

    constant = not any(callable(f) for f in (z.V2, z.h, z.W))
    if constant:
        alpha, beta, gamma = fn(None)
        return ADMMetric(dim=beta.size, alpha=alpha, beta=beta, gamma=gamma)
    if dim is None:
        raise ValueError("dim is required for position-dependent Zermelo data")
    return ADMMetric(dim=dim, alpha=lambda x: fn(x)[0], beta=lambda x: fn(x)[1], gamma=lambda x: fn(x)[2])


def zermelo_conformal_check(z: ZermeloData, x=None) -> float:
    """``V2 / (1 - h(W, W))``, which equals the squared lapse."""
    V2, h, W = z.at(x)
    return V2 / (1.0 - W @ h @ W)


def randers_from_adm(adm: ADMMetric, x=None) -> RandersData:
    """Randers data at ``x`` whose Legendre dual is the + branch null Hamiltonian."""
    a = adm.lapse(x)
    gt = adm.metric(x) / (a * a)
    b_up = adm.shift(x)
    b_low = gt @ b_up
    xi = 1.0 - float(b_low @ b_up)
    if not xi > 0:
        raise SignatureError(f"shift outruns the lapse: xi = {xi:.6g}")
    return RandersData(a=(xi * gt + np.outer(b_low, b_low)) / xi ** 2, b=b_low / xi)


def randers_function(rd: RandersData, x, v) -> float:
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.any(v):
        raise ZeroVelocityError("Randers function evaluated at v = 0")
    a, b = rd.at(x)
    return math.sqrt(float(v @ a @ v)) + float(b @ v)


def randers_legendre_momentum(rd: RandersData, x, v) -> np.ndarray:
    """``p = d(F^2/2)/dv = F * dF/dv``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if not np.any(v):
        raise ZeroVelocityError("Randers momentum evaluated at v = 0")
    a, b = rd.at(x)
    av = a @ v
    norm = math.sqrt(float(v @ av))
    F = norm + float(b @ v)
    return F * (av / norm + b)


# -- conformal rescaling ------------------------------------------------------------------

def conformal_rescale(metric, omega2: Field):
    """Multiply a metric by ``Omega^2``.

    Args:
        metric: ADMMetric (lapse scales by Omega, spatial metric by Omega^2, shift is
            unchanged) or a spacetime metric matrix evaluated at a point.
        omega2: Positive constant, or callable of position for ADMMetric input.
    """
    if isinstance(metric, ADMMetric):
        def o2(x):
            w = float(_eval(omega2, x, "omega2"))
            if not w > 0:
                raise EvaluationError(f"Omega^2 must be positive, got {w}")
            return w

        if metric.is_constant and not callable(omega2):
            w = o2(None)
            return ADMMetric(dim=metric.dim, alpha=math.sqrt(w) * metric.lapse(), beta=metric.shift(),
                             gamma=w * metric.metric())
        return ADMMetric(dim=metric.dim, alpha=lambda x: math.sqrt(o2(x)) * metric.lapse(x),
                         beta=metric.beta, gamma=lambda x: o2(x) * metric.metric(x))
    w = float(omega2(None) if callable(omega2) else omega2)
    if not w > 0:
        raise EvaluationError(f"Omega^2 must be positive, got {w}")
    return w * np.asarray(metric, dtype=float)


def rescale_parameter(samples, omega2_values, method: str = "simpson") -> np.ndarray:
    """New evolution parameter with ``d t_new = Omega^2 dt``, starting where ``samples`` start."""
    s = np.asarray(samples, dtype=float)
    w = np.broadcast_to(np.asarray(omega2_values, dtype=float), s.shape)
    if s.size == 0:
        return s.copy()
    if np.all(w == w[0]):
        return s[0] + w[0] * (s - s[0])
    if method == "trapezoid" or s.size < 3:
        return s[0] + cumulative_trapezoid(w, s, initial=0.0)
    return s[0] + cumulative_simpson(w, x=s, initial=0.0)


# -- bridge from a dually-flat model ------------------------------------------------------

def ig_to_adm(model: DuallyFlatModel, A=None) -> ADMMetric:
    """Stationary metric over the theta chart whose null Hamiltonian is the IG one.

    Without ``A``: ``alpha^2 = 1/eta^2``, ``beta = 0``, ``gamma^ij = g^ij``.
    With ``A``: ``1/alpha^2 = xi chi^2``, ``beta^i = A^i/(xi chi^2)`` and
    ``gamma^ij = g^ij + A^i A^j/(xi chi^2)``.
    """
    n = model.dim

    def parts(x):
        th = model.check_theta(x)
        G = spd_inverse(model.hessian(th))
        eta = model.eta_of_theta(th)
        u = G @ eta
        e = float(eta @ u)
        if A is None:
            if e <= EPS_SING:
                raise SingularFieldError(f"eta^2 = {e:.3e} is singular")
            return 1.0 / math.sqrt(e), np.zeros(n), G
        Av = field_value(A, th)
        Au = G @ Av
        s = e - 2.0 * float(Av @ u)
        if s <= EPS_SING:
            raise SingularFieldError(f"xi * chi^2 = {s:.3e} is singular")
        return 1.0 / math.sqrt(s), Au / s, G + np.outer(Au, Au) / s

    return ADMMetric(dim=n, alpha=lambda x: parts(x)[0], beta=lambda x: parts(x)[1],
                     gamma_upper=lambda x: parts(x)[2])
