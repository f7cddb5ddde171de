"""Dually-flat models: potentials, dual coordinates, Hessian metrics and divergences.

A model is a strictly convex potential ``psi(theta)`` on an open convex domain.
Its gradient gives the dual coordinates ``eta``, its Legendre transform gives the
dual potential ``psi_star(eta)``, and the two Hessians are mutually inverse metrics.

Model methods take and return plain numpy arrays. The module-level operations
accept either arrays (read in the operation's natural chart) or :class:`ChartPoint`
objects, which are converted through the duality maps when their chart differs.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from igflow.errors import ConvergenceError, DomainError

EPS = np.finfo(float).eps


class Chart(str, enum.Enum):
    THETA = "theta"
    ETA = "eta"


@dataclass(frozen=True)
class ChartPoint:
    """A coordinate vector tagged with the chart it lives in."""

    chart: Chart
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        if coords.size < 1:
            raise ValueError("a chart point needs at least one coordinate")
        if not np.all(np.isfinite(coords)):
            raise ValueError(f"non-finite coordinates: {coords}")
        coords.setflags(write=False)
        object.__setattr__(self, "chart", Chart(self.chart))
        object.__setattr__(self, "coords", coords)

    @property
    def dim(self) -> int:
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coords, dtype=dtype)

    def __len__(self):
        return self.coords.size


def theta_point(coords) -> ChartPoint:
    return ChartPoint(Chart.THETA, coords)


def eta_point(coords) -> ChartPoint:
    return ChartPoint(Chart.ETA, coords)


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def symmetrize_cubic(c: np.ndarray) -> np.ndarray:
    """Average a rank-3 array over all six index permutations."""
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return sum(np.transpose(c, p) for p in perms) / 6.0


def spd_inverse(m: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive-definite matrix, raising DomainError otherwise."""
    try:
        low = np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise DomainError("metric is not positive definite") from exc
    low_inv = np.linalg.inv(low)
    return symmetrize(low_inv.T @ low_inv)


class DuallyFlatModel:
    """Base class for a convex potential and its Legendre dual.

    Subclasses implement ``_potential``, ``_grad``, ``_hessian`` and ``_third`` and the
    two domain predicates. The dual side defaults to Legendre inversion by damped
    Newton; subclasses with closed forms override ``_theta_of_eta`` and
    ``_dual_potential``.
    """

    name = "model"
    #: Gradient-residual tolerance of the Newton Legendre inversion.
    legendre_tol = 1e-12
    legendre_max_iter = 50

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("model dimension must be >= 1")
        self.dim = int(dim)

    # -- to be provided by subclasses -------------------------------------------------
    def in_domain_theta(self, theta: np.ndarray) -> bool:
        return True

    def in_domain_eta(self, eta: np.ndarray) -> bool:
        return True

    def _potential(self, theta):
        raise NotImplementedError

    def _grad(self, theta):
        raise NotImplementedError

    def _hessian(self, theta):
        raise NotImplementedError

    def _third(self, theta):
        raise NotImplementedError

    def _theta_guess(self, eta):
        return np.zeros(self.dim)

    # -- checked public surface -------------------------------------------------------
    def check_theta(self, theta) -> np.ndarray:
        theta = self._vector(theta)
        if not self.in_domain_theta(theta):
            raise DomainError(f"{self.name}: theta={theta} is outside the domain")
        return theta

    def check_eta(self, eta) -> np.ndarray:
        eta = self._vector(eta)
        if not self.in_domain_eta(eta):
            raise DomainError(f"{self.name}: eta={eta} is outside the domain")
        return eta

    def _vector(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise ValueError(f"{self.name}: expected {self.dim} coordinates, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise DomainError(f"{self.name}: non-finite coordinates {x}")
        return x

    def potential(self, theta) -> float:
        return float(self._potential(self.check_theta(theta)))

    def grad(self, theta) -> np.ndarray:
        return np.asarray(self._grad(self.check_theta(theta)), dtype=float)

    def hessian(self, theta) -> np.ndarray:
        return symmetrize(np.asarray(self._hessian(self.check_theta(theta)), dtype=float))

    def third(self, theta) -> np.ndarray:
        return np.asarray(self._third(self.check_theta(theta)), dtype=float)

    def eta_of_theta(self, theta) -> np.ndarray:
        return self.grad(theta)

    def theta_of_eta(self, eta, theta0=None) -> np.ndarray:
        eta = self.check_eta(eta)
        return np.asarray(self._theta_of_eta(eta, theta0), dtype=float)

    def dual_potential(self, eta) -> float:
        eta = self.check_eta(eta)
        return float(self._dual_potential(eta))

    def dual_hessian(self, eta) -> np.ndarray:
        """Hessian of the dual potential, i.e. the inverse of the primal Hessian."""
        theta = self.theta_of_eta(eta)
        return spd_inverse(self.hessian(theta))

    def dual_third(self, eta) -> np.ndarray:
        """Third derivatives of the dual potential.

        Obtained from the primal cubic tensor by raising all three indices with the
        inverse metric and flipping the sign.
        """
        theta = self.theta_of_eta(eta)
        g_inv = spd_inverse(self.hessian(theta))
        c = self.third(theta)
        return -np.einsum("ia,jb,kc,abc->ijk", g_inv, g_inv, g_inv, c)

    # -- default dual side ------------------------------------------------------------
    def _dual_potential(self, eta):
        theta = self._theta_of_eta(eta, None)
        return theta @ eta - self._potential(theta)

    def _theta_of_eta(self, eta, theta0):
        return legendre_newton(self, eta, theta0)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


def legendre_newton(model: DuallyFlatModel, eta: np.ndarray, theta0=None,
                    tol: Optional[float] = None, max_iter: Optional[int] = None) -> np.ndarray:
    """Solve ``grad psi(theta) = eta`` by damped Newton with an Armijo line search.

    The merit function is the convex ``psi(theta) - eta . theta``, whose gradient is the
    residual. Steps are halved until they stay in the domain and decrease the merit.
    """
    tol = model.legendre_tol if tol is None else tol
    max_iter = model.legendre_max_iter if max_iter is None else max_iter
    theta = np.array(model._theta_guess(eta) if theta0 is None else theta0, dtype=float)
    if not model.in_domain_theta(theta):
        raise ConvergenceError(f"initial guess {theta} is outside the domain")
    scale = max(1.0, float(np.max(np.abs(eta))))

    def merit(t):
        return model._potential(t) - eta @ t

    f = merit(theta)
    for _ in range(max_iter):
        resid = model._grad(theta) - eta
        if np.max(np.abs(resid)) <= tol * scale:
            return theta
        try:
            step = np.linalg.solve(symmetrize(model._hessian(theta)), resid)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Hessian during Legendre inversion") from exc
        lam = 1.0
        decrement = resid @ step
        while lam > 1e-12:
            trial = theta - lam * step
            if model.in_domain_theta(trial):
                f_trial = merit(trial)
                if f_trial <= f - 1e-4 * lam * decrement or lam * np.max(np.abs(step)) < 1e-14:
                    break
            lam *= 0.5
        else:
            raise ConvergenceError("line search failed during Legendre inversion")
        theta, f = trial, f_trial
    resid = model._grad(theta) - eta
    if np.max(np.abs(resid)) <= tol * scale:
        return theta
    raise ConvergenceError(
        f"Legendre inversion did not converge in {max_iter} iterations "
        f"(residual {np.max(np.abs(resid)):.3e})"
    )


class GaussianModel(DuallyFlatModel):
    """Univariate normal family in natural coordinates.

    ``theta = (mu / sigma^2, -1 / (2 sigma^2))`` and ``eta = (mu, mu^2 + sigma^2)``.
    The potential is the log-normaliser
    ``psi(theta) = -theta_1^2 / (4 theta_2) + 0.5 log(-pi / theta_2)``.
    """

    name = "gaussian"

    def __init__(self):
        super().__init__(2)

    def in_domain_theta(self, theta):
        return bool(theta[1] < 0.0)

    def in_domain_eta(self, eta):
        return bool(eta[1] - eta[0] ** 2 > 0.0)

    def _potential(self, theta):
        t1, t2 = theta
        return -t1 * t1 / (4.0 * t2) + 0.5 * math.log(-math.pi / t2)

    def _grad(self, theta):
        t1, t2 = theta
        return np.array([-t1 / (2.0 * t2), t1 * t1 / (4.0 * t2 * t2) - 1.0 / (2.0 * t2)])

    def _hessian(self, theta):
        t1, t2 = theta
        g11 = -1.0 / (2.0 * t2)
        g12 = t1 / (2.0 * t2 ** 2)
        g22 = -t1 * t1 / (2.0 * t2 ** 3) + 1.0 / (2.0 * t2 ** 2)
        return np.array([[g11, g12], [g12, g22]])

    def _third(self, theta):
        t1, t2 = theta
        c112 = 1.0 / (2.0 * t2 ** 2)
        c122 = -t1 / t2 ** 3
        c222 = 3.0 * t1 * t1 / (2.0 * t2 ** 4) - 1.0 / t2 ** 3
        c = np.empty((2, 2, 2))
        c[0, 0, 0] = 0.0
        c[0, 0, 1] = c[0, 1, 0] = c[1, 0, 0] = c112
        c[0, 1, 1] = c[1, 0, 1] = c[1, 1, 0] = c122
        c[1, 1, 1] = c222
        return c

    def _theta_of_eta(self, eta, theta0):
        var = eta[1] - eta[0] ** 2
        return np.array([eta[0] / var, -0.5 / var])

    def _dual_potential(self, eta):
        var = eta[1] - eta[0] ** 2
        return -0.5 * math.log(2.0 * math.pi * math.e * var)

    def dual_hessian(self, eta):
        e1, e2 = self.check_eta(eta)
        var = e2 - e1 * e1
        h11 = 1.0 / var + 2.0 * e1 * e1 / var ** 2
        h12 = -e1 / var ** 2
        h22 = 1.0 / (2.0 * var ** 2)
        return np.array([[h11, h12], [h12, h22]])

    # (mu, sigma) helpers
    @staticmethod
    def theta_from_mu_sigma(mu, sigma) -> np.ndarray:
        if not sigma > 0:
            raise DomainError(f"sigma must be positive, got {sigma}")
        return np.array([mu / sigma ** 2, -1.0 / (2.0 * sigma ** 2)])

    @staticmethod
    def eta_from_mu_sigma(mu, sigma) -> np.ndarray:
        if not sigma > 0:
            raise DomainError(f"sigma must be positive, got {sigma}")
        return np.array([mu, mu * mu + sigma * sigma])

    def mu_sigma_from_theta(self, theta):
        t1, t2 = self.check_theta(theta)
        var = -0.5 / t2
        return t1 * var, math.sqrt(var)

    def mu_sigma_from_eta(self, eta):
        e1, e2 = self.check_eta(eta)
        return e1, math.sqrt(e2 - e1 * e1)

    @staticmethod
    def entropy(sigma) -> float:
        """Differential entropy of N(mu, sigma^2)."""
        return 0.5 * math.log(2.0 * math.pi * math.e * sigma * sigma)


class QuadraticModel(DuallyFlatModel):
    """``psi(theta) = 0.5 theta^T Q theta`` on all of R^N; self-dual when Q = I."""

    name = "quadratic"

    def __init__(self, dim: int = 2, Q=None):
        super().__init__(dim)
        Q = np.eye(dim) if Q is None else np.array(Q, dtype=float)
        if Q.shape != (dim, dim):
            raise ValueError(f"Q must be {dim}x{dim}, got shape {Q.shape}")
        if not np.array_equal(Q, Q.T):
            raise ValueError("Q must be symmetric")
        self.Q_inv = spd_inverse(Q)
        self.Q = Q

    def _potential(self, theta):
        return 0.5 * theta @ self.Q @ theta

    def _grad(self, theta):
        return self.Q @ theta

    def _hessian(self, theta):
        return self.Q.copy()

    def _third(self, theta):
        return np.zeros((self.dim,) * 3)

    def _theta_of_eta(self, eta, theta0):
        return self.Q_inv @ eta

    def _dual_potential(self, eta):
        return 0.5 * eta @ self.Q_inv @ eta

    def dual_hessian(self, eta):
        self.check_eta(eta)
        return self.Q_inv.copy()

    def __repr__(self):
        return f"QuadraticModel(dim={self.dim})"


class PotentialModel(DuallyFlatModel):
    """A model defined by a user-supplied potential.

    Missing derivatives fall back to central differences: first and second
    derivatives use ``h = eps^(1/3) (1 + |theta_i|)``, third derivatives use
    ``eps^(1/4)`` scaling. The dual side always goes through Newton inversion unless
    ``theta_of_eta`` / ``dual_potential`` are supplied. With finite-difference
    gradients the Newton tolerance is relaxed to 1e-9, since the residual cannot
    get below the truncation error.
    """

    def __init__(self, potential: Callable, dim: int, *, grad=None, hessian=None, third=None,
                 domain_theta=None, domain_eta=None, theta_of_eta=None, dual_potential=None,
                 theta_guess=None, name: str = "potential"):
        super().__init__(dim)
        self.name = name
        self._psi = potential
        self._grad_fn = grad
        self._hess_fn = hessian
        self._third_fn = third
        self._domain_theta = domain_theta
        self._domain_eta = domain_eta
        self._theta_of_eta_fn = theta_of_eta
        self._dual_potential_fn = dual_potential
        self._guess = theta_guess
        if grad is None:
            self.legendre_tol = 1e-9

    def in_domain_theta(self, theta):
        return True if self._domain_theta is None else bool(self._domain_theta(theta))

    def in_domain_eta(self, eta):
        return True if self._domain_eta is None else bool(self._domain_eta(eta))

    def _theta_guess(self, eta):
        return np.zeros(self.dim) if self._guess is None else np.asarray(self._guess(eta), float)

    def _potential(self, theta):
        return float(self._psi(theta))

    def _grad(self, theta):
        if self._grad_fn is not None:
            return np.asarray(self._grad_fn(theta), dtype=float)
        return fd_gradient(self._potential, theta)

    def _hessian(self, theta):
        if self._hess_fn is not None:
            return np.asarray(self._hess_fn(theta), dtype=float)
        return symmetrize(fd_jacobian(self._grad, theta))

    def _third(self, theta):
        if self._third_fn is not None:
            return np.asarray(self._third_fn(theta), dtype=float)
        # difference the highest analytic derivative available, one step size throughout
        h = EPS ** 0.25 * (1.0 + np.abs(theta))
        n = self.dim
        c = np.empty((n,) * 3)
        if self._hess_fn is not None:
            for k in range(n):
                e = np.zeros(n)
                e[k] = h[k]
                c[:, :, k] = (self._hessian(theta + e) - self._hessian(theta - e)) / (2.0 * h[k])
        elif self._grad_fn is not None:
            for j in range(n):
                for k in range(j, n):
                    c[:, j, k] = c[:, k, j] = _central_mixed(self._grad, theta, h, (j, k))
        else:
            for i in range(n):
                for j in range(i, n):
                    for k in range(j, n):
                        v = _central_mixed(self._potential, theta, h, (i, j, k))
                        for perm in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                            c[perm] = v
        return symmetrize_cubic(c)

    def _theta_of_eta(self, eta, theta0):
        if self._theta_of_eta_fn is not None:
            return np.asarray(self._theta_of_eta_fn(eta), dtype=float)
        return legendre_newton(self, eta, theta0)

    def _dual_potential(self, eta):
        if self._dual_potential_fn is not None:
            return float(self._dual_potential_fn(eta))
        return super()._dual_potential(eta)


def _central_mixed(f: Callable, x: np.ndarray, h: np.ndarray, axes) -> np.ndarray:
    """Product of central differences along ``axes`` (repeats allowed)."""
    total = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=len(axes)):
        shift = np.zeros(x.size)
        for s, a in zip(signs, axes):
            shift[a] += s * h[a]
        total = total + np.prod(signs) * np.asarray(f(x + shift), dtype=float)
    return total / np.prod([2.0 * h[a] for a in axes])


def fd_gradient(f: Callable, x: np.ndarray) -> np.ndarray:
    h = EPS ** (1.0 / 3.0) * (1.0 + np.abs(x))
    out = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h[i]
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h[i])
    return out


def fd_jacobian(f: Callable, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian ``J[i, k] = d f_i / d x_k``."""
    h = EPS ** (1.0 / 3.0) * (1.0 + np.abs(x))
    cols = []
    for k in range(x.size):
        e = np.zeros(x.size)
        e[k] = h[k]
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h[k]))
    return np.stack(cols, axis=-1)


class DualModel(DuallyFlatModel):
    """The same manifold with the roles of the two charts swapped.

    Its potential is ``psi_star(eta)``, its gradient is ``theta(eta)`` and its dual is
    the original model. Running theta-chart machinery on ``DualModel(m)`` is the
    canonical exchange ``(theta, eta) -> (eta, -theta)`` up to the sign of the momentum.
    """

    def __init__(self, primal: DuallyFlatModel):
        super().__init__(primal.dim)
        self.primal = primal
        self.name = f"dual[{primal.name}]"

    def in_domain_theta(self, x):
        return self.primal.in_domain_eta(x)

    def in_domain_eta(self, x):
        return self.primal.in_domain_theta(x)

    def _potential(self, x):
        return self.primal._dual_potential(x)

    def _grad(self, x):
        return self.primal._theta_of_eta(x, None)

    def _hessian(self, x):
        return self.primal.dual_hessian(x)

    def _third(self, x):
        return self.primal.dual_third(x)

    def _theta_of_eta(self, y, theta0):
        return self.primal._grad(y)

    def _dual_potential(self, y):
        return self.primal._potential(y)

    def dual_hessian(self, y):
        return self.primal.hessian(y)


def dual_model(model: DuallyFlatModel) -> DuallyFlatModel:
    if isinstance(model, DualModel):
        return model.primal
    return DualModel(model)


# -- module-level operations ----------------------------------------------------------

def as_theta(model: DuallyFlatModel, point) -> np.ndarray:
    """Theta coordinates of ``point``; arrays are taken to be theta already."""
    if isinstance(point, ChartPoint) and point.chart is Chart.ETA:
        return model.theta_of_eta(point.coords)
    return model.check_theta(point)


def as_eta(model: DuallyFlatModel, point) -> np.ndarray:
    """Eta coordinates of ``point``; arrays are taken to be eta already."""
    if isinstance(point, ChartPoint) and point.chart is Chart.THETA:
        return model.eta_of_theta(point.coords)
    return model.check_eta(point)


def potential(model, theta) -> float:
    return model.potential(as_theta(model, theta))


def dual_potential(model, eta) -> float:
    """``psi_star(eta)``; equals minus the entropy for exponential families."""
    return model.dual_potential(as_eta(model, eta))


def eta_of_theta(model, theta) -> ChartPoint:
    return eta_point(model.eta_of_theta(as_theta(model, theta)))


def theta_of_eta(model, eta, theta0=None) -> ChartPoint:
    return theta_point(model.theta_of_eta(as_eta(model, eta), theta0))


def metric_lower(model, point) -> np.ndarray:
    """``g_ij``: Hessian of the potential at the theta image of ``point``."""
    g = model.hessian(as_theta(model, point))
    spd_inverse(g)  # positive-definiteness check
    return g


def metric_upper(model, point) -> np.ndarray:
    """``g^ij``: Hessian of the dual potential at the eta image of ``point``."""
    if isinstance(point, ChartPoint) and point.chart is Chart.THETA:
        return spd_inverse(model.hessian(point.coords))
    g = symmetrize(np.asarray(model.dual_hessian(model.check_eta(point)), dtype=float))
    spd_inverse(g)
    return g


def cubic_tensor(model, theta) -> np.ndarray:
    return model.third(as_theta(model, theta))


def alpha_connection(model, theta, alpha: float) -> np.ndarray:
    """Coefficients ``((1 - alpha) / 2) C_ijk`` of the alpha-connection in theta."""
    return 0.5 * (1.0 - alpha) * cubic_tensor(model, theta)


def dual_alpha_connection(model, eta, alpha: float) -> np.ndarray:
    """Coefficients ``((1 + alpha) / 2) C^ijk`` of the dual alpha-connection in eta."""
    return 0.5 * (1.0 + alpha) * model.dual_third(as_eta(model, eta))


def divergence_theta(model, theta, theta_r) -> float:
    """Bregman divergence of the potential, ``D(theta, theta_r)``."""
    th = as_theta(model, theta)
    th_r = as_theta(model, theta_r)
    eta_r = model.eta_of_theta(th_r)
    return model.potential(th) - model.potential(th_r) - eta_r @ (th - th_r)


def divergence_eta(model, eta, eta_r) -> float:
    """Bregman divergence of the dual potential, ``D(eta, eta_r)``."""
    e = as_eta(model, eta)
    e_r = as_eta(model, eta_r)
    theta_r = model.theta_of_eta(e_r)
    return model.dual_potential(e) - model.dual_potential(e_r) - theta_r @ (e - e_r)


def eta_squared(model, theta) -> float:
    """``eta^2(theta) = g^ij eta_i eta_j``; depends on theta only."""
    th = as_theta(model, theta)
    eta = model.eta_of_theta(th)
    return float(eta @ np.linalg.solve(model.hessian(th), eta))


def theta_squared(model, eta) -> float:
    """``theta^2(eta) = g_ij theta^i theta^j``; depends on eta only."""
    e = as_eta(model, eta)
    th = model.theta_of_eta(e)
    return float(th @ model.hessian(th) @ th)


def chi_squared(model, theta, A) -> float:
    """``g^ij (eta_i - A_i)(eta_j - A_j)``; reduces to eta^2 when A = 0."""
    th = as_theta(model, theta)
    d = model.eta_of_theta(th) - np.asarray(A, dtype=float)
    return float(d @ np.linalg.solve(model.hessian(th), d))
