from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import PchipInterpolator

from igflow import flows, hamiltonian as ham, manifold as mf
from igflow.errors import DomainError, InsufficientSamples, SingularFieldError

G = mf.GaussianModel()
Q = mf.QuadraticModel()
CFG = flows.IntegratorConfig(step=1e-3)
TH01 = G.theta_from_mu_sigma(0, 1)

gauss_states = st.tuples(st.floats(-2, 2), st.floats(0.3, 2), st.floats(-2, 2), st.floats(-2, 2))


def _state(mu, sigma, p1, p2):
    return G.theta_from_mu_sigma(mu, sigma), np.array([p1, p2])


def test_spec_validation():
    with pytest.raises(ValueError):
        ham.HamiltonianSpec("rf_ig", G)
    with pytest.raises(ValueError):
        ham.HamiltonianSpec("conformal_ig", G, A=np.zeros(2))
    with pytest.raises(ValueError):
        ham.HamiltonianSpec("nope", G)
    assert ham.HamiltonianSpec("ig_sqrt_eta", G).chart is mf.Chart.ETA
    assert ham.HamiltonianSpec("conformal_ig", G, chart="eta").chart is mf.Chart.ETA


def test_phase_state_validation():
    with pytest.raises(ValueError):
        ham.PhaseState(mf.theta_point([1.0, -1.0]), [1.0])
    s = ham.PhaseState(mf.theta_point([1.0, -1.0]), [1.0, 2.0])
    assert not s.momentum.flags.writeable


def test_ig_sqrt_examples():
    assert ham.ig_hamiltonian_theta(G, TH01, G.eta_of_theta(TH01)) == pytest.approx(0, abs=1e-15)
    assert ham.ig_hamiltonian_theta(Q, [3, 4], [0, 0]) == pytest.approx(-5)
    assert ham.ig_hamiltonian_theta(G, TH01, [1, 0]) == pytest.approx(1 - math.sqrt(0.5), abs=1e-7)
    eta = np.array([0.0, 1.0])
    assert ham.ig_hamiltonian_eta(G, eta, G.theta_of_eta(eta)) == pytest.approx(0, abs=1e-15)
    assert ham.ig_hamiltonian_eta(Q, [3, 4], [1, 2]) == ham.ig_hamiltonian_theta(Q, [3, 4], [1, 2])
    with pytest.raises(DomainError):
        ham.ig_hamiltonian_theta(G, [0, 0.5], [1, 0])


def test_quadratic_hamiltonian_examples():
    assert ham.ig_hamiltonian_quadratic(G, TH01, [1, 0]) == pytest.approx(0.25)
    assert ham.ig_hamiltonian_quadratic(Q, [3, 4], [3, 4]) == 0
    eta = G.eta_from_mu_sigma(0.5, 1.2)
    assert ham.ig_hamiltonian_quadratic(G, eta, G.theta_of_eta(eta), chart="eta") == pytest.approx(0, abs=1e-14)


def test_conformal_examples():
    assert ham.conformal_ig_hamiltonian(G, TH01, [1, 0]) == pytest.approx(math.sqrt(2), abs=1e-7)
    assert ham.conformal_ig_hamiltonian(G, TH01, G.eta_of_theta(TH01)) == pytest.approx(1)
    with pytest.raises(SingularFieldError):
        ham.conformal_ig_hamiltonian(Q, [0, 0], [1, 0])


@settings(max_examples=50, deadline=None)
@given(gauss_states, st.floats(0.01, 100))
def test_conformal_homogeneity(state, lam):
    th, p = _state(*state)
    h1 = ham.conformal_ig_hamiltonian(G, th, lam * p)
    assert h1 == pytest.approx(lam * ham.conformal_ig_hamiltonian(G, th, p), rel=1e-13, abs=1e-300)


def test_rf_examples():
    assert ham.rf_ig_hamiltonian(Q, [2, 0], [2, 0], [0.5, 0]) == pytest.approx(1, abs=1e-14)
    with pytest.raises(SingularFieldError):
        ham.rf_ig_hamiltonian(Q, [1, 0], [1, 0], [0.5, 0])


@settings(max_examples=100, deadline=None)
@given(gauss_states)
def test_rf_reduces_to_conformal(state):
    th, p = _state(*state)
    assert ham.rf_ig_hamiltonian(G, th, p, np.zeros(2)) == ham.conformal_ig_hamiltonian(G, th, p)


def test_hamilton_rhs_examples():
    spec = ham.HamiltonianSpec("conformal_ig", G)
    dth, _ = ham.hamilton_rhs(spec, TH01, [0, 1])
    np.testing.assert_allclose(dth, [0, 1], atol=1e-14)
    spec = ham.HamiltonianSpec("ig_quadratic_theta", Q)
    dth, dp = ham.hamilton_rhs(spec, [0.3, -0.7], [1.5, 2.0])
    np.testing.assert_allclose(dth, [1.5, 2.0])
    np.testing.assert_allclose(dp, [0.3, -0.7])


@settings(max_examples=40, deadline=None)
@given(gauss_states, st.sampled_from(["ig_sqrt_theta", "ig_sqrt_eta", "ig_quadratic_theta",
                                      "ig_quadratic_eta", "conformal_ig", "rf_ig"]))
def test_position_gradient_matches_differences(state, kind):
    th, p = _state(*state)
    if not np.any(p):
        p = np.array([1.0, 0.0])
    spec = ham.HamiltonianSpec(kind, G, A=np.array([0.05, -0.02]) if kind == "rf_ig" else None)
    x = G.eta_of_theta(th) if spec.chart is mf.Chart.ETA else th
    try:
        _, dp = ham.hamilton_rhs(spec, x, p)
    except SingularFieldError:
        return
    fd = ham.position_gradient_fd(spec, x, p)
    assert np.max(np.abs(-dp - fd)) <= 1e-6 * (1 + np.max(np.abs(fd)))


def test_position_dependent_field_gradient():
    A = lambda th: np.array([0.1 * th[0], 0.05 * th[1] ** 2])  # noqa: E731
    spec = ham.HamiltonianSpec("rf_ig", G, A=A)
    th, p = G.theta_from_mu_sigma(0.4, 1.1), np.array([0.3, -0.6])
    _, dp = ham.hamilton_rhs(spec, th, p)
    np.testing.assert_allclose(-dp, ham.position_gradient_fd(spec, th, p), atol=1e-7)


def test_energy_conservation_and_on_shell_transport():
    spec = ham.HamiltonianSpec("conformal_ig", G)
    traj = ham.integrate_hamilton(spec, G.theta_from_mu_sigma(0.2, 1.0), (0.0, 2.0), CFG)
    assert traj.param_name == "x0"
    assert traj.H_drift <= 1e-8
    assert ham.on_shell_defect(spec, traj) <= 1e-7
    spec = ham.HamiltonianSpec("ig_quadratic_theta", Q)
    traj = ham.integrate_hamilton(spec, (np.array([0.3, 0.1]), np.array([-0.2, 0.5])), (0.0, 1.0), CFG)
    assert traj.H_drift <= 1e-8


def test_quadratic_hamiltonian_reduces_to_gradient_flow():
    th0 = np.array([0.3, -0.4])
    spec = ham.HamiltonianSpec("ig_quadratic_theta", Q)
    traj = ham.integrate_hamilton(spec, th0, (0.0, 1.0), CFG)
    grad = flows.theta_flow(Q, th0, (0.0, 1.0), config=CFG)
    assert np.max(np.abs(traj.positions - grad.points)) <= 1e-10
    assert np.max(np.abs(traj.H_values)) <= 1e-12


def test_off_domain_start():
    spec = ham.HamiltonianSpec("conformal_ig", G)
    with pytest.raises(DomainError):
        ham.integrate_hamilton(spec, (np.array([0.0, 0.5]), np.array([1.0, 0.0])), (0.0, 1.0), CFG)


def test_reparametrize_constant_rate():
    traj = flows.Trajectory("x0", np.linspace(0, 1, 11), np.zeros((11, 2)), chart=mf.Chart.THETA)
    out = ham.reparametrize(traj, lambda x: 2.0)
    assert out.param_name == "t"
    np.testing.assert_allclose(out.samples, np.linspace(0, 0.5, 11), atol=1e-15)
    np.testing.assert_array_equal(out.points, traj.points)
    np.testing.assert_allclose(ham.reparametrize(traj, lambda x: 2.0, method="trapezoid").samples, out.samples)


def test_reparametrize_empty_and_singular():
    empty = flows.Trajectory("x0", np.empty(0), np.empty((0, 2)), chart=mf.Chart.THETA)
    assert len(ham.reparametrize(empty, lambda x: 1.0)) == 0
    traj = flows.Trajectory("x0", [0.0, 1.0, 2.0], np.zeros((3, 2)), chart=mf.Chart.THETA)
    with pytest.raises(SingularFieldError):
        ham.reparametrize(traj, lambda x: 0.0)
    with pytest.raises(ValueError):
        ham.reparametrize(traj, lambda x: 1.0, method="midpoint")


def test_euler_defect_examples():
    th, p = TH01, np.array([0.7, -0.4])
    assert abs(ham.euler_homogeneity_defect(ham.HamiltonianSpec("conformal_ig", G), th, p)) <= 1e-12
    assert abs(ham.euler_homogeneity_defect(ham.HamiltonianSpec("conformal_ig", G), th, p, method="fd")) <= 1e-7
    d = ham.euler_homogeneity_defect(ham.HamiltonianSpec("ig_sqrt_theta", G), th, p)
    assert d == pytest.approx(0.7071068, abs=5e-8)
    spec = ham.HamiltonianSpec("rf_ig", G, A=np.array([0.1, 0.2]))
    assert abs(ham.euler_homogeneity_defect(spec, th, p)) <= 1e-12


def test_null_lagrangian_residual():
    spec = ham.HamiltonianSpec("conformal_ig", G)
    traj = ham.integrate_hamilton(spec, G.theta_from_mu_sigma(0.1, 1.0), (0.0, 1.0), CFG)
    assert np.max(np.abs(ham.null_lagrangian_residual(spec, traj))) <= 1e-6

    x = np.tile(TH01, (3, 1))
    p = np.tile([0.2, 0.3], (3, 1))
    H = np.full(3, ham.conformal_ig_hamiltonian(G, TH01, [0.2, 0.3]))
    const = ham.PhaseTrajectory("x0", [0.0, 1.0, 2.0], x, p, H)
    np.testing.assert_array_equal(ham.null_lagrangian_residual(spec, const), -H[1:-1])

    with pytest.raises(ValueError):
        ham.null_lagrangian_residual(ham.HamiltonianSpec("ig_quadratic_theta", G), traj)
    with pytest.raises(InsufficientSamples):
        short = ham.PhaseTrajectory("x0", [0.0, 1.0], x[:2], p[:2], H[:2])
        ham.null_lagrangian_residual(spec, short)


def test_phase_trajectory_round_trip_to_states():
    spec = ham.HamiltonianSpec("conformal_ig", G)
    traj = ham.integrate_hamilton(spec, TH01, (0.0, 0.01), CFG)
    s = traj.state(3)
    assert ham.hamiltonian_value(spec, s) == pytest.approx(traj.H_values[3])
    pos = traj.position_trajectory()
    assert pos.param_name == "x0" and len(pos) == len(traj)


def test_rf_potential_clock_maps_onto_deformed_flow():
    A = np.array([0.05, 0.02])
    th0 = np.array([0.6, -0.8])
    spec = ham.HamiltonianSpec("rf_ig", Q, A=A)
    grad = flows.rf_flow(Q, th0, A, (0.0, 1.0), config=CFG)
    rate = lambda x: ham.rf_potential_clock_rate(Q, x, A)  # noqa: E731
    span = float(np.sum(np.diff(grad.samples) * [rate(x) for x in grad.points[:-1]])) * 1.01
    phase = ham.integrate_hamilton(spec, th0, (0.0, span), CFG)
    rep = ham.reparametrize(phase, rate)
    interp = PchipInterpolator(rep.samples, rep.points, axis=0)(grad.samples)
    assert np.max(np.abs(interp - grad.points)) <= 1e-8
