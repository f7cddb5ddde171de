from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from igflow import flows, manifold as mf
from igflow.errors import DomainBoundaryHit, DomainError, InsufficientSamples, StepLimitExceeded

G = mf.GaussianModel()
Q = mf.QuadraticModel()
CFG = flows.IntegratorConfig(step=1e-3)

# 30-digit evaluation of the closed form at t = 1 from (0, 1) towards (1.2, 0.8)
CLOSED_T1 = (0.874339177475735121902180038524, 0.858893617834758080250423456052)


def test_integrator_config_validation():
    with pytest.raises(ValueError):
        flows.IntegratorConfig(step=0)
    with pytest.raises(ValueError):
        flows.IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        flows.IntegratorConfig(max_steps=0)


def test_trajectory_requires_increasing_samples():
    with pytest.raises(ValueError):
        flows.Trajectory("t", [0.0, 0.0], [[1.0], [2.0]])


def test_grad_rhs_theta_examples():
    th = G.theta_from_mu_sigma(0.3, 1.1)
    np.testing.assert_array_equal(flows.grad_rhs_theta(G, th, th), 0)
    np.testing.assert_allclose(flows.grad_rhs_theta(Q, [1.0, 2.0], [0.5, -1.0]), [0.5, 3.0])
    np.testing.assert_allclose(flows.grad_rhs_theta(G, G.theta_from_mu_sigma(0, 1)), [0, 0.5], atol=1e-14)


def test_grad_rhs_eta_examples():
    eta = G.eta_from_mu_sigma(0, 1)
    th_r = G.theta_from_mu_sigma(1.2, 0.8)
    np.testing.assert_allclose(flows.grad_rhs_eta(G, eta, theta_r=th_r), [1.875, -0.5625], atol=1e-13)
    np.testing.assert_allclose(flows.grad_rhs_eta(G, eta, eta), 0, atol=1e-14)
    np.testing.assert_allclose(flows.grad_rhs_eta(Q, [1.0, 2.0], [0.5, -1.0]), [-0.5, -3.0])


def test_rf_rhs_examples():
    th = G.theta_from_mu_sigma(0.4, 0.9)
    np.testing.assert_allclose(flows.rf_rhs_theta(G, th, np.zeros(2)), flows.grad_rhs_theta(G, th))
    np.testing.assert_allclose(flows.rf_rhs_theta(Q, [2.0, 0.0], lambda t: np.array([0.5, 0.0])), [1.5, 0.0])


def test_linear_solutions():
    assert flows.linear_solution_theta(2.0, 1.0, 1.0) == pytest.approx(1.3678794, abs=5e-8)
    assert flows.linear_solution_eta(2.0, 1.0, 1.0) == pytest.approx(3.7182818, abs=5e-8)
    np.testing.assert_array_equal(flows.linear_solution_theta(np.array([1.0, 2.0]), 0.0, 0.0), [1.0, 2.0])


def test_gaussian_closed_form():
    assert flows.gaussian_closed_form(0.3, 1.4, 1.2, 0.8, 0.0) == pytest.approx((0.3, 1.4))
    mu, sigma = flows.gaussian_closed_form(0.0, 1.0, 1.2, 0.8, 1.0)
    assert mu == pytest.approx(CLOSED_T1[0], abs=1e-15)
    assert sigma == pytest.approx(CLOSED_T1[1], abs=1e-15)
    mu, sigma = flows.gaussian_closed_form(0.0, 1.0, 1.2, 0.8, 60.0)
    assert (mu, sigma) == pytest.approx((1.2, 0.8), abs=1e-12)


def test_gaussian_rk4_matches_closed_form():
    traj = flows.gaussian_flow(0.0, 1.0, 1.2, 0.8, (0.0, 1.0), CFG)
    assert np.max(np.abs(traj.final - CLOSED_T1)) <= 1e-9


def test_eta_flow_endpoint_matches_closed_form():
    eta0 = G.eta_from_mu_sigma(0, 1)
    traj = flows.eta_flow(G, eta0, (0.0, 1.0), theta_r=G.theta_from_mu_sigma(1.2, 0.8), config=CFG)
    mu, sigma = G.mu_sigma_from_eta(traj.final)
    assert abs(mu - CLOSED_T1[0]) <= 1e-9 and abs(sigma - CLOSED_T1[1]) <= 1e-9


def test_rk4_order():
    def err(step):
        traj = flows.gaussian_flow(0.0, 1.0, 1.2, 0.8, (0.0, 1.0), flows.IntegratorConfig(step=step))
        return np.max(np.abs(traj.final - CLOSED_T1))

    ratio = err(0.1) / err(0.05)
    assert 12 < ratio < 20


def test_linear_field_matches_analytic():
    th_r = np.array([0.5, -1.0])
    traj = flows.integrate(lambda t, y: -(y - th_r), [2.0, 3.0], (0.0, 2.0), CFG)
    np.testing.assert_allclose(traj.final, flows.linear_solution_theta(np.array([2.0, 3.0]), th_r, 2.0), atol=1e-10)


def test_adaptive_method():
    cfg = flows.IntegratorConfig(method="rk45_adaptive")
    traj = flows.gaussian_flow(0.0, 1.0, 1.2, 0.8, (0.0, 1.0), cfg)
    assert np.max(np.abs(traj.final - CLOSED_T1)) <= 1e-7
    assert traj.samples[-1] == pytest.approx(1.0)


def test_domain_guard_and_boundary_error():
    # sigma -> 0 in finite time when flowing backwards from the reference
    rhs = lambda t, y: -np.array(flows.gaussian_mu_sigma_rhs(y[0], y[1], 0.0, 1.0)) * 10  # noqa: E731
    domain = lambda y: y[1] > 0.5  # noqa: E731
    traj = flows.integrate(rhs, [0.0, 0.9], (0.0, 5.0), CFG, domain=domain)
    assert traj.boundary_hit and traj.samples[-1] < 5.0
    assert traj.final[1] > 0.5
    with pytest.raises(DomainBoundaryHit) as info:
        flows.integrate(rhs, [0.0, 0.9], (0.0, 5.0), flows.IntegratorConfig(domain_guard=False), domain=domain)
    assert info.value.trajectory is not None and info.value.state[1] > 0.5
    with pytest.raises(DomainError):
        flows.integrate(rhs, [0.0, 0.1], (0.0, 1.0), CFG, domain=domain)


def test_step_limit():
    with pytest.raises(StepLimitExceeded):
        flows.integrate(lambda t, y: -y, [1.0], (0.0, 1.0), flows.IntegratorConfig(max_steps=10))


def test_convergence_stop():
    th_r = np.array([0.2, -0.3])
    traj = flows.integrate(lambda t, y: -(y - th_r), th_r, (0.0, 1.0), CFG)
    assert traj.converged and len(traj) == 1


def test_eta_flow_theta_image_is_linear():
    eta0 = G.eta_from_mu_sigma(-0.5, 1.3)
    th_r = G.theta_from_mu_sigma(1.2, 0.8)
    traj = flows.eta_flow(G, eta0, (0.0, 3.0), theta_r=th_r, config=CFG)
    th_traj = flows.to_chart(G, traj, mf.Chart.THETA)
    exact = flows.linear_solution_theta(G.theta_of_eta(eta0), th_r, th_traj.samples[:, None])
    assert np.max(np.abs(th_traj.points - exact)) <= 1e-8


def test_eta_flow_divergence_non_increasing():
    th_r = G.theta_from_mu_sigma(1.2, 0.8)
    eta_r = G.eta_of_theta(th_r)
    traj = flows.eta_flow(G, G.eta_from_mu_sigma(0, 1), (0.0, 5.0), theta_r=th_r, config=CFG)
    d = np.array([mf.divergence_eta(G, e, eta_r) for e in traj.points])
    assert np.all(np.diff(d) <= 1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(0.3, 2), st.floats(-2, 2), st.floats(0.3, 2))
def test_gaussian_chain_rule(mu, sigma, mu_r, sigma_r):
    th_r = G.theta_from_mu_sigma(mu_r, sigma_r)
    eta = G.eta_from_mu_sigma(mu, sigma)
    d_eta = flows.grad_rhs_eta(G, eta, theta_r=th_r)
    # eta = (mu, mu^2 + sigma^2)
    dmu = d_eta[0]
    dsigma = (d_eta[1] - 2 * mu * dmu) / (2 * sigma)
    emu, esigma = flows.gaussian_mu_sigma_rhs(mu, sigma, mu_r, sigma_r)
    scale = 1 + abs(emu) + abs(esigma)
    assert abs(dmu - emu) <= 1e-10 * scale and abs(dsigma - esigma) <= 1e-10 * scale


def test_time_relation_between_samples():
    mu_r, sigma_r = 1.2, 0.8
    traj = flows.gaussian_flow(0.0, 1.0, mu_r, sigma_r, (0.0, 2.0), CFG)
    mu, sigma = traj.points[:, 0], traj.points[:, 1]
    dt = np.diff(traj.samples)
    mid_mu, mid_s = 0.5 * (mu[1:] + mu[:-1]), 0.5 * (sigma[1:] + sigma[:-1])
    dt_mu = sigma_r ** 2 / mid_s ** 2 * np.diff(mu) / (mu_r - mid_mu)
    dt_sigma = 2 * np.diff(sigma) / (mid_s * (1 - mid_s ** 2 / sigma_r ** 2))
    np.testing.assert_allclose(dt_mu, dt, rtol=1e-5)
    np.testing.assert_allclose(dt_sigma, dt, rtol=1e-5)


def test_rate_examples():
    th = G.theta_from_mu_sigma(0, 1)
    assert flows.potential_rate(G, th, np.zeros(2)) == pytest.approx(mf.eta_squared(G, th))
    eta = G.eta_of_theta(th)
    assert flows.potential_rate(G, th, eta) == pytest.approx(0, abs=1e-14)
    th_r = G.theta_from_mu_sigma(1.2, 0.8)
    assert flows.entropy_rate(G, eta, th_r) == pytest.approx(0.28125, abs=1e-12)
    assert flows.entropy_rate(G, eta, th) == pytest.approx(0, abs=1e-14)


def test_rate_identities_along_trajectories():
    eta_r = G.eta_from_mu_sigma(0.5, 0.9)
    th0 = G.theta_from_mu_sigma(0.2, 1.0)
    # the theta-flow moves away from eta_r; keep the window short
    traj = flows.theta_flow(G, th0, (0.0, 0.5), eta_r=eta_r, config=CFG)
    assert flows.potential_rate_defect(G, traj, eta_r) <= 1e-6
    th_r = G.theta_from_mu_sigma(1.2, 0.8)
    traj = flows.eta_flow(G, G.eta_from_mu_sigma(0, 1), (0.0, 3.0), theta_r=th_r, config=CFG)
    assert flows.entropy_rate_defect(G, traj, th_r) <= 1e-6


def test_pre_geodesic_residual():
    t = np.arange(0.0, 2.0 + 5e-4, 1e-3)
    th_r = np.array([0.5, -1.0])
    pts = flows.linear_solution_theta(np.array([1.0, -2.0]), th_r, t[:, None])
    exact = flows.Trajectory("t", t, pts, chart=mf.Chart.THETA)
    assert flows.pre_geodesic_residual(exact).max() <= 1e-6

    th_r = G.theta_from_mu_sigma(1.2, 0.8)
    traj = flows.eta_flow(G, G.eta_from_mu_sigma(0, 1), (0.0, 3.0), theta_r=th_r, config=CFG)
    assert flows.pre_geodesic_residual(traj, G).max() <= 1e-5

    const = flows.Trajectory("t", [0.0, 0.5, 1.0], np.tile(th_r, (3, 1)), chart=mf.Chart.THETA)
    assert flows.pre_geodesic_residual(const).max() == 0
    with pytest.raises(InsufficientSamples):
        flows.pre_geodesic_residual(flows.Trajectory("t", [0.0, 1.0], [[1.0], [2.0]], chart=mf.Chart.THETA))


def test_theta_flow_eta_grows_exponentially():
    th0 = np.array([0.3, -0.4])
    traj = flows.theta_flow(Q, th0, (0.0, 2.0), config=CFG)
    np.testing.assert_allclose(traj.final, th0 * math.e ** 2, rtol=1e-10)


def test_theta_flow_norm_cap():
    traj = flows.theta_flow(Q, [0.3, -0.4], (0.0, 10.0), config=flows.IntegratorConfig(step=1e-2, max_norm=10.0))
    assert traj.norm_capped and traj.samples[-1] < 10.0


def test_trajectory_scalars_recorded():
    traj = flows.theta_flow(Q, [0.3, -0.4], (0.0, 0.1), config=CFG)
    assert traj.param_name == "t" and "psi" in traj.scalars
    np.testing.assert_allclose(traj.scalars["psi"], 0.5 * np.sum(traj.points ** 2, axis=1))
