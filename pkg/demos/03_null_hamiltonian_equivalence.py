"""A gradient flow is a null-geodesic Hamiltonian flow in disguise.

The conformal Hamiltonian started on shell (p = eta) stays on its level set H = 1,
and re-clocking its parameter x0 by dx0/dt = eta^2 retraces the theta-flow.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import PchipInterpolator

from igflow import flows, hamiltonian as ham, manifold as mf

cfg = flows.IntegratorConfig(step=1e-3)


def compare(model, th0, rate, spec, grad):
    span = simpson([rate(x) for x in grad.points], x=grad.samples)
    phase = ham.integrate_hamilton(spec, th0, (0.0, 1.001 * span + cfg.step), cfg)
    rep = ham.reparametrize(phase, rate)
    interp = PchipInterpolator(rep.samples, rep.points, axis=0)(grad.samples)
    return phase, float(np.abs(interp - grad.points).max())


for model, th0 in ((mf.GaussianModel(), mf.GaussianModel().theta_from_mu_sigma(0.1, 1.0)),
                   (mf.QuadraticModel(), np.array([0.18, -0.24]))):
    spec = ham.HamiltonianSpec("conformal_ig", model)
    grad = flows.theta_flow(model, th0, (0.0, 3.0), eta_r=np.zeros(2), config=cfg)
    phase, dev = compare(model, th0, lambda x: mf.eta_squared(model, x), spec, grad)
    print(f"{model.name:9s}: H drift {phase.H_drift:.1e}, sup |theta_H(t) - theta_grad(t)| = {dev:.1e}")

# degree-one homogeneity in p separates the conformal Hamiltonian from the square-root one
G = mf.GaussianModel()
th, p = G.theta_from_mu_sigma(0, 1), np.array([0.7, -0.4])
for kind in ("conformal_ig", "ig_sqrt_theta"):
    d = ham.euler_homogeneity_defect(ham.HamiltonianSpec(kind, G), th, p)
    print(f"p.dH/dp - H for {kind:13s}: {d:.3e}")
print(f"sqrt(eta^2) = {np.sqrt(mf.eta_squared(G, th)):.6f}")

# with a vector field A the Randers-Finsler Hamiltonian follows the deformed flow;
# the clock that makes the times agree is eta . g^-1 (eta - A)
Q = mf.QuadraticModel()
A = np.array([0.05, 0.02])
th0 = np.array([0.6, -0.8])
spec = ham.HamiltonianSpec("rf_ig", Q, A=A)
grad = flows.rf_flow(Q, th0, A, (0.0, 1.0), config=cfg)
for label, rate in (("xi chi^2", lambda x: ham.clock_rate(spec, x)),
                    ("eta.g^-1(eta - A)", lambda x: ham.rf_potential_clock_rate(Q, x, A))):
    _, dev = compare(Q, th0, rate, spec, grad)
    print(f"rf_ig clocked by {label:18s}: sup deviation {dev:.1e}")
