"""Two charts on the Gaussian family and the quantities that tie them together."""
from __future__ import annotations

import numpy as np

from igflow import manifold as mf

G = mf.GaussianModel()

theta = G.theta_from_mu_sigma(1.2, 0.8)
eta = G.eta_of_theta(theta)
print(f"N(1.2, 0.8^2): theta = {theta}, eta = {eta}")

# the potentials are Legendre conjugates, so psi + psi* = theta . eta
psi, psi_star = G.potential(theta), G.dual_potential(eta)
print(f"psi + psi* - theta.eta = {psi + psi_star - theta @ eta:.2e}")
print(f"psi* + entropy         = {psi_star + G.entropy(0.8):.2e}")

# the two Hessians are inverse metrics
g, g_star = G.hessian(theta), G.dual_hessian(eta)
print("g_theta @ g_eta =\n", np.round(g @ g_star, 14))

# the squared norm of eta (resp. theta) in the metric is a scalar field on the manifold
print(f"eta^2 = {mf.eta_squared(G, theta):.6f}, theta^2 = {mf.theta_squared(G, eta):.6f} (always 1/2)")

# Bregman divergence read in either chart, with arguments swapped
th0 = G.theta_from_mu_sigma(0.0, 1.0)
print(f"D_theta(N(0,1) || N(1.2,0.8^2)) = {mf.divergence_theta(G, th0, theta):.6f}")
print(f"D_eta  (swapped)                = {mf.divergence_eta(G, eta, G.eta_of_theta(th0)):.6f}")

# the alpha-connections interpolate between the two flat connections
for a in (1.0, 0.0, -1.0):
    print(f"alpha={a:+.0f}: max |Gamma| = {np.abs(mf.alpha_connection(G, theta, a)).max():.4f}")
