"""The (mu, sigma) velocity field of the Gaussian gradient flow and a few trajectories."""
from __future__ import annotations

import numpy as np

from igflow import flows

mu_r, sigma_r = 1.2, 0.8
mus = np.linspace(0.4, 2.0, 17)
sigmas = np.linspace(0.4, 1.6, 13)
M, S = np.meshgrid(mus, sigmas)
U, V = np.vectorize(lambda m, s: flows.gaussian_mu_sigma_rhs(m, s, mu_r, sigma_r))(M, S)
print(f"velocity at (0, 1): {flows.gaussian_mu_sigma_rhs(0.0, 1.0, mu_r, sigma_r)}")
print(f"largest speed on the grid: {np.hypot(U, V).max():.3f}")

starts = [(0.4, 0.4), (0.4, 1.6), (2.0, 0.4), (2.0, 1.6), (0.0, 1.0)]
cfg = flows.IntegratorConfig(step=1e-2)
trajs = [flows.gaussian_flow(m, s, mu_r, sigma_r, (0.0, 8.0), cfg) for m, s in starts]
for (m, s), tr in zip(starts, trajs):
    print(f"from ({m}, {s}) -> ({tr.final[0]:.5f}, {tr.final[1]:.5f})")

try:
    import matplotlib.pyplot as plt
except ImportError:
    print("matplotlib not installed; skipping the figure")
else:
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.quiver(M, S, U, V, angles="xy")
    for tr in trajs:
        ax.plot(tr.points[:, 0], tr.points[:, 1])
    ax.plot([mu_r], [sigma_r], "k*", ms=12)
    ax.set_xlabel("mu")
    ax.set_ylabel("sigma")
    fig.savefig("vector_field.png", dpi=120)
    print("wrote vector_field.png")
