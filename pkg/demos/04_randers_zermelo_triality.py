"""One stationary metric, three descriptions: ADM, Zermelo navigation and Randers."""
from __future__ import annotations

import numpy as np

from igflow import manifold as mf, spacetime as st

adm = st.ADMMetric(2, 1.0, np.array([0.5, 0.0]), np.eye(2))
z = st.zermelo_from_adm(adm)
rd = st.randers_from_adm(adm)
V2, h, W = z.at()
a, b = rd.at()
print("lapse 1, shift (0.5, 0), flat gamma")
print(f"  Zermelo: V^2 = {V2:.6f}, W = {W}, h =\n{h}")
print(f"  Randers: b = {b}, a =\n{a}")

back = st.adm_from_zermelo(z)
print(f"round trip shift {back.shift() + 0.0}, lapse {back.lapse():.6f}")

# null momenta: both branches of p0, and the Randers norm as the Legendre dual of H+
p = np.array([0.3, -1.1])
for br in (1, -1):
    p0 = st.solve_p0(adm, None, p, br)
    print(f"branch {br:+d}: p0 = {p0:+.6f}, null residual "
          f"{st.null_condition_residual(adm, None, st.SpacetimeMomentum(p0, p)):.1e}")
v = np.array([1.0, 0.4])
pv = st.randers_legendre_momentum(rd, None, v)
print(f"F(v) = {st.randers_function(rd, None, v):.12f}, H+(p(v)) = {st.null_hamiltonian(adm, None, pv):.12f}")

# null cones survive conformal rescaling
P = st.SpacetimeMomentum(st.solve_p0(adm, None, p, 1), p)
print(f"null residual after omega^2 = 3: {st.null_condition_residual(st.conformal_rescale(adm, 3.0), None, P):.1e}")

# the information-geometric Hamiltonian is the null Hamiltonian of a position-dependent metric
G = mf.GaussianModel()
bridge = st.ig_to_adm(G)
th = G.theta_from_mu_sigma(0.4, 1.1)
print(f"bridge lapse at N(0.4, 1.1^2): {bridge.lapse(th):.6f}, "
      f"H+ on shell = {st.null_hamiltonian(bridge, th, G.eta_of_theta(th)):.12f}")
