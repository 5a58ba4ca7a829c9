"""Square functions of the harmonic extension: exact L^2 identities, the
maximal inequality, the optimal split, and the weighted pairing that the
martingale transform is verified against.
"""

import math

import numpy as np
from scipy.special import gamma

from semigroup_hls import lp_functionals as lp
from semigroup_hls import spectral_core as sc
from semigroup_hls import stochastic_sim as ss

rng = np.random.default_rng(7)
dec = sc.decompose(sc.random_reversible(24, rng))
f = rng.standard_normal(24)
f -= np.sum(f * dec.m) / dec.total_mass

# ||g_1 f||_2 = ||f||_2 / 2 exactly, and the fractional square function
# carries the same energy as the fractional integral.
print(f"g_1 identity gap:  {lp.g1_l2_identity_gap(dec, f):.2e}")
for alpha in (0.5, 1.0):
    print(f"G_{alpha} identity gap: {lp.frac_g_l2_identity_gap(dec, f, alpha):.2e}"
          f"   (constant sqrt(Gamma({2*alpha+2:g}))/2^{alpha+1:g})")

# Maximal inequality with the sharp constant p/(p-1).
hs = lp.half_space_field(dec, f)
for p in (1.5, 2.0, 3.0):
    rep = lp.stein_check(hs, p)
    print(f"maximal ratio p={p}: {rep.value:.4f} <= {rep.oracle:.4f}")

# The optimal near/far split point in closed form.
inp = lp.HedbergInput(M=1.0, F=1.0, alpha=1.0, p=2.0, d=4.0)
delta, bound = lp.hedberg_split(inp)
print(f"\nsplit point delta* = {delta}, bound psi(delta*) = {bound}")

# The weighted pairing converges, as the roof s grows, to
# Gamma(a+2)/2^(a+1) times <I_alpha f, h>.
dec2 = sc.decompose(sc.two_state())
phi = np.array([1.0, -1.0]) / math.sqrt(2.0)
rep = ss.limit_constant_estimate(dec2, phi, phi, 1.0)
print("\npairing ratio sweep over s:", [f"{r:.5f}" for r in rep.details["ratios"]])
print(f"s = inf ratio {rep.value:.5f}; candidates "
      f"Gamma(3)/2^3 = {gamma(3.0)/8:.5f} and Gamma(3)/2^2 = {gamma(3.0)/4:.5f}; "
      f"selected {rep.details['selected']}")
