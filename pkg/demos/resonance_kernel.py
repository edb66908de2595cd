"""
The coupling kernel at its resonance shell
==========================================

The Q-to-u kernel B(t, |xi|) is a divided difference of two exponentials.
Where the two decay rates meet, the textbook quotient is 0/0.  Writing B
with phi1(z) = (e^z - 1)/z keeps it smooth; here we scan across the
shell and compare with the naive two-branch formula.
"""

import numpy as np

from nematic_spectral import kernels as kn
from nematic_spectral.qtensor import PhysParams

p = PhysParams(mu=2.0)          # mu > Gamma, so a resonance exists
k2r = kn.resonance_k2(p)
print("resonance at |xi|^2 =", k2r)

k2 = k2r + np.linspace(-1e-3, 1e-3, 2001)
for t in (0.1, 1.0, 10.0):
    b = kn.kernel_B(t, k2, p)
    naive = kn.kernel_B_two_branch(t, k2, p)
    far = np.abs(kn.resonance_gap(k2, p) * t) > 1e-3
    # for small t the whole window is too close to the shell for the quotient
    dev = np.max(np.abs(b[far] - naive[far]) / np.abs(naive[far])) if far.any() else np.nan
    print(f"t = {t:5}: B(res) = {kn.kernel_B(t, k2r, p):.6e}, "
          f"max 2nd difference = {np.max(np.abs(np.diff(b, 2))):.1e}, "
          f"off-shell deviation from two-branch = {dev:.1e}")

# just off the shell the quotient loses digits to cancellation
for h in (1e-8, 1e-11, 1e-14):
    good = kn.kernel_B(1.0, k2r + h, p)
    naive = kn.kernel_B_two_branch(1.0, k2r + h, p)
    print(f"k2 = 1 + {h:.0e}: relative error of the quotient = {abs(naive - good) / good:.1e}")
