"""
Q-tensors in five coefficients
==============================

A nematic order parameter is a symmetric traceless 3x3 matrix.  The
library stores it as five coefficients in an orthonormal basis, so
Tr(Q^2) is the plain sum of squares and tracelessness holds by
construction.
"""

import numpy as np

from nematic_spectral import qtensor as qt

# a uniaxial state: degree of order s = 0.6, director along z
q = qt.uniaxial(0.6, [0.0, 0.0, 1.0])
print("coefficients:", np.round(q, 6))
print("matrix:\n", np.round(qt.expand(q), 6))
print("Tr Q^2 =", qt.tr2(q), " eigenvalues:", qt.eigenvalues(q))
print("phase:", qt.classify_phase(q).name)

# rotate the director; the bulk energy does not care
p = qt.PhysParams(a=0.3, b=1.0, c=1.0)
th = 0.7
r = np.array([[np.cos(th), 0, np.sin(th)], [0, 1, 0], [-np.sin(th), 0, np.cos(th)]])
q_rot = qt.reduce(r @ qt.expand(q) @ r.T)
print("bulk energy before/after rotation:",
      qt.free_energy_density(q, p), qt.free_energy_density(q_rot, p))

# the molecular field of a homogeneous state is the bulk force minus a Q
h = qt.molecular_field(q, np.zeros(5), p)
print("H[Q] for the homogeneous state:", np.round(h, 6))
