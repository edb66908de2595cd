"""
Algebra of traceless symmetric 3x3 tensors.

Q-tensors are stored as 5 real coefficients in a fixed orthonormal basis
of the traceless symmetric matrices (Frobenius inner product):

    E1 = (e11 - e22) / sqrt(2)
    E2 = (2 e33 - e11 - e22) / sqrt(6)
    E3 = (e12 + e21) / sqrt(2)
    E4 = (e13 + e31) / sqrt(2)
    E5 = (e23 + e32) / sqrt(2)

With this choice ``expand`` always produces an exactly symmetric matrix
whose diagonal sums to zero bitwise, and |q|_2 equals the Frobenius norm
of the expanded matrix.

All array routines broadcast: a coefficient array has the component axis
first, shape (5, ...), and an expanded tensor has shape (3, 3, ...).
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

SQRT2 = np.sqrt(2.0)
SQRT6 = np.sqrt(6.0)

#: Basis tensors, shape (5, 3, 3).
BASIS = np.zeros((5, 3, 3))
BASIS[0, 0, 0], BASIS[0, 1, 1] = 1 / SQRT2, -1 / SQRT2
BASIS[1, 0, 0] = BASIS[1, 1, 1] = -1 / SQRT6
BASIS[1, 2, 2] = 2 / SQRT6
BASIS[2, 0, 1] = BASIS[2, 1, 0] = 1 / SQRT2
BASIS[3, 0, 2] = BASIS[3, 2, 0] = 1 / SQRT2
BASIS[4, 1, 2] = BASIS[4, 2, 1] = 1 / SQRT2


class RepresentationError(ValueError):
    """A matrix handed to the basis reduction is not in S_0^3."""


@dataclass(frozen=True)
class PhysParams:
    """Coefficients of the corotational active nematic system (K = 1).

    ``a`` is the isotropic-nematic offset (c - c_star)/2 and ``kappa`` the
    active stress strength alpha2 * c**2.  Use :meth:`from_concentration`
    to build the set from the physical parameterization.
    """

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    kappa: float = 1.0
    lam: float = 1.0
    mu: float = 1.0
    gamma: float = 1.0
    c_star: float = field(default=None)

    def __post_init__(self):
        if self.c_star is None:
            object.__setattr__(self, "c_star", self.c - 2.0 * self.a)
        if not (self.mu > 0 and self.gamma > 0 and self.c > 0):
            raise ValueError("mu, gamma and c must be positive "
                             f"(got mu={self.mu}, gamma={self.gamma}, c={self.c})")
        if not np.isclose(self.a, 0.5 * (self.c - self.c_star), rtol=1e-12, atol=1e-14):
            raise ValueError(f"a={self.a} inconsistent with (c - c_star)/2 = "
                             f"{0.5 * (self.c - self.c_star)}")

    @classmethod
    def from_concentration(cls, c, c_star, alpha2, b=1.0, lam=1.0, mu=1.0, gamma=1.0):
        return cls(a=0.5 * (c - c_star), b=b, c=c, kappa=alpha2 * c * c,
                   lam=lam, mu=mu, gamma=gamma, c_star=c_star)

    @property
    def energy_weight(self):
        """The constant M = max(1, 4 kappa^2 / (a mu Gamma)) of the energy functional."""
        if self.a <= 0:
            raise ValueError("energy weight M requires a > 0")
        return max(1.0, 4.0 * self.kappa ** 2 / (self.a * self.mu * self.gamma))

    def as_array(self):
        return np.array([self.a, self.b, self.c, self.c_star, self.kappa,
                         self.lam, self.mu, self.gamma])

    @classmethod
    def from_array(cls, arr):
        a, b, c, c_star, kappa, lam, mu, gamma = (float(x) for x in arr)
        return cls(a=a, b=b, c=c, kappa=kappa, lam=lam, mu=mu, gamma=gamma, c_star=c_star)


class Phase(Enum):
    ISOTROPIC = "isotropic"
    UNIAXIAL = "uniaxial"
    BIAXIAL = "biaxial"


def expand(q):
    """Map coefficients (5, ...) to symmetric traceless matrices (3, 3, ...)."""
    q = np.asarray(q)
    d1 = q[0] / SQRT2
    d2 = q[1] / SQRT6
    out = np.empty((3, 3) + q.shape[1:], dtype=np.result_type(q.dtype, float))
    out[0, 0] = d1 - d2
    out[1, 1] = -d1 - d2
    out[2, 2] = 2.0 * d2
    out[0, 1] = out[1, 0] = q[2] / SQRT2
    out[0, 2] = out[2, 0] = q[3] / SQRT2
    out[1, 2] = out[2, 1] = q[4] / SQRT2
    return out


def reduce(m, check=True):
    """Inverse of :func:`expand`.

    Raises RepresentationError when ``m`` is not symmetric to 1e-12 or its
    trace exceeds 1e-12 of its Frobenius norm.
    """
    m = np.asarray(m, dtype=float)
    if check:
        scale = np.sqrt(np.sum(m * m, axis=(0, 1)))
        asym = np.max(np.abs(m - np.swapaxes(m, 0, 1)), axis=(0, 1))
        tr = np.abs(np.trace(m, axis1=0, axis2=1))
        if np.any(asym > 1e-12) or np.any(tr > 1e-12 * scale):
            raise RepresentationError(
                f"not in S_0^3: asymmetry {np.max(asym):.3e}, trace {np.max(tr):.3e}")
    return _reduce(m)


def _reduce(m):
    out = np.empty((5,) + m.shape[2:], dtype=np.result_type(m.dtype, float))
    out[0] = (m[0, 0] - m[1, 1]) / SQRT2
    out[1] = (2.0 * m[2, 2] - m[0, 0] - m[1, 1]) / SQRT6
    out[2] = (m[0, 1] + m[1, 0]) / SQRT2
    out[3] = (m[0, 2] + m[2, 0]) / SQRT2
    out[4] = (m[1, 2] + m[2, 1]) / SQRT2
    return out


def trace_free_project(m):
    """Symmetrize and remove the trace: sym(M) - Tr(M)/3 I."""
    m = np.asarray(m, dtype=float)
    s = 0.5 * (m + np.swapaxes(m, 0, 1))
    tr = np.trace(s, axis1=0, axis2=1) / 3.0
    for i in range(3):
        s[i, i] = s[i, i] - tr
    return s


def project_coeffs(m):
    """Coefficients of the S_0^3 projection of an arbitrary (3, 3, ...) array."""
    # the basis reduction already discards trace and antisymmetric parts
    return _reduce(np.asarray(m))


def matmul(a, b):
    """Matrix product over the two leading axes."""
    return np.einsum("ik...,kj...->ij...", a, b)


def tr2(q):
    """Tr(Q^2) from coefficients."""
    return np.sum(np.asarray(q) ** 2, axis=0)


def norm(q):
    """|Q| = sqrt(Tr Q^2)."""
    return np.sqrt(tr2(q))


def tr3(q):
    m = expand(q)
    return np.einsum("ij...,jk...,ki...->...", m, m, m)


def bulk_force(q, p):
    """b[Q^2 - Tr(Q^2)/3 I] - c Q Tr(Q^2), as coefficients."""
    m = expand(q)
    sq = project_coeffs(matmul(m, m))
    return p.b * sq - p.c * np.asarray(q) * tr2(q)


def molecular_field(q, lap_q, p):
    """H[Q] = Delta Q - a Q + b[Q^2 - Tr(Q^2)/3 I] - c Q Tr(Q^2).

    ``lap_q`` is the Laplacian of Q in the same coefficient layout.
    """
    q = np.asarray(q, dtype=float)
    return np.asarray(lap_q, dtype=float) - p.a * q + bulk_force(q, p)


def free_energy_density(q, p):
    """Bulk Landau-de Gennes density with K = 1; the elastic part is not included."""
    t2 = tr2(q)
    return 0.25 * (p.c - p.c_star) * t2 - p.b / 3.0 * tr3(q) + 0.25 * p.c * t2 ** 2


def eigenvalues_closed_form(m):
    """Sorted eigenvalues of symmetric traceless matrices (3, 3, ...).

    Trigonometric solution of the depressed characteristic cubic.  The
    result is accurate to about sqrt(eps)*|Q| near repeated eigenvalues, so
    phase classification uses :func:`eigenvalues` instead.
    """
    m = np.asarray(m, dtype=float)
    p2 = 0.5 * np.sum(m * m, axis=(0, 1))
    det = np.linalg.det(np.moveaxis(m, (0, 1), (-2, -1)))
    safe = np.where(p2 > 0, p2, 1.0)
    arg = np.clip(1.5 * np.sqrt(3.0) * det / safe ** 1.5, -1.0, 1.0)
    theta = np.arccos(arg) / 3.0
    r = 2.0 * np.sqrt(p2 / 3.0)
    lam = np.stack([r * np.cos(theta + 2.0 * np.pi * j / 3.0) for j in range(3)])
    return np.sort(lam, axis=0)


def eigenvalues(q):
    """Sorted eigenvalues of a single Q given as coefficients."""
    return np.linalg.eigvalsh(expand(q))


def classify_phase(q, tol=None):
    """Isotropic, uniaxial or biaxial from the eigenvalue multiset of Q.

    The default tolerance is 1e-8 * max(|Q|, 1).
    """
    q = np.asarray(q, dtype=float)
    if tol is None:
        tol = 1e-8 * max(float(norm(q)), 1.0)
    if tol <= 0:
        raise ValueError("tol must be positive")
    lam = eigenvalues(q)
    if np.all(np.abs(lam) < tol):
        return Phase.ISOTROPIC
    close = np.diff(lam) < tol
    if np.count_nonzero(close) == 1:
        return Phase.UNIAXIAL
    return Phase.BIAXIAL


def uniaxial(s, n):
    """Coefficients of s (n n^T - I/3) for a unit director n."""
    n = np.asarray(n, dtype=float)
    n = n / np.linalg.norm(n)
    return reduce(s * (np.outer(n, n) - np.eye(3) / 3.0))
