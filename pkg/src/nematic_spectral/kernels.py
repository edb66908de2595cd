"""
Fourier-space Green-function kernels of the linearized system

    Q_t - Gamma Delta Q + a Gamma Q = 0,
    u_t - mu Delta u - kappa P div Q = 0,

their exact action on a spectral state, and whole-space radial quadrature
of the convolution norms ||d^k (K * f)||_{L^2}.

All kernel functions take ``k2 = |xi|^2`` and broadcast over ``t`` and
``k2``.  The coupling kernel B is evaluated in the single form

    B = kappa t exp(-mu k2 t) phi1(d t),   d = (mu - Gamma) k2 - a Gamma,

which is continuous through the resonance d = 0.
"""

import functools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .grid import SpectralState

KERNELS = ("A", "B", "C")


class QuadratureError(RuntimeError):
    pass


def phi1(z):
    """(exp(z) - 1)/z with the removable singularity filled in."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    zs = np.where(small, 1.0, z)
    taylor = 1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0))
    out = np.where(small, taylor, np.expm1(zs) / zs)
    return out if out.ndim else float(out)


def resonance_gap(k2, p):
    """d = (mu - Gamma)|xi|^2 - a Gamma; B is resonant where d = 0."""
    return (p.mu - p.gamma) * np.asarray(k2, dtype=float) - p.a * p.gamma


def resonance_k2(p):
    """|xi|^2 at the resonance, or None when mu <= Gamma."""
    if p.mu <= p.gamma:
        return None
    return p.a * p.gamma / (p.mu - p.gamma)


def kernel_A(t, k2, p):
    return np.exp(-p.gamma * (np.asarray(k2, dtype=float) + p.a) * np.asarray(t, dtype=float))


def kernel_C(t, k2, p):
    return np.exp(-p.mu * np.asarray(k2, dtype=float) * np.asarray(t, dtype=float))


def kernel_B(t, k2, p):
    t = np.asarray(t, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    z = resonance_gap(k2, p) * t
    heat = -p.mu * k2 * t
    # for z > 1 the product exp(heat) * expm1(z) can overflow; the combined
    # exponent z + heat = -Gamma (k2 + a) t is always safe
    zb = np.where(z > 1.0, z, 1.0)
    big = (np.exp(z + heat) - np.exp(heat)) / zb
    out = p.kappa * t * np.where(z > 1.0, big, np.exp(heat) * phi1(np.minimum(z, 1.0)))
    return out if out.ndim else float(out)


def kernel_B_two_branch(t, k2, p):
    """The quotient form with the separate resonance value; reference only."""
    t = np.asarray(t, dtype=float)
    k2 = np.asarray(k2, dtype=float)
    d = resonance_gap(k2, p)
    dd = np.where(d == 0, 1.0, d)
    quotient = p.kappa / dd * (np.exp(-p.gamma * (k2 + p.a) * t) - np.exp(-p.mu * k2 * t))
    out = np.where(d == 0, p.kappa * np.exp(-p.mu * k2 * t) * t, quotient)
    return out if out.ndim else float(out)


def kernel(name, t, k2, p):
    fns = {"A": kernel_A, "B": kernel_B, "C": kernel_C}
    if name not in fns:
        raise ValueError(f"unknown kernel {name!r}; expected one of {KERNELS}")
    return fns[name](t, k2, p)


# -- exact linear propagation ---------------------------------------------

@functools.lru_cache(maxsize=1)
def _coupling_symbol(grid):
    """Per-mode (3, 5) complex matrix S with P div Q = S q in Fourier space."""
    ss = grid.spectral_shape
    out = np.empty((3, 5) + ss, complex)
    for c in range(5):
        unit = np.zeros((5,) + ss)
        unit[c] = 1.0
        out[:, c] = grid.sigma_from_q(unit)
    return out


@functools.lru_cache(maxsize=4)
def _factors(grid, p, dt):
    k2 = grid.k2
    return kernel_A(dt, k2, p), kernel_B(dt, k2, p) * _coupling_symbol(grid), kernel_C(dt, k2, p)


def propagate_linear(state, dt, p):
    """Advance ``state`` by ``dt`` under the exact linear semigroup.

    Q -> A Q,  u -> B sigma_0 + C u  with sigma_0 = P div Q (before the step).
    """
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return state.copy()
    A, BS, C = _factors(state.grid, p, float(dt))
    q = state.qhat
    qn = A * q
    un = C * state.uhat
    tmp = np.empty_like(un[0])
    for i in range(3):
        for c in range(5):
            np.multiply(BS[i, c], q[c], out=tmp)
            un[i] += tmp
    return SpectralState(state.grid, qn, un, state.t + dt)


# -- radial profiles ------------------------------------------------------

@dataclass(frozen=True)
class GaussianProfile:
    """f_hat(r) = amplitude * exp(-r^2 / (2 sigma^2)).

    Real-space f is a positive Gaussian, so ||f||_{L^1} = f_hat(0).
    Sobolev norms use the radial convention ||f||^2_{H^k} = sum_{j<=k}
    (2 pi)^-3 int |xi|^(2j) |f_hat|^2 d xi, evaluated in closed form.
    """

    sigma: float = 1.0
    amplitude: float = 1.0

    @property
    def gauss_rate(self):
        """Exponent P of |f_hat|^2 = amplitude^2 exp(-P r^2)."""
        return 1.0 / self.sigma ** 2

    support = np.inf

    def __call__(self, r):
        return self.amplitude * np.exp(-np.asarray(r) ** 2 / (2.0 * self.sigma ** 2))

    def moment(self, j):
        """(2 pi)^-3 int |xi|^(2j) |f_hat|^2 d xi."""
        P = self.gauss_rate
        return (self.amplitude ** 2 * 4.0 * np.pi / (2.0 * np.pi) ** 3
                * special.gamma(j + 1.5) / (2.0 * P ** (j + 1.5)))

    def l1_norm(self):
        return abs(self.amplitude)

    def hk_norm(self, k):
        return float(np.sqrt(sum(self.moment(j) for j in range(k + 1))))

    def l1_hk_norm(self, k):
        return self.l1_norm() + self.hk_norm(k)


@dataclass(frozen=True)
class BumpProfile:
    """Compactly supported f_hat(r) = amplitude * exp(1 - 1/(1 - (r/radius)^2)).

    Norms are computed numerically; the L^1 norm integrates the radial
    inverse transform and is accurate to about 1e-6 relative.
    """

    radius: float = 1.0
    amplitude: float = 1.0
    gauss_rate = 0.0

    @property
    def support(self):
        return self.radius

    def __call__(self, r):
        x = np.asarray(r, dtype=float) / self.radius
        inside = np.abs(x) < 1.0
        xs = np.where(inside, x, 0.0)
        return np.where(inside, self.amplitude * np.exp(1.0 - 1.0 / (1.0 - xs ** 2)), 0.0)

    def moment(self, j):
        val, _ = integrate.quad(lambda r: r ** (2 * j + 2) * self(r) ** 2, 0.0, self.radius,
                                epsabs=0.0, epsrel=1e-12, limit=200)
        return 4.0 * np.pi * val / (2.0 * np.pi) ** 3

    @functools.cached_property
    def _nodes(self):
        # Gauss-Legendre on the support: the bump is C-infinity with every
        # derivative vanishing at the edge, so convergence is spectral
        x, w = np.polynomial.legendre.leggauss(256)
        r = 0.5 * self.radius * (x + 1.0)
        return r, 0.5 * self.radius * w * r * self(r)

    def realspace(self, s):
        """Radial real-space profile f(|x| = s), vectorized over s."""
        r, wf = self._nodes
        s = np.asarray(s, dtype=float)
        flat = s.reshape(-1)
        out = np.empty_like(flat)
        for i in range(0, flat.size, 8192):
            ss = flat[i:i + 8192]
            sr = np.outer(ss, r)
            small = ss == 0
            val = np.sin(sr) @ wf / np.where(small, 1.0, ss)
            val[small] = wf @ r
            out[i:i + 8192] = val
        out *= 4.0 * np.pi / (2.0 * np.pi) ** 3
        return out.reshape(s.shape) if s.ndim else float(out[0])

    @functools.cached_property
    def _l1(self):
        s = np.linspace(0.0, 400.0 / self.radius, 200001)
        return 4.0 * np.pi * integrate.simpson(np.abs(self.realspace(s)) * s * s, x=s)

    def l1_norm(self):
        return self._l1

    def hk_norm(self, k):
        return float(np.sqrt(sum(self.moment(j) for j in range(k + 1))))

    def l1_hk_norm(self, k):
        return self.l1_norm() + self.hk_norm(k)


# -- radial quadrature ----------------------------------------------------

def _split_kernel(name, t, p):
    """(log of the r-independent prefactor, reduced kernel r -> K / prefactor)."""
    if name == "A":
        return -p.a * p.gamma * t, lambda r: np.exp(-p.gamma * r * r * t)
    if name == "C":
        return 0.0, lambda r: np.exp(-p.mu * r * r * t)
    if name == "B":
        return 0.0, lambda r: kernel_B(t, r * r, p)
    raise ValueError(f"unknown kernel {name!r}")


def _envelope_rate(name, t, p):
    m = {"A": p.gamma, "C": p.mu, "B": min(p.mu, p.gamma)}[name]
    return 2.0 * m * t


def _cutoff(order, rate, support, tol):
    """Radius beyond which r^order exp(-rate r^2) carries < tol/10 of its mass."""
    if rate <= 0:
        if not np.isfinite(support):
            raise QuadratureError("integrand has no decay and unbounded support")
        return support
    x = special.gammainccinv(0.5 * (order + 1), tol / 10.0)
    return float(min(1.2 * np.sqrt(x / rate) + 1e-12, support))


def radial_log_integral(terms, k, tol=1e-10, breakpoints=()):
    """log of (2 pi)^-3 4 pi int_0^inf r^(2k+2) sum_i w_i(r) dr.

    ``terms`` is a list of (log_prefactor, weight_fn, order_shift, rate, support)
    where the integrand of each term is exp(log_prefactor) * weight_fn(r) and
    r^(2k+2+order_shift) exp(-rate r^2) bounds its decay.
    """
    logs = []
    for logpref, fn, shift, rate, support in terms:
        order = 2 * k + 2 + shift
        rmax = _cutoff(order, rate, support, tol)
        pts = [b for b in breakpoints if 0.0 < b < rmax]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err, info, *rest = integrate.quad(
                lambda r: r ** order * fn(r), 0.0, rmax, epsabs=0.0, epsrel=tol,
                limit=500, points=pts or None, full_output=1)
        if not np.isfinite(val):
            raise QuadratureError(f"non-finite integrand (value {val})")
        if rest and err > 10 * tol * abs(val) + 1e-300:
            raise QuadratureError(f"quadrature did not converge: {rest[0]}")
        if val <= 0:
            logs.append(-np.inf)
        else:
            logs.append(logpref + np.log(val))
    total = np.logaddexp.reduce(np.array(logs))
    return float(total + np.log(4.0 * np.pi / (2.0 * np.pi) ** 3))


def radial_log_norm(name, k, t, profile, p, tol=1e-10):
    """log ||d^k (K(t) * f)||_{L^2} for a radial profile f."""
    logpref, red = _split_kernel(name, t, p)
    rate = _envelope_rate(name, t, p) + profile.gauss_rate
    res = resonance_k2(p)
    bps = (np.sqrt(res),) if (name == "B" and res is not None) else ()
    term = (2.0 * logpref, lambda r: red(r) ** 2 * profile(r) ** 2, 0, rate, profile.support)
    return 0.5 * radial_log_integral([term], k, tol, bps)


def radial_norm_quadrature(name, k, t, profile, p, tol=1e-10):
    """||d^k (K(t) * f)||_{L^2} by adaptive Gauss-Kronrod quadrature."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return float(np.exp(radial_log_norm(name, k, t, profile, p, tol)))


def gaussian_log_norm(name, k, t, profile, p):
    """Closed form of :func:`radial_log_norm` for kernels A and C on a Gaussian."""
    if name == "A":
        logpref, rate = -p.a * p.gamma * t, 2.0 * p.gamma * t
    elif name == "C":
        logpref, rate = 0.0, 2.0 * p.mu * t
    else:
        raise ValueError("closed form available for kernels A and C only")
    P = profile.gauss_rate + rate
    log_sq = (2.0 * logpref + 2.0 * np.log(abs(profile.amplitude)) + np.log(4.0 * np.pi)
              - 3.0 * np.log(2.0 * np.pi) + special.gammaln(k + 1.5) - np.log(2.0)
              - (k + 1.5) * np.log(P))
    return 0.5 * log_sq


def kernel_bound_ratio(name, k, t, profile, p, tol=1e-10):
    """Convolution norm over its majorant

    e^{-a Gamma t} (1+t)^{-3/4-k/2} ||f||_{L^1 cap H^k}  (kernel A),
    (1+t)^{-3/4-k/2} ||f||_{L^1 cap H^k}                 (kernels B, C).
    """
    lognorm = radial_log_norm(name, k, t, profile, p, tol)
    logmaj = -(0.75 + 0.5 * k) * np.log1p(t) + np.log(profile.l1_hk_norm(k))
    if name == "A":
        logmaj -= p.a * p.gamma * t
    return float(np.exp(lognorm - logmaj))


# -- linear whole-space solution norms --------------------------------------

def sigma_angular_weight(q_tensor):
    """Sphere average of |P(Q n)|^2 over unit n, for a constant symmetric
    traceless Q: |Q|^2/3 - 2|Q|^2/15 = |Q|^2/5."""
    q = np.asarray(q_tensor, dtype=float)
    return float(np.sum(q * q)) / 5.0


def projected_vector_weight(e):
    """Sphere average of |P(n) e|^2 = 2|e|^2/3."""
    e = np.asarray(e, dtype=float)
    return 2.0 * float(e @ e) / 3.0


def linear_q_log_norm(k, t, profile, p, q_weight=1.0, tol=1e-10):
    """log ||d^k Q_L(t)||_{L^2} for Q_0_hat = f_hat(|xi|) Q* with |Q*|^2 = q_weight."""
    return radial_log_norm("A", k, t, profile, p, tol) + 0.5 * np.log(q_weight)


def linear_u_log_norm(k, t, p, q_profile=None, u_profile=None, q_weight=0.0,
                      u_weight=0.0, tol=1e-10):
    """log ||d^k u_L(t)||_{L^2} for radial data.

    Q_0_hat = f_Q(|xi|) Q* and u_0_hat = f_u(|xi|) P(xi) e.  Because B and C
    are real and sigma_0_hat is i times a real vector, the cross term has
    zero real part and the two contributions add in square:

        |u_hat|^2 = B^2 |xi|^2 |P(Q* n)|^2 f_Q^2 + C^2 |P(n) e|^2 f_u^2,

    whose sphere averages are ``q_weight`` = |Q*|^2/5 and ``u_weight`` = 2|e|^2/3.
    """
    terms = []
    res = resonance_k2(p)
    bps = (np.sqrt(res),) if res is not None else ()
    if q_profile is not None and q_weight > 0:
        rate = 2.0 * min(p.mu, p.gamma) * t + q_profile.gauss_rate
        terms.append((np.log(q_weight), lambda r: kernel_B(t, r * r, p) ** 2 * q_profile(r) ** 2,
                      2, rate, q_profile.support))
    if u_profile is not None and u_weight > 0:
        rate = 2.0 * p.mu * t + u_profile.gauss_rate
        terms.append((np.log(u_weight), lambda r: np.exp(-2.0 * p.mu * r * r * t) * u_profile(r) ** 2,
                      0, rate, u_profile.support))
    if not terms:
        raise ValueError("no initial data: both contributions vanish")
    return 0.5 * radial_log_integral(terms, k, tol, bps)
