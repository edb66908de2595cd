"""
Norm and energy monitors, decay fits, and numerical checks of the
commutator, |Q| and cancellation estimates.

Sobolev conventions follow :mod:`grid`: ||f||^2_{H^s} sums ||d^alpha f||^2
over all multi-indices |alpha| <= s, and ||d^k f|| stands for the
homogeneous part |alpha| = k.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import homogeneous_symbol, multi_indices, sobolev_symbol
from .qtensor import expand, norm as qnorm


# -- energy functionals ----------------------------------------------------------

@dataclass
class EnergyReport:
    t: float
    E: float
    D: float
    N: float
    Mw: float
    Hq: float
    trace_res: float
    div_res: float
    mean_u: float
    norms_q: list = field(default_factory=list)
    norms_u: list = field(default_factory=list)


class NormTable:
    """Spectral power of Q and u with cached weighted sums.

    Reuses one |q_hat|^2 and |u_hat|^2 per state for every functional, so
    no transforms are needed.
    """

    def __init__(self, state):
        g = state.grid
        self.grid = g
        self.L3 = g.box_length ** 3
        pw = g.parseval_weight
        self.pq = (np.abs(state.qhat) ** 2).sum(axis=0) * pw
        self.pu = (np.abs(state.uhat) ** 2).sum(axis=0) * pw
        self.k2 = g.k2
        self._sym = {}

    def _symbol(self, kind, order):
        key = (kind, order)
        if key not in self._sym:
            wv = self.grid.wavevector
            if kind == "h":
                self._sym[key] = homogeneous_symbol(wv, order) + 0.0 * self.k2
            else:
                self._sym[key] = sobolev_symbol(wv, order)
        return self._sym[key]

    def q(self, weight):
        return self.L3 * float(np.sum(self.pq * weight))

    def u(self, weight):
        return self.L3 * float(np.sum(self.pu * weight))

    def hom(self, kind, order):
        """||d^order f||^2 for f = 'q' or 'u'."""
        w = self._symbol("h", order)
        return self.q(w) if kind == "q" else self.u(w)

    def mixed(self, k, s):
        """Weight of ||d^k f||^2_{H^(s-k)}."""
        return self._symbol("h", k) * self._symbol("s", s - k)


def energy_functionals(state, s, p, grid_checks=True):
    """E, D, N, Mw and Hq at the state's time, plus invariant residuals.

    N and Mw use the time weights (1+t)^k, Hq the weights
    (1+t)^(3/4+k/2) and exp(a Gamma t / 2) on the Q part.
    """
    if p.a <= 0:
        raise ValueError("energy functionals require a > 0")
    if s < 0:
        raise ValueError("s must be nonnegative")
    M = p.energy_weight
    nt = NormTable(state)
    k2 = nt.k2
    hs = nt._symbol("s", s)
    u_hs = nt.u(hs)
    q_hs = nt.q(hs)
    gq_hs = nt.q(k2 * hs)
    E = u_hs + M * q_hs + gq_hs
    D = (p.mu * nt.u(k2 * hs) + p.a * M * p.gamma * q_hs + (p.a + M) * p.gamma * gq_hs
         + p.gamma * nt.q(k2 * k2 * hs))
    t = state.t
    N = Mw = 0.0
    for k in range(s + 1):
        w = nt.mixed(k, s)
        tw = (1.0 + t) ** k
        N += tw * (nt.u(w) + M * nt.q(w) + nt.q(k2 * w))
        Mw += tw * (0.5 * p.mu * nt.u(k2 * w) + 0.5 * p.a * M * p.gamma * nt.q(w)
                    + (p.a + M) * p.gamma * nt.q(k2 * w) + p.gamma * nt.q(k2 * k2 * w))
    norms_q = [math.sqrt(nt.hom("q", k)) for k in range(s + 2)]
    norms_u = [math.sqrt(nt.hom("u", k)) for k in range(s + 1)]
    Hq = 0.0
    for k in range(max(s - 1, 0)):
        Hq += (1.0 + t) ** (0.75 + 0.5 * k) * norms_u[k]
    eq = math.exp(0.5 * p.a * p.gamma * t)
    for k in range(s):
        Hq += (1.0 + t) ** (0.75 + 0.5 * k) * eq * norms_q[k]
    if grid_checks:
        tr_res = trace_residual(state)
    else:
        tr_res = float("nan")
    return EnergyReport(t, E, D, N, Mw, Hq, tr_res, divergence_residual(state),
                        mean_velocity(state), norms_q, norms_u)


def linear_energy(state, s, p):
    """E alone (cheap; used for step-to-step monotonicity checks)."""
    M = p.energy_weight
    nt = NormTable(state)
    hs = nt._symbol("s", s)
    return nt.u(hs) + M * nt.q(hs) + nt.q(nt.k2 * hs)


def trace_residual(state):
    """Max over the grid of |Tr Q| after expansion to 3x3 matrices."""
    q = state.grid.backward(state.qhat)
    m = expand(q)
    return float(np.max(np.abs(m[0, 0] + m[1, 1] + m[2, 2])))


def divergence_residual(state):
    """Max over modes of |xi . u_hat| / (|xi| |u_hat|)."""
    g = state.grid
    kx, ky, kz = g.wavevector
    dot = np.abs(kx * state.uhat[0] + ky * state.uhat[1] + kz * state.uhat[2])
    mag = np.sqrt(g.k2) * np.sqrt((np.abs(state.uhat) ** 2).sum(axis=0))
    ok = mag > 1e-300
    if not ok.any():
        return 0.0
    return float(np.max(dot[ok] / mag[ok]))


def mean_velocity(state):
    """|u_hat(0)|, the box-averaged velocity."""
    return float(np.sqrt(np.sum(np.abs(state.uhat[:, 0, 0, 0]) ** 2)))


def grid_max_norms(state, kmax=1):
    """max_x |d^k Q| and max_x |d^k u| for k <= kmax (an L^inf proxy that is
    exact only up to grid resolution)."""
    g = state.grid
    out = {}
    for k in range(kmax + 1):
        for name, fhat in (("Q", state.qhat), ("u", state.uhat)):
            acc = 0.0
            for a in multi_indices(k):
                f = g.backward(g.derivative(fhat, a))
                acc = acc + (f ** 2).sum(axis=0)
            out[f"max_d{k}{name}"] = float(np.sqrt(np.max(acc)))
    return out


# -- decay fits --------------------------------------------------------------------

@dataclass
class DecayFit:
    logC: float
    alpha: float
    beta: float
    rss: float
    window: tuple

    def model(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(self.logC - self.alpha * np.log1p(t) - self.beta * t)


def fit_decay(t, y, window=None, log_y=False):
    """Least-squares fit of log y = logC - alpha log(1+t) - beta t.

    ``window`` = (t_lo, t_hi) inclusive; the default is the last decade of
    the samples, [t_max/10, t_max].  With ``log_y`` the values are already
    logarithms (useful when y underflows).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError("t and y must be 1-D arrays of equal length")
    if window is None:
        window = (t.max() / 10.0, t.max())
    lo, hi = window
    sel = (t >= lo) & (t <= hi)
    if np.count_nonzero(sel) < 4:
        raise ValueError(f"need at least 4 samples in window {window}, got "
                         f"{np.count_nonzero(sel)}")
    ts, ys = t[sel], y[sel]
    if log_y:
        ly = ys
        if not np.all(np.isfinite(ly)):
            raise ValueError("log values must be finite")
    else:
        if np.any(ys <= 0) or not np.all(np.isfinite(ys)):
            raise ValueError("all samples must be positive and finite")
        ly = np.log(ys)
    X = np.column_stack([np.ones_like(ts), -np.log1p(ts), -ts])
    # column scaling keeps the normal equations well conditioned
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    coef, _, rank, sv = np.linalg.lstsq(X / scale, ly, rcond=None)
    if rank < 3 or sv[-1] < 1e-12 * sv[0]:
        raise np.linalg.LinAlgError("singular design matrix: degenerate t samples")
    coef = coef / scale
    resid = ly - X @ coef
    return DecayFit(float(coef[0]), float(coef[1]), float(coef[2]),
                    float(resid @ resid), (float(lo), float(hi)))


def lower_bound_check(t, y, k):
    """(inf, sup) of the compensated series (1+t)^(3/4+k/2) y(t)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("lower bound check needs a positive, finite series")
    comp = (1.0 + t) ** (0.75 + 0.5 * k) * y
    return float(comp.min()), float(comp.max())


# -- commutator and |Q| estimates ----------------------------------------------

def _hs(grid, fhat, s):
    return grid.sobolev_norm(fhat, s)


def _commutator_norm(grid, ahat, bhat_vec, k):
    """sqrt(sum_{|alpha|=k} ||d^alpha(a B) - a d^alpha B||^2) for vector B.

    Products are formed on the grid; inputs must be band-limited so that
    they are alias-free.
    """
    a = grid.backward(ahat)
    total = 0.0
    prod_hat = grid.forward(a[None] * grid.backward(bhat_vec))
    for alpha in multi_indices(k):
        left = grid.derivative(prod_hat, alpha)
        right = grid.forward(a[None] * grid.backward(grid.derivative(bhat_vec, alpha)))
        total += grid.inner_sum(left - right)
    return math.sqrt(total)


def commutator_ratio(grid, psi_hat, phi_hat, Phi_hat, k, s):
    """The three commutator ratios

    ||d^k(psi grad phi) - psi d^k grad phi|| / (||psi||_{H^s} ||phi||_{H^(s+1)}),
    ||d^k(phi grad psi) - phi d^k grad psi|| / (||psi||_{H^s} ||phi||_{H^(s+1)}),
    ||d^k(phi Delta Phi) - phi d^k Delta Phi|| / (||phi||_{H^(s+1)} ||Phi||_{H^(s+1)}).

    Scalar fields are given as Fourier coefficients.  A zero denominator
    gives a zero ratio (the numerator vanishes with it).
    """
    if s < 2 or k < 0 or k > s:
        raise ValueError("need s >= 2 and 0 <= k <= s")
    n_psi = _hs(grid, psi_hat, s)
    n_phi = _hs(grid, phi_hat, s + 1)
    n_Phi = _hs(grid, Phi_hat, s + 1)

    def ratio(num, den):
        return 0.0 if den == 0 else num / den

    c3 = _commutator_norm(grid, psi_hat, grid.gradient(phi_hat), k)
    c4 = _commutator_norm(grid, phi_hat, grid.gradient(psi_hat), k)
    c5 = _commutator_norm(grid, phi_hat, grid.laplacian(Phi_hat)[None], k)
    return ratio(c3, n_psi * n_phi), ratio(c4, n_psi * n_phi), ratio(c5, n_phi * n_Phi)


def modQ_sobolev_ratio(grid, qhat, s):
    """||(|Q|)||_{H^s} / ||Q||_{H^s} with |Q| evaluated pointwise on the grid."""
    if s < 1:
        raise ValueError("s must be >= 1")
    den = grid.sobolev_norm(qhat, s)
    if den == 0:
        raise ZeroDivisionError("Q is zero")
    mod = qnorm(grid.backward(qhat))
    return grid.sobolev_norm(grid.forward(mod), s) / den


# -- cancellation identities ----------------------------------------------------

def _inner(grid, a, b):
    """Grid quadrature of sum a*b over components; exact for band-limited
    products whose total bandwidth stays below n."""
    dv = (grid.box_length / grid.n) ** 3
    return float(np.sum(a * b)) * dv


def _l2(grid, a):
    return math.sqrt(max(_inner(grid, a, a), 0.0))


def _residual(grid, pairs_plus, pairs_minus=()):
    val = sum(_inner(grid, a, b) for a, b in pairs_plus) - \
        sum(_inner(grid, a, b) for a, b in pairs_minus)
    scale = sum(_l2(grid, a) * _l2(grid, b) for a, b in list(pairs_plus) + list(pairs_minus))
    return 0.0 if scale == 0 else abs(val) / scale


def cancellation_residuals(state, g_hat=None):
    """Normalized residuals of the five cancellation identities

    (1) (u.grad u, u) = (u.grad Q, Q) = 0                 (max of the two)
    (2) (Q Omega - Omega Q, Q) = 0
    (3) (u.grad Q, Delta Q) - (div(grad Q (.) grad Q), u) = 0
    (4) (G Omega - Omega G, Delta Q) - (G Delta Q - Delta Q G, grad u) = 0
    (5) (|G| Delta Q, grad u) - (|G| D, Delta Q) = 0

    each divided by the sum of the Cauchy-Schwarz products of its factors.
    G defaults to Q.  Identities (1) and (3) rely on div u = 0.  Inputs
    should be band-limited to |m| < n/4 so every product is alias-free.
    """
    g = state.grid
    if g_hat is None:
        g_hat = state.qhat
    q = g.backward(state.qhat)
    u = g.backward(state.uhat)
    gu = g.backward(g.gradient(state.uhat))        # [j, i] = d_j u_i
    grad_u = np.swapaxes(gu, 0, 1)                  # [i, j] = d_j u_i
    gq = g.backward(g.gradient(state.qhat))         # [j, c] = d_j q_c
    lq = g.backward(g.laplacian(state.qhat))
    Q, LQ, G = expand(q), expand(lq), expand(g.backward(g_hat))
    omega = 0.5 * (grad_u - np.swapaxes(grad_u, 0, 1))
    sym = 0.5 * (grad_u + np.swapaxes(grad_u, 0, 1))

    def mm(a, b):
        return np.einsum("ik...,kj...->ij...", a, b)

    u_grad_u = np.einsum("j...,ji...->i...", u, gu)
    u_grad_q = np.einsum("j...,jc...->c...", u, gq)
    r1 = max(_residual(g, [(u_grad_u, u)]), _residual(g, [(u_grad_q, q)]))
    r2 = _residual(g, [(mm(Q, omega) - mm(omega, Q), Q)])
    # (grad Q (.) grad Q)_ab = d_a q . d_b q; its row divergence via the spectrum
    gg = np.einsum("ac...,bc...->ab...", gq, gq)
    div_gg = g.backward(g.row_divergence(g.forward(gg)))
    r3 = _residual(g, [(u_grad_q, lq)], [(div_gg, u)])
    r4 = _residual(g, [(mm(G, omega) - mm(omega, G), LQ)], [(mm(G, LQ) - mm(LQ, G), grad_u)])
    modg = np.sqrt(np.einsum("ij...,ij...->...", G, G))
    r5 = _residual(g, [(modg * LQ, grad_u)], [(modg * sym, LQ)])
    return [r1, r2, r3, r4, r5]
