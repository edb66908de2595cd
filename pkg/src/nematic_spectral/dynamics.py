"""
Nonlinear terms and time integration.

The system is written as

    Q_t - Gamma Delta Q + a Gamma Q = -div f1 + f2,
    u_t - mu Delta u - kappa P div Q = -P div f3,

with f1 = u (x) Q,
     f2 = Omega Q - Q Omega + lam |Q| D + b Gamma [Q^2 - Tr(Q^2)/3 I] - c Gamma Q Tr(Q^2),
     f3 = u (x) u + grad Q (.) grad Q - Q Delta Q + Delta Q Q + lam |Q| H[Q].

Conventions: (grad u)_ij = d_j u_i, (div M)_i = d_j M_ij,
(grad Q (.) grad Q)_ab = d_a Q : d_b Q.  For solenoidal u the transport
term div f1 equals u . grad Q, which is what the default path evaluates.

The linear part is integrated exactly: :func:`step` is classical RK4 on
the interaction-picture variable exp(-L t) w, and every exp(L s) is an
application of :func:`kernels.propagate_linear`.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _fftw
from ._fftw import empty_aligned, padded_real
from .grid import SpectralState, fft_backend
from .kernels import propagate_linear
from .qtensor import bulk_force, expand, matmul, molecular_field, project_coeffs, tr2

ADVECTION_FORMS = ("advective", "conservative")
BACKENDS = ("numba", "numpy")


class BlowUpError(FloatingPointError):
    """Non-finite values appeared in the state."""

    def __init__(self, step, t):
        super().__init__(f"non-finite state at step {step} (t = {t:.6g})")
        self.step = step
        self.t = t


@dataclass
class NonlinearResidual:
    """Fourier coefficients of -div f1 + f2 (gq, 5 comps) and -P div f3 (gu, 3 comps)."""

    gq: np.ndarray
    gu: np.ndarray


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    scheme: str = "if_rk4"
    reproject_every: int = 1
    nonlinear: bool = True
    backend: str = "numba"
    advection: str = "advective"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.scheme != "if_rk4":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.reproject_every < 1:
            raise ValueError("reproject_every must be >= 1")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.advection not in ADVECTION_FORMS:
            raise ValueError(f"unknown advection form {self.advection!r}")


# -- real-space fields ------------------------------------------------------

@dataclass
class PointFields:
    """Real-space values needed by the nonlinear terms.

    ``grad_u[i, j] = d_j u_i`` and ``grad_q[c, j] = d_j q_c``.
    """

    q: np.ndarray
    u: np.ndarray
    grad_u: np.ndarray
    grad_q: np.ndarray
    lap_q: np.ndarray


class _Workspace:
    """Reusable transform buffers for one grid (avoids page-faulting ~100 MB
    of fresh memory on every evaluation)."""

    def __init__(self, grid):
        self.spec = empty_aligned((37,) + grid.spectral_shape, complex)
        self.real = padded_real(37, grid.n)
        self.out = padded_real(14, grid.n)


_workspaces = {}


def _workspace(grid):
    ws = _workspaces.get(grid)
    if ws is None:
        _workspaces.clear()
        ws = _workspaces[grid] = _Workspace(grid)
    return ws


def point_fields(state, _reuse=False):
    """All 37 real fields from one batched inverse transform."""
    g = state.grid
    kx, ky, kz = g.wavevector
    ik = (1j * kx, 1j * ky, 1j * kz)
    ss = g.spectral_shape
    buf = _workspace(g).spec if _reuse else empty_aligned((37,) + ss, complex)
    buf[0:5] = state.qhat
    buf[5:8] = state.uhat
    for i in range(3):
        for j in range(3):
            np.multiply(ik[j], state.uhat[i], out=buf[8 + 3 * i + j])
    for c in range(5):
        for j in range(3):
            np.multiply(ik[j], state.qhat[c], out=buf[17 + 3 * c + j])
    np.multiply(-g.k2, state.qhat, out=buf[32:37])
    if _reuse and fft_backend() == "fftw":
        real = _workspace(g).real
        _fftw.irfft3_into(buf, g.n, real)
    else:
        real = g.backward(buf, overwrite=True, padded=True)
    sh = g.shape
    return PointFields(real[0:5], real[5:8], real[8:17].reshape((3, 3) + sh),
                       real[17:32].reshape((5, 3) + sh), real[32:37])


def assemble_f1(pf):
    """u (x) Q as (3, 5, ...): entry [j, c] = u_j q_c."""
    return pf.u[:, None] * pf.q[None, :]


def _mod_q(q):
    return np.sqrt(tr2(q))


def assemble_f2(pf, p):
    """f2 as S_0^3 coefficients (5, ...)."""
    m = expand(pf.q)
    gu = pf.grad_u
    omega = 0.5 * (gu - np.swapaxes(gu, 0, 1))
    sym = 0.5 * (gu + np.swapaxes(gu, 0, 1))
    comm = matmul(omega, m) - matmul(m, omega)
    out = project_coeffs(comm + p.lam * _mod_q(pf.q) * sym)
    return out + p.gamma * bulk_force(pf.q, p)


def assemble_f3(pf, p):
    """f3 as a (3, 3, ...) real field."""
    m = expand(pf.q)
    lap = expand(pf.lap_q)
    uu = pf.u[:, None] * pf.u[None, :]
    gg = np.einsum("ca...,cb...->ab...", pf.grad_q, pf.grad_q)
    h = expand(molecular_field(pf.q, pf.lap_q, p))
    return uu + gg - matmul(m, lap) + matmul(lap, m) + p.lam * _mod_q(pf.q) * h


def transport(pf):
    """u . grad q as coefficients (5, ...)."""
    return np.einsum("j...,cj...->c...", pf.u, pf.grad_q)


def _pointwise_numpy(pf, p):
    gq = assemble_f2(pf, p) - transport(pf)
    return np.concatenate([gq, assemble_f3(pf, p).reshape((9,) + pf.q.shape[1:])])


def _pointwise_numba(pf, p, out=None):
    from ._pointwise import fused_terms

    sh = pf.q.shape[1:]
    npts = int(np.prod(sh))
    if out is None:
        out = padded_real(14, sh[0])
    flat = [a.reshape(-1, npts) for a in (pf.q, pf.u, pf.grad_u, pf.grad_q, pf.lap_q)]
    fused_terms(*flat, p.a, p.b, p.c, p.lam, p.gamma,
                out[:5].reshape(5, npts), out[5:].reshape(9, npts))
    return out


def nonlinear_residual(state, p, backend="numba", advection="advective"):
    """Dealiased spectral right-hand sides -div f1 + f2 and -P div f3."""
    if advection not in ADVECTION_FORMS:
        raise ValueError(f"unknown advection form {advection!r}")
    g = state.grid
    pf = point_fields(state, _reuse=True)
    if backend == "numba":
        real = _pointwise_numba(pf, p, _workspace(g).out)
    elif backend == "numpy":
        real = _pointwise_numpy(pf, p)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if advection == "conservative":
        # swap -u.grad q for -div(u (x) q)
        real[:5] += transport(pf)
        f1hat = g.forward(assemble_f1(pf))
    spec = g.forward(real)
    gq = spec[:5]
    if advection == "conservative":
        gq = gq - g.divergence(f1hat)
    f3hat = spec[5:].reshape((3, 3) + g.spectral_shape)
    gu = -g.leray_project(g.row_divergence(f3hat))
    return NonlinearResidual(g.dealias(gq), g.dealias(gu))


# -- time stepping ------------------------------------------------------------

def _nl_state(state, p, cfg):
    if not cfg.nonlinear:
        return SpectralState.zeros(state.grid, state.t)
    r = nonlinear_residual(state, p, cfg.backend, cfg.advection)
    return SpectralState(state.grid, r.gq, r.gu, state.t)


def _lin(state, dt, p):
    return propagate_linear(state, dt, p)


def step(state, cfg, p):
    """One integrating-factor RK4 step of size cfg.dt."""
    h = cfg.dt
    h2 = 0.5 * h
    k1 = _nl_state(state, p, cfg)
    w_half = _lin(state, h2, p)
    k1_half = _lin(k1, h2, p)
    k2 = _nl_state(w_half.axpy(h2, k1_half), p, cfg)
    k3 = _nl_state(w_half.axpy(h2, k2), p, cfg)
    w_full = _lin(state, h, p)
    k4 = _nl_state(w_full.axpy(h, _lin(k3, h2, p)), p, cfg)
    mid = _lin(k2.axpy(1.0, k3), h2, p)
    k1_full = _lin(k1, h, p)
    qhat = w_full.qhat + (h / 6.0) * (k1_full.qhat + 2.0 * mid.qhat + k4.qhat)
    uhat = w_full.uhat + (h / 6.0) * (k1_full.uhat + 2.0 * mid.uhat + k4.uhat)
    return SpectralState(state.grid, qhat, uhat, state.t + h)


def hygiene(state):
    """Leray-project u and reapply the dealiasing mask."""
    g = state.grid
    return state.replace(g.dealias(state.qhat), g.leray_project(g.dealias(state.uhat)))


def is_finite(state):
    return bool(np.isfinite(state.qhat).all() and np.isfinite(state.uhat).all())


@dataclass
class RunResult:
    state: SpectralState
    steps: int
    rows: list = field(default_factory=list)


def run(state, cfg, p, horizon, callbacks=(), cadence=1, snapshot=None, snapshot_every=0,
        step_callbacks=()):
    """Advance ``state`` by ``horizon``.

    ``callbacks`` are called as ``cb(state, step_index)`` at step 0 and then
    every ``cadence`` steps (and at the last step); each returned non-None
    value is collected into ``RunResult.rows``.  ``step_callbacks`` are
    called after every step.  ``snapshot(state, step_index)`` is called every
    ``snapshot_every`` steps when given.

    Raises BlowUpError on non-finite values; rows collected so far are
    available on the exception as ``partial``.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    nsteps = int(round(horizon / cfg.dt))
    if abs(nsteps * cfg.dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not a multiple of dt {cfg.dt}")
    cadence = max(1, int(cadence))
    result = RunResult(state, 0)
    t0 = state.t

    def emit(s, i):
        for cb in callbacks:
            row = cb(s, i)
            if row is not None:
                result.rows.append(row)

    emit(state, 0)
    for i in range(1, nsteps + 1):
        # overflow is caught by the finiteness check below
        with np.errstate(over="ignore", invalid="ignore"):
            new = step(state, cfg, p)
        # exact time stamp, no accumulated rounding
        new.t = t0 + i * cfg.dt
        if i % cfg.reproject_every == 0:
            new = hygiene(new)
        if not is_finite(new):
            err = BlowUpError(i, new.t)
            err.partial = result
            raise err
        state = new
        result.state, result.steps = state, i
        for cb in step_callbacks:
            cb(state, i)
        if i % cadence == 0 or i == nsteps:
            emit(state, i)
        if snapshot is not None and snapshot_every and i % snapshot_every == 0:
            snapshot(state, i)
    return result


# -- initial data ---------------------------------------------------------------

def initial_energy(state):
    """E0 = ||Q0||^2_{H^3} + ||u0||^2_{H^2}."""
    g = state.grid
    return g.sobolev_norm(state.qhat, 3) ** 2 + g.sobolev_norm(state.uhat, 2) ** 2


def scale_to_energy(state, e0):
    cur = initial_energy(state)
    if cur == 0:
        raise ValueError("cannot rescale a zero state")
    f = math.sqrt(e0 / cur)
    return state.replace(state.qhat * f, state.uhat * f)


def gaussian_bumps(grid, sigma=1.0, seed=0, e0=1e-2, u_fraction=0.5):
    """Localized Gaussian-envelope Q and u centred in the box.

    Built directly in Fourier space as exp(-sigma^2 |xi|^2 / 2) times random
    constant polarizations, so the fields are exactly periodic.  u carries
    a fraction ``u_fraction`` of E0 and is Leray-projected.
    """
    rng = np.random.default_rng(seed)
    env = np.exp(-0.5 * sigma ** 2 * grid.k2)
    x0 = 0.5 * grid.box_length
    kx, ky, kz = grid.wavevector
    shift = np.exp(-1j * (kx + ky + kz) * x0)
    qpol = rng.standard_normal(5)
    upol = rng.standard_normal(3)
    qhat = grid.dealias(qpol[:, None, None, None] * (env * shift)[None])
    uhat = grid.leray_project(grid.dealias(upol[:, None, None, None] * (env * shift)[None]))
    uhat[:, 0, 0, 0] = 0.0
    st_q = SpectralState(grid, qhat, np.zeros_like(uhat))
    st_u = SpectralState(grid, np.zeros_like(qhat), uhat)
    return _mix(st_q, st_u, e0, u_fraction)


def _mix(st_q, st_u, e0, u_fraction):
    if not 0.0 <= u_fraction <= 1.0:
        raise ValueError("u_fraction must lie in [0, 1]")
    out = []
    for st, frac in ((st_q, 1.0 - u_fraction), (st_u, u_fraction)):
        out.append(scale_to_energy(st, e0 * frac) if frac > 0 else SpectralState.zeros(st.grid))
    return SpectralState(st_q.grid, out[0].qhat, out[1].uhat, 0.0)


def band_limited_random(grid, kmax, seed=0, amplitude=1.0, solenoidal=True, q_amplitude=None):
    """Random real fields with Fourier support in |m_i| <= kmax, unit-scaled
    so that the largest real-space value of each field is ``amplitude``."""
    rng = np.random.default_rng(seed)
    mx, my, mz = grid.mode_index
    keep = (np.abs(mx) <= kmax) & (np.abs(my) <= kmax) & (mz <= kmax)
    keep = np.broadcast_to(keep, grid.spectral_shape)

    def draw(ncomp):
        c = rng.standard_normal((ncomp,) + grid.spectral_shape) \
            + 1j * rng.standard_normal((ncomp,) + grid.spectral_shape)
        c = c * keep
        # forward(backward(.)) restores Hermitian symmetry on the kz = 0 plane
        return grid.forward(grid.backward(c)) * keep

    qhat = draw(5)
    uhat = draw(3)
    if solenoidal:
        uhat = grid.leray_project(uhat)
    qa = amplitude if q_amplitude is None else q_amplitude
    qhat *= qa / max(np.abs(grid.backward(qhat)).max(), 1e-300)
    uhat *= amplitude / max(np.abs(grid.backward(uhat)).max(), 1e-300)
    return SpectralState(grid, qhat, uhat, 0.0)


def single_mode(grid, m, q_coeffs=None, u_vec=None):
    """cos(xi_m . x) times a constant Q (coefficients) and/or u (Leray-projected)."""
    m = tuple(int(v) for v in m)
    kx, ky, kz = (grid.mode_index[i] for i in range(3))
    sel = (kx == m[0]) & (ky == m[1]) & (kz == m[2])
    sel = np.broadcast_to(sel, grid.spectral_shape)
    if m[2] < 0 or not sel.any():
        raise ValueError(f"mode {m} must have m3 >= 0 and lie on the grid")
    ss = grid.spectral_shape
    qhat = np.zeros((5,) + ss, complex)
    uhat = np.zeros((3,) + ss, complex)
    # cos = (e^{i xi.x} + e^{-i xi.x})/2; on the m3 = 0 plane the conjugate
    # partner is stored explicitly
    partner = (-m[0] % grid.n, -m[1] % grid.n, 0)
    idx = tuple(v % grid.n for v in m[:2]) + (m[2],)
    for arr, vec in ((qhat, q_coeffs), (uhat, u_vec)):
        if vec is None:
            continue
        for ci, v in enumerate(vec):
            arr[ci][idx] += 0.5 * v
            if m[2] == 0:
                arr[ci][partner] += 0.5 * v
    uhat = grid.leray_project(uhat)
    return SpectralState(grid, qhat, uhat, 0.0)
