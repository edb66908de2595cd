"""
Periodic pseudo-spectral machinery on the box [0, L)^3.

Fields are stored as Fourier-series coefficients in the real-FFT layout:
a real field of shape (..., n, n, n) maps to complex coefficients of shape
(..., n, n, n//2 + 1) with

    f(x) = sum_m c_m exp(i xi_m . x),    xi_m = (2 pi / L) m.

The Nyquist wavenumber is zeroed in every derivative multiplier, and the
Nyquist coefficients themselves are removed by :meth:`GridSpec.dealias`
under every rule (including ``none``), so the state never carries them.

Norms follow ||f||^2_{L^2} = L^3 sum |c_m|^2 and
||f||^2_{H^s} = sum_{|alpha| <= s} ||d^alpha f||^2_{L^2}.
"""

import itertools
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from . import _fftw
from .qtensor import expand

DEALIAS_RULES = ("two_thirds", "half", "none")
FFT_BACKENDS = ("auto", "fftw", "scipy")

_WORKERS = None
_FFT_BACKEND = None


def set_workers(n):
    """Worker count used by the transforms (None: env NEMATIC_WORKERS or 1)."""
    global _WORKERS
    if n is not None and int(n) < 1:
        raise ValueError(f"workers must be >= 1, got {n}")
    _WORKERS = None if n is None else int(n)


def workers():
    if _WORKERS is not None:
        return _WORKERS
    return int(os.environ.get("NEMATIC_WORKERS", "1"))


def set_fft_backend(name):
    """Select 'fftw', 'scipy' or 'auto' (None: env NEMATIC_FFT or auto).

    'auto' uses the system FFTW3 library for single-worker runs when it can
    be loaded and scipy.fft otherwise.
    """
    global _FFT_BACKEND
    if name is not None and name not in FFT_BACKENDS:
        raise ValueError(f"unknown FFT backend {name!r}")
    if name == "fftw" and not _fftw.available():
        raise RuntimeError("libfftw3 could not be loaded")
    _FFT_BACKEND = name


def fft_backend():
    """The backend the next transform will use."""
    name = _FFT_BACKEND or os.environ.get("NEMATIC_FFT", "auto")
    if name == "auto":
        return "fftw" if (_fftw.available() and workers() == 1) else "scipy"
    return name


@dataclass(frozen=True)
class GridSpec:
    n: int
    box_length: float = 2 * np.pi
    dealias_rule: str = "two_thirds"

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")
        if self.dealias_rule not in DEALIAS_RULES:
            raise ValueError(f"unknown dealias rule {self.dealias_rule!r}")

    # -- index and wavenumber tables -------------------------------------
    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self):
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def k0(self):
        return 2 * np.pi / self.box_length

    @cached_property
    def mode_index(self):
        """Integer mode numbers (m1, m2, m3), broadcastable to spectral_shape."""
        n = self.n
        m = np.fft.fftfreq(n, 1.0 / n).astype(int)
        mz = np.arange(n // 2 + 1)
        return (m.reshape(n, 1, 1), m.reshape(1, n, 1), mz.reshape(1, 1, -1))

    @cached_property
    def wavevector(self):
        """xi components with the Nyquist entry zeroed."""
        out = []
        for m in self.mode_index:
            xi = self.k0 * m.astype(float)
            xi[np.abs(m) == self.n // 2] = 0.0
            out.append(xi)
        return tuple(out)

    @cached_property
    def k2(self):
        kx, ky, kz = self.wavevector
        return kx ** 2 + ky ** 2 + kz ** 2

    @cached_property
    def parseval_weight(self):
        """Multiplicity of each stored coefficient in the full spectrum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w.reshape(1, 1, -1)

    @cached_property
    def dealias_mask(self):
        mx, my, mz = self.mode_index
        n = self.n
        if self.dealias_rule == "two_thirds":
            cut = n / 3.0
        elif self.dealias_rule == "half":
            cut = n / 4.0
        else:
            cut = n / 2.0 - 1
        keep = (np.abs(mx) <= cut) & (np.abs(my) <= cut) & (mz <= cut)
        return np.broadcast_to(keep, self.spectral_shape).copy()

    def coordinates(self):
        x = np.arange(self.n) * (self.box_length / self.n)
        return np.meshgrid(x, x, x, indexing="ij")

    # -- transforms --------------------------------------------------------
    def forward(self, f):
        """Real field (..., n, n, n) -> Fourier-series coefficients."""
        f = np.asarray(f)
        if f.shape[-3:] != self.shape:
            raise ValueError(f"field shape {f.shape} does not match grid {self.shape}")
        if fft_backend() == "fftw":
            out = _fftw.rfft3(f, self.n)
            out *= 1.0 / self.n ** 3
            return out
        return scipy.fft.rfftn(f, axes=(-3, -2, -1), norm="forward", workers=workers())

    def backward(self, fhat, overwrite=False, padded=False):
        """Coefficients -> real field.

        ``overwrite`` lets the transform reuse the input buffer as scratch.
        ``padded`` returns a batch whose fields are spaced n^3 + PAD apart,
        the layout the fused nonlinear kernel prefers.
        """
        fhat = np.asarray(fhat)
        if fhat.shape[-3:] != self.spectral_shape:
            raise ValueError(f"coefficient shape {fhat.shape} does not match "
                             f"{self.spectral_shape}")
        if fft_backend() == "fftw":
            return _fftw.irfft3(fhat, self.n, overwrite, padded)
        out = scipy.fft.irfftn(fhat, s=self.shape, axes=(-3, -2, -1), norm="forward",
                               workers=workers(), overwrite_x=overwrite)
        if padded:
            lead = out.shape[:-3]
            buf = _fftw.padded_real(int(np.prod(lead, dtype=int)), self.n)
            buf[...] = out.reshape(buf.shape)
            out = buf.reshape(out.shape)
        return out

    # -- multipliers -------------------------------------------------------
    def derivative(self, fhat, alpha):
        """Apply d^alpha for a multi-index alpha = (a1, a2, a3)."""
        mult = np.ones(self.spectral_shape, dtype=complex)
        for xi, a in zip(self.wavevector, alpha):
            if a:
                mult = mult * (1j * xi) ** a
        return fhat * mult

    def gradient(self, fhat):
        """(..., spectral) -> (3, ..., spectral); entry j is d_j f."""
        return np.stack([1j * xi * fhat for xi in self.wavevector])

    def laplacian(self, fhat):
        return -self.k2 * fhat

    def divergence(self, vhat):
        """sum_j d_j v_j over the leading axis."""
        kx, ky, kz = self.wavevector
        return 1j * (kx * vhat[0] + ky * vhat[1] + kz * vhat[2])

    def row_divergence(self, mhat):
        """(div M)_i = sum_j d_j M_ij for mhat of shape (3, 3, spectral)."""
        kx, ky, kz = self.wavevector
        return 1j * (kx * mhat[:, 0] + ky * mhat[:, 1] + kz * mhat[:, 2])

    def leray_project(self, uhat):
        """(I - xi xi^T / |xi|^2) u per mode; the xi = 0 mode passes through."""
        kx, ky, kz = self.wavevector
        k2 = self.k2
        inv = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
        dot = (kx * uhat[0] + ky * uhat[1] + kz * uhat[2]) * inv
        return np.stack([uhat[0] - kx * dot, uhat[1] - ky * dot, uhat[2] - kz * dot])

    def sigma_from_q(self, qhat):
        """Fourier coefficients of P div Q for Q given in basis coefficients."""
        return self.leray_project(self.row_divergence(expand(qhat)))

    def dealias(self, fhat):
        return fhat * self.dealias_mask

    # -- norms --------------------------------------------------------------
    def inner_sum(self, fhat, ghat=None):
        """L^3 sum over the full spectrum of conj(f) g (real part), all components."""
        if ghat is None:
            val = (fhat.real ** 2 + fhat.imag ** 2)
        else:
            val = (fhat.conj() * ghat).real
        val = val.reshape((-1,) + self.spectral_shape).sum(axis=0)
        return self.box_length ** 3 * float(np.sum(val * self.parseval_weight))

    def weighted_sum(self, fhat, weight):
        """L^3 sum w |c|^2 over the full spectrum, summed over components."""
        val = (fhat.real ** 2 + fhat.imag ** 2).reshape((-1,) + self.spectral_shape).sum(axis=0)
        return self.box_length ** 3 * float(np.sum(val * weight * self.parseval_weight))

    def l2_norm(self, fhat):
        return np.sqrt(self.inner_sum(fhat))

    def sobolev_weight(self, s, homogeneous=False):
        return sobolev_symbol(self.wavevector, s, homogeneous)

    def sobolev_norm(self, fhat, s, homogeneous=False):
        """H^s norm (or the homogeneous |alpha| = s part) by Parseval."""
        if s < 0:
            raise ValueError("s must be nonnegative")
        return np.sqrt(self.weighted_sum(fhat, self.sobolev_weight(s, homogeneous)))

    def realspace_l2(self, f):
        """Quadrature of |f|^2 over the box (summed over components), square-rooted."""
        dv = (self.box_length / self.n) ** 3
        return np.sqrt(float(np.sum(np.asarray(f) ** 2)) * dv)


def multi_indices(order):
    """All alpha in N^3 with |alpha| == order."""
    return [a for a in itertools.product(range(order + 1), repeat=3) if sum(a) == order]


def homogeneous_symbol(wavevector, order):
    """sum_{|alpha| = order} xi^(2 alpha)."""
    sq = [xi ** 2 for xi in wavevector]
    out = 0.0
    for a in multi_indices(order):
        out = out + sq[0] ** a[0] * sq[1] ** a[1] * sq[2] ** a[2]
    return out


def sobolev_symbol(wavevector, s, homogeneous=False):
    """Fourier weight of ||.||^2_{H^s}: sum_{|alpha| <= s} xi^(2 alpha)."""
    if homogeneous:
        return homogeneous_symbol(wavevector, s) + 0.0 * wavevector[0]
    out = 0.0 * (wavevector[0] + wavevector[1] + wavevector[2])
    for j in range(s + 1):
        out = out + homogeneous_symbol(wavevector, j)
    return out


@dataclass
class SpectralState:
    """Fourier coefficients of (Q, u) on one grid at time t.

    ``qhat`` has shape (5, *spectral_shape) in the S_0^3 basis and ``uhat``
    has shape (3, *spectral_shape).
    """

    grid: GridSpec
    qhat: np.ndarray
    uhat: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        ss = self.grid.spectral_shape
        if self.qhat.shape != (5,) + ss or self.uhat.shape != (3,) + ss:
            raise ValueError(f"state shapes {self.qhat.shape}, {self.uhat.shape} "
                             f"do not match grid {ss}")

    @classmethod
    def zeros(cls, grid, t=0.0):
        ss = grid.spectral_shape
        return cls(grid, np.zeros((5,) + ss, complex), np.zeros((3,) + ss, complex), t)

    @classmethod
    def from_real(cls, grid, q, u, t=0.0):
        """Build from real-space coefficient fields; u is Leray-projected and
        both fields are dealiased."""
        qhat = grid.dealias(grid.forward(q))
        uhat = grid.leray_project(grid.dealias(grid.forward(u)))
        return cls(grid, qhat, uhat, t)

    def copy(self):
        return SpectralState(self.grid, self.qhat.copy(), self.uhat.copy(), self.t)

    def replace(self, qhat=None, uhat=None, t=None):
        return SpectralState(self.grid,
                             self.qhat if qhat is None else qhat,
                             self.uhat if uhat is None else uhat,
                             self.t if t is None else t)

    def real_fields(self):
        return self.grid.backward(self.qhat), self.grid.backward(self.uhat)

    def axpy(self, alpha, other):
        """self + alpha * other (time of self kept)."""
        return self.replace(self.qhat + alpha * other.qhat, self.uhat + alpha * other.uhat)
