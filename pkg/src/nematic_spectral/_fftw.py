"""Thin ctypes binding to the system FFTW3 library (3D real transforms only).

Used by :class:`grid.GridSpec` when libfftw3 is present; otherwise the
transforms fall back to scipy.fft.  Plans use FFTW_ESTIMATE, which is
deterministic, so repeated runs are bitwise reproducible.
"""

import ctypes
import ctypes.util
import threading

import numpy as np

_ESTIMATE = 1 << 6
_DESTROY_INPUT = 1
_ALIGN = 64

_lock = threading.Lock()
_plans = {}


def _load():
    for name in ("libfftw3.so.3", ctypes.util.find_library("fftw3")):
        if not name:
            continue
        try:
            lib = ctypes.CDLL(name)
        except OSError:
            continue
        vp, ip = ctypes.c_void_p, ctypes.POINTER(ctypes.c_int)
        for fn in (lib.fftw_plan_many_dft_r2c, lib.fftw_plan_many_dft_c2r):
            fn.restype = vp
            fn.argtypes = [ctypes.c_int, ip, ctypes.c_int, vp, ip, ctypes.c_int, ctypes.c_int,
                           vp, ip, ctypes.c_int, ctypes.c_int, ctypes.c_uint]
        lib.fftw_execute_dft_r2c.argtypes = [vp, vp, vp]
        lib.fftw_execute_dft_c2r.argtypes = [vp, vp, vp]
        return lib
    return None


_lib = _load()


def available():
    return _lib is not None


def empty_aligned(shape, dtype=float):
    """Uninitialized array whose data pointer is 64-byte aligned."""
    dtype = np.dtype(dtype)
    nbytes = int(np.prod(shape, dtype=int)) * dtype.itemsize
    raw = np.empty(nbytes + _ALIGN, dtype=np.uint8)
    off = (-raw.ctypes.data) % _ALIGN
    return raw[off:off + nbytes].view(dtype).reshape(shape)


def _aligned_copy(a, dtype):
    out = empty_aligned(a.shape, dtype)
    out[...] = a
    return out


def _ok(a, dtype):
    return a.dtype == dtype and a.flags.c_contiguous and a.ctypes.data % _ALIGN == 0


#: Extra doubles between consecutive real fields in a batch.  Fields laid
#: out at exact power-of-two distances map to the same cache sets, which
#: makes per-point loops over many components several times slower.
PAD = 8


def padded_real(howmany, n):
    """(howmany, n, n, n) view into a buffer with row distance n^3 + PAD."""
    buf = empty_aligned((howmany, n ** 3 + PAD))
    return buf[:, :n ** 3].reshape((howmany, n, n, n))


def _real_dist(a, n):
    """Element distance between consecutive fields of a batched real array,
    or None if the layout is not a uniform batch of contiguous cubes."""
    if a.dtype != np.float64 or a.ndim < 3:
        return None
    cube = a.shape[-3:]
    if a.strides[-3:] != (8 * n * n, 8 * n, 8) or cube != (n, n, n):
        return None
    shape, strides = a.shape[:-3], a.strides[:-3]
    dims = [(sh, st) for sh, st in zip(shape, strides) if sh > 1]
    dist_bytes = dims[-1][1] if dims else 8 * n ** 3
    for (sh0, st0), (sh1, st1) in zip(dims[:-1], dims[1:]):
        if st0 != st1 * sh1:
            return None
    if dist_bytes % 8:
        return None
    dist = dist_bytes // 8
    if dist < n ** 3 or a.ctypes.data % _ALIGN or (8 * dist) % _ALIGN:
        return None
    return dist


def _plan(kind, n, howmany, dist):
    key = (kind, n, howmany, dist)
    plan = _plans.get(key)
    if plan is not None:
        return plan
    with _lock:
        dims = (ctypes.c_int * 3)(n, n, n)
        nc = n * n * (n // 2 + 1)
        real = empty_aligned((howmany, dist))
        spec = empty_aligned((howmany, nc), complex)
        flags = _ESTIMATE
        if kind == "r2c":
            plan = _lib.fftw_plan_many_dft_r2c(3, dims, howmany, real.ctypes.data, None, 1, dist,
                                                spec.ctypes.data, None, 1, nc, flags)
        else:
            plan = _lib.fftw_plan_many_dft_c2r(3, dims, howmany, spec.ctypes.data, None, 1, nc,
                                                real.ctypes.data, None, 1, dist,
                                                flags | _DESTROY_INPUT)
        if not plan:
            raise RuntimeError("FFTW plan creation failed")
        _plans[key] = plan
    return plan


def rfft3(f, n):
    """Unnormalized forward real transform over the last three axes."""
    lead = f.shape[:-3]
    howmany = int(np.prod(lead, dtype=int))
    dist = _real_dist(f, n)
    if dist is None:
        f = _aligned_copy(f, np.float64)
        dist = n ** 3
    out = empty_aligned(lead + (n, n, n // 2 + 1), complex)
    _lib.fftw_execute_dft_r2c(_plan("r2c", n, howmany, dist), f.ctypes.data, out.ctypes.data)
    return out


def irfft3(fhat, n, overwrite=False, padded=False):
    """Unnormalized inverse real transform over the last three axes.

    With ``padded`` the result is a view with the :data:`PAD` batch layout.
    """
    lead = fhat.shape[:-3]
    howmany = int(np.prod(lead, dtype=int))
    if overwrite and _ok(fhat, np.complex128):
        src = fhat
    else:
        # c2r overwrites its input
        src = _aligned_copy(fhat, np.complex128)
    if padded:
        out = padded_real(howmany, n)
        dist = n ** 3 + PAD
    else:
        out = empty_aligned((howmany, n, n, n))
        dist = n ** 3
    _lib.fftw_execute_dft_c2r(_plan("c2r", n, howmany, dist), src.ctypes.data, out.ctypes.data)
    return out.reshape(lead + (n, n, n))


def irfft3_into(fhat, n, out):
    """Inverse transform of a contiguous aligned batch into ``out`` (a
    :func:`padded_real` view); ``fhat`` is destroyed."""
    howmany = fhat.shape[0]
    if not _ok(fhat, np.complex128) or out.shape != (howmany, n, n, n):
        raise ValueError("irfft3_into needs an aligned contiguous batch and a matching output")
    dist = _real_dist(out, n)
    if dist is None:
        raise ValueError("output layout not supported")
    _lib.fftw_execute_dft_c2r(_plan("c2r", n, howmany, dist), fhat.ctypes.data, out.ctypes.data)
    return out
