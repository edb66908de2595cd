"""
Binary snapshots, CSV series, plot scripts and run manifests.

Snapshot layout (all little-endian)::

    magic      4s   b"ANLQ"
    version    u16
    dealias    u8   index into grid.DEALIAS_RULES
    pad        u8
    dims       3 x u32
    box_length f64
    params     8 x f64  (a, b, c, c_star, kappa, lam, mu, gamma)
    t          f64
    hdr_crc    u32  CRC-32 of the bytes above
    payload    complex128 coefficients, q_hat (5 comps) then u_hat (3 comps),
               component-major, real/imaginary interleaved
    data_crc   u32  CRC-32 of the payload
"""

import csv
import json
import os
import struct
import zlib

import numpy as np

from .grid import DEALIAS_RULES, GridSpec, SpectralState
from .qtensor import PhysParams

MAGIC = b"ANLQ"
VERSION = 1
_HEADER = struct.Struct("<4sHBx3Id8dd")


class SnapshotError(IOError):
    pass


def save_snapshot(state, p, path):
    g = state.grid
    header = _HEADER.pack(MAGIC, VERSION, DEALIAS_RULES.index(g.dealias_rule), g.n, g.n, g.n,
                          g.box_length, *p.as_array(), state.t)
    payload = np.concatenate([state.qhat.ravel(), state.uhat.ravel()]).astype("<c16").tobytes()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(struct.pack("<I", zlib.crc32(header)))
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))
    os.replace(tmp, path)


def load_snapshot(path):
    """Return (state, PhysParams)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    hs = _HEADER.size
    if len(blob) < hs + 4:
        raise SnapshotError(f"{path}: truncated header (checksum cannot be verified)")
    header = blob[:hs]
    fields = _HEADER.unpack(header)
    magic, version = fields[0], fields[1]
    if magic != MAGIC:
        raise SnapshotError(f"{path}: not a snapshot (bad magic {magic!r})")
    (hcrc,) = struct.unpack("<I", blob[hs:hs + 4])
    if zlib.crc32(header) != hcrc:
        raise SnapshotError(f"{path}: header checksum mismatch")
    if version != VERSION:
        raise SnapshotError(f"{path}: snapshot format version {version} is not supported "
                            f"(this build reads version {VERSION})")
    rule, n1, n2, n3, box = fields[2], fields[3], fields[4], fields[5], fields[6]
    params, t = fields[7:15], fields[15]
    if not (n1 == n2 == n3):
        raise SnapshotError(f"{path}: non-cubic grid {n1}x{n2}x{n3}")
    grid = GridSpec(n1, box, DEALIAS_RULES[rule])
    ss = grid.spectral_shape
    ncoef = 8 * int(np.prod(ss))
    body = blob[hs + 4:]
    if len(body) != 16 * ncoef + 4:
        raise SnapshotError(f"{path}: payload checksum error (size {len(body)} bytes, "
                            f"expected {16 * ncoef + 4}; file truncated?)")
    payload = body[:-4]
    (dcrc,) = struct.unpack("<I", body[-4:])
    if zlib.crc32(payload) != dcrc:
        raise SnapshotError(f"{path}: payload checksum mismatch")
    coef = np.frombuffer(payload, dtype="<c16").astype(complex)
    qhat = coef[:5 * ss[0] * ss[1] * ss[2]].reshape((5,) + ss).copy()
    uhat = coef[5 * ss[0] * ss[1] * ss[2]:].reshape((3,) + ss).copy()
    return SpectralState(grid, qhat, uhat, t), PhysParams.from_array(params)


# -- series --------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


class SeriesWriter:
    """Streaming CSV writer; rows are flushed as they arrive so partial
    output survives an aborted run."""

    def __init__(self, path, columns):
        self.columns = list(columns)
        self._fh = open(path, "w", newline="")
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()

    def write(self, row):
        self._fh.write(",".join(_fmt(row[c]) for c in self.columns) + "\n")
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def emit_series(path, rows, columns=None):
    """Write rows (dicts) as CSV with %.17g reals; an empty list writes the header."""
    if columns is None:
        if not rows:
            raise ValueError("columns are required when there are no rows")
        columns = list(rows[0])
    with SeriesWriter(path, columns) as w:
        for r in rows:
            w.write(r)
    return columns


def read_series(path):
    """CSV -> dict of column name -> float array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        data = [[float(x) for x in row] for row in reader if row]
    arr = np.array(data, dtype=float).reshape(len(data), len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


_PLOT_TEMPLATE = '''"""Decay plots for {csv_name} (generated; needs matplotlib)."""
import csv
import sys

import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else {csv_name!r}
with open(path, newline="") as fh:
    rows = list(csv.DictReader(fh))
t = [float(r[{t_col!r}]) for r in rows]
columns = {columns!r}

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(11, 4))
for name in columns:
    y = [float(r[name]) for r in rows]
    pairs = [(a, b) for a, b in zip(t, y) if b > 0]
    if not pairs:
        continue
    ax1.loglog([1 + a for a, _ in pairs], [b for _, b in pairs], label=name)
    ax2.semilogy([a for a, _ in pairs], [b for _, b in pairs], label=name)
ax1.set_xlabel("1 + t")
ax2.set_xlabel("t")
ax1.set_title("log-log")
ax2.set_title("semi-log")
ax1.legend(fontsize=7)
fig.tight_layout()
fig.savefig(path.rsplit(".", 1)[0] + "_decay.png", dpi=120)
'''


def emit_plot_script(path, csv_path, columns, t_column="t"):
    """Write a standalone matplotlib script that plots ``columns`` of the CSV."""
    cols = [c for c in columns if c != t_column]
    text = _PLOT_TEMPLATE.format(csv_name=os.path.basename(csv_path), t_col=t_column,
                                 columns=cols)
    with open(path, "w") as fh:
        fh.write(text)
    return cols


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
