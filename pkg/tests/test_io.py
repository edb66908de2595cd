import ast
import struct
import zlib

import numpy as np
import pytest

from nematic_spectral import io
from nematic_spectral import scenarios as sc
from nematic_spectral.config import parse_config
from nematic_spectral.dynamics import band_limited_random
from nematic_spectral.grid import GridSpec
from nematic_spectral.qtensor import PhysParams


@pytest.fixture
def snap(tmp_path):
    g = GridSpec(8, box_length=3.0, dealias_rule="half")
    st = band_limited_random(g, 2, seed=4)
    st.t = 1.25
    p = PhysParams(mu=2.0, kappa=0.5)
    path = tmp_path / "s.anlq"
    io.save_snapshot(st, p, path)
    return st, p, path


def test_snapshot_round_trip_is_bitwise(snap):
    st, p, path = snap
    back, q = io.load_snapshot(path)
    assert back.qhat.tobytes() == st.qhat.tobytes()
    assert back.uhat.tobytes() == st.uhat.tobytes()
    assert back.t == st.t and q == p
    assert back.grid.n == 8 and back.grid.box_length == 3.0
    assert back.grid.dealias_rule == "half"


def test_truncated_snapshot_reports_checksum(snap):
    _, _, path = snap
    blob = path.read_bytes()
    path.write_bytes(blob[:-100])
    with pytest.raises(io.SnapshotError, match="checksum"):
        io.load_snapshot(path)
    path.write_bytes(blob[:20])
    with pytest.raises(io.SnapshotError, match="checksum"):
        io.load_snapshot(path)


def test_corrupted_payload(snap):
    _, _, path = snap
    blob = bytearray(path.read_bytes())
    blob[200] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(io.SnapshotError, match="payload checksum"):
        io.load_snapshot(path)


def test_version_mismatch(snap):
    _, _, path = snap
    blob = bytearray(path.read_bytes())
    hs = io._HEADER.size
    blob[4:6] = struct.pack("<H", 99)
    blob[hs:hs + 4] = struct.pack("<I", zlib.crc32(bytes(blob[:hs])))
    path.write_bytes(bytes(blob))
    with pytest.raises(io.SnapshotError, match="version 99"):
        io.load_snapshot(path)


def test_bad_magic(snap):
    _, _, path = snap
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(io.SnapshotError, match="magic"):
        io.load_snapshot(path)


RESUME_CFG = """
scenario = "run"
[grid]
n = 16
[time]
dt = 0.01
t_end = {t_end}
output_cadence = 5
[init]
family = "random"
kmax = 3
e0 = 1.0
[outputs]
snapshot_every = 10
"""


def test_resumed_run_matches_uninterrupted(tmp_path):
    full = sc.simulate(parse_config(RESUME_CFG.format(t_end=0.2)), tmp_path / "full")
    snap_path = tmp_path / "full" / "snapshots" / "step_00000010.anlq"
    state, _ = io.load_snapshot(snap_path)
    assert state.t == 0.1
    rest = sc.simulate(parse_config(RESUME_CFG.format(t_end=0.1)), tmp_path / "rest", state=state)
    a, b = full["state"], rest["state"]
    assert a.t == b.t
    assert a.qhat.tobytes() == b.qhat.tobytes()
    assert a.uhat.tobytes() == b.uhat.tobytes()
    assert full["rows"][-1] == rest["rows"][-1] | {"step": full["rows"][-1]["step"]}


def test_empty_series_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    io.emit_series(path, [], ["t", "q_d0"])
    assert path.read_text() == "t,q_d0\n"
    with pytest.raises(ValueError):
        io.emit_series(path, [])
    data = io.read_series(path)
    assert data["t"].shape == (0,)


def test_series_round_trip_full_precision(tmp_path):
    path = tmp_path / "r.csv"
    row = {"t": 0.1 + 0.2, "step": 3, "x": 1 / 3, "y": 1e-300, "z": -2.5e17}
    io.emit_series(path, [row])
    text = path.read_text().splitlines()
    assert text[0] == "t,step,x,y,z"
    assert text[1].split(",")[1] == "3"
    back = io.read_series(path)
    for k, v in row.items():
        assert back[k][0] == v


def test_plot_script_references_only_csv_columns(tmp_path):
    cols = sc.series_columns(2)
    csv_path = tmp_path / "series.csv"
    io.emit_series(csv_path, [], cols)
    script = tmp_path / "plot.py"
    used = io.emit_plot_script(script, csv_path, cols)
    tree = ast.parse(script.read_text())
    names = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Assign) and getattr(node.targets[0], "id", "") == "columns":
            names.update(ast.literal_eval(node.value))
    assert names == set(used) and names <= set(cols)
    assert "t" not in names


def test_write_json_numpy_types(tmp_path):
    import json
    path = tmp_path / "r.json"
    io.write_json(path, {"a": np.float64(1.5), "b": np.int64(2), "c": np.arange(3),
                         "d": np.bool_(True)})
    assert json.loads(path.read_text()) == {"a": 1.5, "b": 2, "c": [0, 1, 2], "d": True}
    with pytest.raises(TypeError):
        io.write_json(path, {"x": object()})
