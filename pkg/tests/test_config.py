import math

import pytest

from nematic_spectral.config import ConfigError, load_config, parse_config


def test_minimal_config_uses_defaults():
    cfg = parse_config('scenario = "run"\n')
    assert cfg.grid.n == 32 and cfg.grid.dealias_rule == "two_thirds"
    assert math.isclose(cfg.grid.box_length, 2 * math.pi)
    p = cfg.phys
    assert (p.a, p.b, p.c, p.kappa, p.lam, p.mu, p.gamma) == (1, 1, 1, 1, 1, 1, 1)
    assert p.c_star == -1.0
    assert cfg.time.dt == 0.01 and cfg.time.t_end == 1.0
    assert cfg.init["family"] == "gaussian" and cfg.diagnostics["s"] == 2
    d = cfg.to_dict()
    assert d["phys"]["lambda"] == 1.0 and d["time"]["output_cadence"] == 10


def test_derived_parameters():
    cfg = parse_config("[phys]\nc = 3.0\nc_star = 1.0\nalpha2 = 0.5\n")
    assert cfg.phys.a == 1.0 and cfg.phys.kappa == 4.5


def test_inconsistent_a_is_rejected():
    with pytest.raises(ConfigError, match="phys.a"):
        parse_config("[phys]\na = 1.0\nc = 3.0\nc_star = 2.0\n")


def test_inconsistent_kappa_is_rejected():
    with pytest.raises(ConfigError, match="phys.kappa"):
        parse_config("[phys]\nkappa = 1.0\nalpha2 = 2.0\n")


def test_tumbling_parameter_is_out_of_scope():
    with pytest.raises(ConfigError, match="tumbling"):
        parse_config("[phys]\nxi = 0.5\n")
    with pytest.raises(ConfigError, match="phys.D0"):
        parse_config("[phys]\nD0 = 0.5\n")


@pytest.mark.parametrize("text,key", [
    ("bogus = 1\n", "bogus"),
    ("[grid]\nsize = 16\n", "grid.size"),
    ("[nonsense]\nx = 1\n", "nonsense"),
])
def test_unknown_keys_and_sections(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(text)


@pytest.mark.parametrize("text,key", [
    ("[time]\ndt = 0.03\nt_end = 1.0\n", "time.t_end"),
    ("[time]\ndt = 0.0\n", "time.dt"),
    ("[time]\noutput_cadence = 0\n", "output_cadence"),
    ("[grid]\nn = 7\n", "grid.n"),
    ("[grid]\ndealias = \"x\"\n", "grid.dealias"),
    ("[grid]\nn = \"32\"\n", "grid.n"),
    ("[phys]\nmu = true\n", "phys.mu"),
    ("[phys]\nmu = -1.0\n", "phys"),
    ("[phys]\nmu = nan\n", "phys.mu"),
    ("[init]\nfamily = \"vortex\"\n", "init.family"),
    ("[init]\nu_fraction = 1.5\n", "u_fraction"),
    ("[linear]\nsamples = 2\n", "linear.samples"),
    ("scenario = \"explode\"\n", "scenario"),
    ("[time\n", "parse error"),
])
def test_invalid_values_name_the_key(text, key):
    with pytest.raises(ConfigError, match=key):
        parse_config(text)


def test_a_must_be_positive_for_runs_only():
    text = "[phys]\na = -0.5\nc = 1.0\n"
    with pytest.raises(ConfigError, match="a > 0"):
        parse_config('scenario = "run"\n' + text)
    cfg = parse_config('scenario = "kernel-probe"\n' + text)
    assert cfg.phys.a == -0.5


def test_load_config_from_file(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text('scenario = "validate"\n[grid]\nn = 16\n')
    cfg = load_config(f)
    assert cfg.scenario == "validate" and cfg.grid.n == 16
    assert cfg.given["grid"] == {"n": 16}
    bad = tmp_path / "b.toml"
    bad.write_bytes(b"\xff\xfe")
    with pytest.raises(ConfigError, match="UTF-8"):
        load_config(bad)


def test_shipped_configs_parse():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.toml"))
    assert files
    for f in files:
        load_config(f)
