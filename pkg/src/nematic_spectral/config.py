"""
TOML run configuration.

Every section and key is checked against a schema; unknown keys are
errors.  Defaults are filled in and :meth:`RunConfig.to_dict` echoes the
fully resolved configuration into the run manifest.

Example::

    scenario = "run"

    [grid]
    n = 32

    [phys]
    a = 1.0
    b = 1.0
    c = 1.0
    kappa = 1.0
    lambda = 1.0
    mu = 1.0
    gamma = 1.0

    [time]
    dt = 0.01
    t_end = 1.0
"""

import math
from dataclasses import asdict, dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .grid import DEALIAS_RULES, GridSpec
from .qtensor import PhysParams

SCENARIOS = ("run", "linear-decay", "kernel-probe", "lower-bound", "validate", "fit")
INIT_FAMILIES = ("gaussian", "random", "single_mode")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


# section -> {key: (type, default)}; default None means "derived" or optional
_SCHEMA = {
    "": {"scenario": (str, "run")},
    "grid": {"n": (int, 32), "box_length": (float, 2 * math.pi),
             "dealias": (str, "two_thirds")},
    "phys": {"a": (float, None), "b": (float, 1.0), "c": (float, 1.0),
             "c_star": (float, None), "kappa": (float, None), "alpha2": (float, None),
             "lambda": (float, 1.0), "mu": (float, 1.0), "gamma": (float, 1.0)},
    "time": {"dt": (float, 0.01), "t_end": (float, 1.0), "output_cadence": (int, 10)},
    "init": {"family": (str, "gaussian"), "e0": (float, 1e-2), "amplitude": (float, 0.1),
             "sigma": (float, 1.0), "seed": (int, 0), "kmax": (int, 4),
             "mode": (list, [1, 0, 0]), "u_fraction": (float, 0.5)},
    "stepper": {"reproject_every": (int, 1), "backend": (str, "numba"),
                "advection": (str, "advective")},
    "diagnostics": {"s": (int, 2), "fit_window": (list, None)},
    "outputs": {"series_path": (str, "series.csv"), "snapshot_dir": (str, "snapshots"),
                "report_path": (str, "report.json"), "snapshot_every": (int, 0)},
    "linear": {"sigma2": (float, 0.5), "amplitude": (float, 1.0), "t_min": (float, 1.0),
               "t_max": (float, 1000.0), "samples": (int, 40), "kmax_q": (int, 2),
               "kmax_u": (int, 1), "tol": (float, 1e-10), "q_weight": (float, 1.0),
               "u_weight": (float, 1.0)},
    "probe": {"k2_center": (float, None), "half_width": (float, 1e-3),
              "spacing": (float, 1e-6), "times": (list, [0.1, 1.0, 10.0])},
    "validate": {"n": (int, 32), "kmax": (int, 6), "cancel_states": (int, 20),
                 "lemma_seeds": (int, 50), "s": (int, 2), "commutator_ceiling": (float, 50.0),
                 "modq_ceiling": (float, 10.0), "run_steps": (int, 20)},
    "fit": {"column": (str, "q_d0"), "t_column": (str, "t"), "window": (list, None),
            "log_y": (bool, False)},
}

_OUT_OF_SCOPE = {
    ("phys", "xi"): "the tumbling parameter xi is out of scope (corotational model only)",
    ("phys", "D0"): "variable-concentration coefficients are out of scope",
    ("phys", "D1"): "variable-concentration coefficients are out of scope",
    ("phys", "alpha1"): "variable-concentration coefficients are out of scope",
}


@dataclass
class TimeConfig:
    dt: float
    t_end: float
    output_cadence: int


@dataclass
class RunConfig:
    grid: GridSpec
    phys: PhysParams
    time: TimeConfig
    scenario: str
    init: dict = field(default_factory=dict)
    stepper: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    linear: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    validate: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    #: keys the user wrote (for the manifest)
    given: dict = field(default_factory=dict)

    def to_dict(self):
        p = self.phys
        return {
            "scenario": self.scenario,
            "grid": {"n": self.grid.n, "box_length": self.grid.box_length,
                     "dealias": self.grid.dealias_rule},
            "phys": {"a": p.a, "b": p.b, "c": p.c, "c_star": p.c_star, "kappa": p.kappa,
                     "lambda": p.lam, "mu": p.mu, "gamma": p.gamma},
            "time": asdict(self.time),
            "init": dict(self.init), "stepper": dict(self.stepper),
            "diagnostics": dict(self.diagnostics), "outputs": dict(self.outputs),
            "linear": dict(self.linear), "probe": dict(self.probe),
            "validate": dict(self.validate), "fit": dict(self.fit),
        }


def _coerce(section, key, value, typ):
    name = f"{section}.{key}" if section else key
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{name}: must be finite")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer, got {value!r}")
        return value
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected true/false, got {value!r}")
        return value
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string, got {value!r}")
        return value
    if typ is list:
        if not isinstance(value, list):
            raise ConfigError(f"{name}: expected an array, got {value!r}")
        return value
    raise AssertionError(typ)


def _sections(doc):
    out = {"": {}}
    for key, val in doc.items():
        if isinstance(val, dict):
            if key not in _SCHEMA or key == "":
                raise ConfigError(f"unknown section [{key}]")
            out[key] = val
        else:
            out[""][key] = val
    return out


def _fill(section, given):
    schema = _SCHEMA[section]
    resolved = {}
    for key, val in given.items():
        if (section, key) in _OUT_OF_SCOPE:
            raise ConfigError(f"{section}.{key}: {_OUT_OF_SCOPE[(section, key)]}")
        if key not in schema:
            name = f"{section}.{key}" if section else key
            raise ConfigError(f"unknown key {name!r}")
        resolved[key] = _coerce(section, key, val, schema[key][0])
    for key, (_, default) in schema.items():
        resolved.setdefault(key, default)
    return resolved


def _phys(d):
    c = d["c"]
    a, c_star = d["a"], d["c_star"]
    if a is None and c_star is None:
        a = 1.0
    if a is None:
        a = 0.5 * (c - c_star)
    if c_star is None:
        c_star = c - 2.0 * a
    if not math.isclose(a, 0.5 * (c - c_star), rel_tol=1e-12, abs_tol=1e-14):
        raise ConfigError(f"phys.a: a = {a} is inconsistent with (c - c_star)/2 = "
                          f"{0.5 * (c - c_star)}")
    kappa, alpha2 = d["kappa"], d["alpha2"]
    if kappa is None:
        kappa = 1.0 if alpha2 is None else alpha2 * c * c
    elif alpha2 is not None and not math.isclose(kappa, alpha2 * c * c, rel_tol=1e-12):
        raise ConfigError(f"phys.kappa: kappa = {kappa} is inconsistent with alpha2 c^2 = "
                          f"{alpha2 * c * c}")
    try:
        return PhysParams(a=a, b=d["b"], c=c, kappa=kappa, lam=d["lambda"], mu=d["mu"],
                          gamma=d["gamma"], c_star=c_star)
    except ValueError as exc:
        raise ConfigError(f"phys: {exc}") from None


def parse_config(text):
    """Parse and validate TOML text into a :class:`RunConfig`."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"parse error: {exc}") from None
    secs = _sections(doc)
    res = {name: _fill(name, secs.get(name, {})) for name in _SCHEMA}
    scenario = res[""]["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {scenario!r}")
    g = res["grid"]
    if g["dealias"] not in DEALIAS_RULES:
        raise ConfigError(f"grid.dealias: must be one of {DEALIAS_RULES}")
    try:
        grid = GridSpec(g["n"], g["box_length"], g["dealias"])
    except ValueError as exc:
        raise ConfigError(f"grid.n: {exc}") from None
    phys = _phys(res["phys"])
    t = res["time"]
    if not t["dt"] > 0:
        raise ConfigError("time.dt: must be positive")
    if t["t_end"] < 0:
        raise ConfigError("time.t_end: must be nonnegative")
    if t["output_cadence"] < 1:
        raise ConfigError("time.output_cadence: must be >= 1")
    steps = t["t_end"] / t["dt"]
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError("time.t_end: must be a whole number of time steps")
    init = res["init"]
    if init["family"] not in INIT_FAMILIES:
        raise ConfigError(f"init.family: must be one of {INIT_FAMILIES}")
    if not 0.0 <= init["u_fraction"] <= 1.0:
        raise ConfigError("init.u_fraction: must lie in [0, 1]")
    if init["e0"] <= 0:
        raise ConfigError("init.e0: must be positive")
    if scenario == "run" and phys.a <= 0:
        raise ConfigError("phys.a: simulations require a > 0")
    if res["diagnostics"]["s"] < 0:
        raise ConfigError("diagnostics.s: must be nonnegative")
    lin = res["linear"]
    if lin["sigma2"] <= 0 or lin["t_min"] < 0 or lin["t_max"] <= lin["t_min"]:
        raise ConfigError("linear: need sigma2 > 0 and 0 <= t_min < t_max")
    if lin["samples"] < 4:
        raise ConfigError("linear.samples: need at least 4")
    return RunConfig(grid=grid, phys=phys,
                     time=TimeConfig(t["dt"], t["t_end"], t["output_cadence"]),
                     scenario=scenario, init=init, stepper=res["stepper"],
                     diagnostics=res["diagnostics"], outputs=res["outputs"],
                     linear=lin, probe=res["probe"], validate=res["validate"],
                     fit=res["fit"], given={k: dict(v) for k, v in secs.items()})


def load_config(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ConfigError(f"{path}: not UTF-8 text") from None
    return parse_config(text)
