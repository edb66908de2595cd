"""
Scenario drivers behind the command line: nonlinear torus runs, whole-space
linear decay studies, kernel probes, lower-bound studies, validation suites
and decay fits of existing series.

Each driver returns a plain dict (the JSON report) and writes its artifacts
under ``out_dir`` when one is given.
"""

import logging
import math
import os
import platform
import time

import numpy as np
import scipy

from . import __version__
from . import diagnostics as dg
from . import dynamics as dy
from . import kernels as kn
from .grid import GridSpec, fft_backend, workers
from .io import SeriesWriter, emit_plot_script, emit_series, read_series, save_snapshot, write_json
from .qtensor import PhysParams

log = logging.getLogger(__name__)


def manifest(cfg, seed, extra=None):
    out = {
        "config": cfg.to_dict() if cfg is not None else None,
        "seed": seed,
        "version": __version__,
        "fft_backend": fft_backend(),
        "workers": workers(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }
    if extra:
        out.update(extra)
    return out


# -- nonlinear run --------------------------------------------------------------

def initial_state(cfg):
    init = cfg.init
    g = cfg.grid
    fam = init["family"]
    if fam == "gaussian":
        return dy.gaussian_bumps(g, sigma=init["sigma"], seed=init["seed"], e0=init["e0"],
                                 u_fraction=init["u_fraction"])
    if fam == "random":
        st = dy.band_limited_random(g, init["kmax"], seed=init["seed"])
        return dy._mix(st.replace(uhat=np.zeros_like(st.uhat)),
                       st.replace(qhat=np.zeros_like(st.qhat)), init["e0"], init["u_fraction"])
    if fam == "single_mode":
        rng = np.random.default_rng(init["seed"])
        st = dy.single_mode(g, init["mode"], q_coeffs=rng.standard_normal(5),
                            u_vec=rng.standard_normal(3))
        return dy.scale_to_energy(st, init["e0"])
    raise ValueError(f"unknown initial family {fam!r}")


def series_columns(s):
    cols = ["t", "step"]
    cols += [f"q_d{k}" for k in range(s + 2)]
    cols += [f"u_d{k}" for k in range(s + 1)]
    cols += ["qmax_d0", "qmax_d1", "umax_d0", "umax_d1"]
    cols += ["E", "D", "N", "Mw", "Hq", "trace_res", "div_res", "mean_u"]
    return cols


def monitor_row(state, step, s, p):
    rep = dg.energy_functionals(state, s, p)
    row = {"t": state.t, "step": step}
    row.update({f"q_d{k}": v for k, v in enumerate(rep.norms_q)})
    row.update({f"u_d{k}": v for k, v in enumerate(rep.norms_u)})
    mx = dg.grid_max_norms(state, 1)
    row.update({"qmax_d0": mx["max_d0Q"], "qmax_d1": mx["max_d1Q"],
                "umax_d0": mx["max_d0u"], "umax_d1": mx["max_d1u"]})
    row.update({"E": rep.E, "D": rep.D, "N": rep.N, "Mw": rep.Mw, "Hq": rep.Hq,
                "trace_res": rep.trace_res, "div_res": rep.div_res, "mean_u": rep.mean_u})
    return row


class StepMonitor:
    """Per-step energy and invariant tracking."""

    def __init__(self, s, p, check_trace=True):
        self.s, self.p = s, p
        self.check_trace = check_trace
        self.energy = []
        self.trace_res = []
        self.div_res = []

    def start(self, state):
        self.energy.append(dg.linear_energy(state, self.s, self.p))

    def __call__(self, state, step):
        self.energy.append(dg.linear_energy(state, self.s, self.p))
        if self.check_trace:
            self.trace_res.append(dg.trace_residual(state))
        self.div_res.append(dg.divergence_residual(state))

    def max_energy_increase(self):
        e = np.asarray(self.energy)
        if len(e) < 2:
            return 0.0
        return float(np.max((e[1:] - e[:-1]) / e[:-1]))


def simulate(cfg, out_dir=None, state=None, check_trace=True):
    """Run the nonlinear torus simulation described by ``cfg``.

    Returns a dict with the rows, the step monitor, the final state and a
    report.  A blow-up sets ``report["blowup"]`` and keeps partial output.
    """
    p = cfg.phys
    s = cfg.diagnostics["s"]
    st = cfg.stepper
    scfg = dy.StepperConfig(cfg.time.dt, reproject_every=st["reproject_every"],
                            backend=st["backend"], advection=st["advection"])
    if state is None:
        state = initial_state(cfg)
    e0 = dy.initial_energy(state)
    log.info("initial energy E0 = %.6e", e0)
    cols = series_columns(s)
    writer = None
    snap = None
    outs = cfg.outputs
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        writer = SeriesWriter(os.path.join(out_dir, outs["series_path"]), cols)
        if outs["snapshot_every"]:
            sdir = os.path.join(out_dir, outs["snapshot_dir"])
            os.makedirs(sdir, exist_ok=True)

            def snap(state_, i):
                save_snapshot(state_, p, os.path.join(sdir, f"step_{i:08d}.anlq"))

    rows = []

    def on_row(state_, i):
        row = monitor_row(state_, i, s, p)
        rows.append(row)
        if writer is not None:
            writer.write(row)

    mon = StepMonitor(s, p, check_trace)
    mon.start(state)
    t0 = time.perf_counter()
    report = {"E0": e0, "blowup": None}
    try:
        res = dy.run(state, scfg, p, cfg.time.t_end, callbacks=[on_row],
                     cadence=cfg.time.output_cadence, snapshot=snap,
                     snapshot_every=outs["snapshot_every"], step_callbacks=[mon])
        final, steps = res.state, res.steps
    except dy.BlowUpError as exc:
        report["blowup"] = {"step": exc.step, "t": exc.t}
        final, steps = exc.partial.state, exc.partial.steps
    finally:
        if writer is not None:
            writer.close()
    report.update({
        "steps": steps,
        "t_final": final.t,
        "wall_seconds": time.perf_counter() - t0,
        "max_energy_increase": mon.max_energy_increase(),
        "max_trace_res": max(mon.trace_res, default=0.0),
        "max_div_res": max(mon.div_res, default=0.0),
    })
    if len(rows) >= 4:
        t = np.array([r["t"] for r in rows])
        y = np.array([r["q_d0"] for r in rows])
        win = cfg.diagnostics["fit_window"]
        try:
            fit = dg.fit_decay(t, y, tuple(win) if win else None)
            report["fit_q_d0"] = vars(fit)
            report["guaranteed_rate"] = 0.5 * p.a * p.gamma
        except (ValueError, np.linalg.LinAlgError) as exc:
            report["fit_q_d0"] = {"error": str(exc)}
    if out_dir is not None:
        emit_plot_script(os.path.join(out_dir, "plot_series.py"), outs["series_path"], cols)
        write_json(os.path.join(out_dir, outs["report_path"]), report)
    return {"rows": rows, "monitor": mon, "state": final, "report": report}


# -- whole-space linear studies ---------------------------------------------------

def _time_grid(lin):
    return np.logspace(math.log10(lin["t_min"]), math.log10(lin["t_max"]), lin["samples"]) \
        if lin["t_min"] > 0 else np.linspace(lin["t_min"], lin["t_max"], lin["samples"])


def _profile(lin):
    return kn.GaussianProfile(sigma=math.sqrt(lin["sigma2"]), amplitude=lin["amplitude"])


def linear_decay_study(p, lin):
    """Radial-quadrature norms of the linear solution and their decay fits.

    Q data: Q_hat_0 = f(|xi|) Q* with |Q*|^2 = q_weight.  u data adds
    u_hat_0 = f(|xi|) P(xi) e with |e|^2 = u_weight.
    """
    ts = _time_grid(lin)
    prof = _profile(lin)
    tol = lin["tol"]
    rows = [{"t": t} for t in ts]
    out = {"q": {}, "u": {}, "closed_form_max_rel": 0.0, "profile_sigma2": lin["sigma2"]}
    win = (float(ts[0]), float(ts[-1]))
    for k in range(lin["kmax_q"] + 1):
        ln = np.array([kn.linear_q_log_norm(k, t, prof, p, lin["q_weight"], tol) for t in ts])
        ref = np.array([kn.gaussian_log_norm("A", k, t, prof, p) + 0.5 * math.log(lin["q_weight"])
                        for t in ts])
        rel = float(np.max(np.abs(np.expm1(ln - ref))))
        out["closed_form_max_rel"] = max(out["closed_form_max_rel"], rel)
        fit = dg.fit_decay(ts, ln, win, log_y=True)
        out["q"][f"d{k}"] = {"fit": vars(fit), "target_alpha": 0.75 + 0.5 * k,
                       "target_beta": p.a * p.gamma, "closed_form_max_rel": rel}
        for r, v in zip(rows, ln):
            r[f"logq_d{k}"] = v
    # sphere averages of |P(Q* n)|^2 and |P(n) e|^2
    qw = lin["q_weight"] / 5.0
    uw = 2.0 * lin["u_weight"] / 3.0
    for k in range(lin["kmax_u"] + 1):
        ln = np.array([kn.linear_u_log_norm(k, t, p, prof, prof, qw, uw, tol) for t in ts])
        fit = dg.fit_decay(ts, ln, win, log_y=True)
        out["u"][f"d{k}"] = {"fit": vars(fit), "target_alpha": 0.75 + 0.5 * k, "target_beta": 0.0}
        for r, v in zip(rows, ln):
            r[f"logu_d{k}"] = v
    out["rows"] = rows
    return out


def lower_bound_study(p, lin, ks=(0, 1)):
    """Compensated (1+t)^(3/4+k/2) ||d^k u_L|| over the configured window."""
    ts = _time_grid(lin)
    prof = _profile(lin)
    qw = lin["q_weight"] / 5.0
    uw = 2.0 * lin["u_weight"] / 3.0
    if uw <= 0:
        raise ValueError("the lower bound needs u_hat_0(0) != 0 (u_weight > 0)")
    out = {"rows": [{"t": t} for t in ts]}
    for k in ks:
        y = np.exp([kn.linear_u_log_norm(k, t, p, prof, prof, qw, uw, lin["tol"]) for t in ts])
        lo, hi = dg.lower_bound_check(ts, y, k)
        out[f"d{k}"] = {"inf": lo, "sup": hi, "ratio": hi / lo}
        for r, v in zip(out["rows"], y):
            r[f"u_d{k}"] = v
            r[f"comp_d{k}"] = (1.0 + r["t"]) ** (0.75 + 0.5 * k) * v
    return out


def discrete_jump(values):
    """Largest departure of a uniform scan from its local linear trend.

    The second difference |v[i+1] - 2 v[i] + v[i-1]| is O(h^2) for a smooth
    function, while a jump of size J anywhere in the scan shows up as J.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return 0.0
    return float(np.max(np.abs(np.diff(v, 2))))


def kernel_bound_study(p, count=10, seed=0, ks=(0, 1), t_min=1.0, t_max=1e3, samples=40,
                       sigma2_range=(0.5, 0.8), amp_range=(0.5, 2.0)):
    """Log-slopes of the compensated convolution ratios against log(1+t).

    Profiles are Gaussians with sigma^2 drawn uniformly from
    ``sigma2_range`` (in units of 1/Gamma) and random amplitudes.  A bounded
    ratio has slope near zero.
    """
    rng = np.random.default_rng(seed)
    ts = np.logspace(math.log10(t_min), math.log10(t_max), samples)
    x = np.log1p(ts)
    out = []
    for _ in range(count):
        s2 = rng.uniform(*sigma2_range) / p.gamma
        prof = kn.GaussianProfile(sigma=math.sqrt(s2), amplitude=rng.uniform(*amp_range))
        rec = {"sigma2": s2, "amplitude": prof.amplitude, "slopes": {}}
        for name in kn.KERNELS:
            for k in ks:
                r = np.log([kn.kernel_bound_ratio(name, k, t, prof, p) for t in ts])
                rec["slopes"][f"{name}{k}"] = float(np.polyfit(x, r, 1)[0])
        out.append(rec)
    worst = max(abs(v) for rec in out for v in rec["slopes"].values())
    return {"profiles": out, "max_abs_slope": worst}


def kernel_probe(p, probe):
    """Scan B across the resonance; compare with the two-branch form."""
    res = kn.resonance_k2(p)
    center = probe["k2_center"]
    if center is None:
        if res is None:
            raise ValueError("no resonance for mu <= Gamma; set probe.k2_center")
        center = res
    hw, dk = probe["half_width"], probe["spacing"]
    npts = int(round(2 * hw / dk)) + 1
    k2 = center - hw + dk * np.arange(npts)
    rows = []
    stats = {}
    for t in probe["times"]:
        A = kn.kernel_A(t, k2, p)
        B = kn.kernel_B(t, k2, p)
        C = kn.kernel_C(t, k2, p)
        d = kn.resonance_gap(k2, p)
        ref = kn.kernel_B_two_branch(t, k2, p)
        far = np.abs(d * t) > 1e-3
        dev = float(np.max(np.abs(B[far] - ref[far]) / np.abs(ref[far]))) if far.any() else 0.0
        stats[str(t)] = {"max_rel_dev_two_branch": dev, "max_jump": discrete_jump(B),
                         "max_increment": float(np.max(np.abs(np.diff(B))))}
        rows.extend({"k2": a, "t": t, "A": x, "B": y, "C": z, "d": w}
                    for a, x, y, z, w in zip(k2, A, B, C, d))
    return {"rows": rows, "stats": stats, "k2_center": center}


# -- validation suites -------------------------------------------------------------

def suite_cancellations(n=32, kmax=6, count=20, seed=0):
    g = GridSpec(n, dealias_rule="none")
    worst = [0.0] * 5
    for i in range(count):
        st = dy.band_limited_random(g, kmax, seed=seed + i, amplitude=1.0)
        r = dg.cancellation_residuals(st)
        worst = [max(a, b) for a, b in zip(worst, r)]
    bad = dy.band_limited_random(g, kmax, seed=seed, solenoidal=False)
    neg = dg.cancellation_residuals(bad)[0]
    return {"max_residuals": worst, "negative_control_residual_1": neg,
            "pass": max(worst) < 1e-10 and neg > 1e-6}


def _scalar_fields(g, kmax, seed):
    st = dy.band_limited_random(g, kmax, seed=seed)
    return st.qhat[0], st.qhat[1], st.qhat[2], st.qhat


def suite_lemmas(n=32, kmax=6, seeds=50, s=2, comm_ceiling=50.0, modq_ceiling=10.0):
    g = GridSpec(n, dealias_rule="none")
    comm = np.zeros((seeds, s, 3))
    modq = np.zeros(seeds)
    for i in range(seeds):
        psi, phi, Phi, q = _scalar_fields(g, kmax, 1000 + i)
        for k in range(1, s + 1):
            comm[i, k - 1] = dg.commutator_ratio(g, psi, phi, Phi, k, s)
        modq[i] = dg.modQ_sobolev_ratio(g, q, s)
    finite = bool(np.all(np.isfinite(comm)) and np.all(np.isfinite(modq)))
    return {
        "commutator_max": {f"k={k}": comm[:, k - 1].max(axis=0).tolist() for k in range(1, s + 1)},
        "commutator_max_overall": float(comm.max()),
        "modq_max": float(modq.max()),
        "modq_mean": float(modq.mean()),
        "commutator_ceiling": comm_ceiling,
        "modq_ceiling": modq_ceiling,
        "pass": finite and comm.max() < comm_ceiling and modq.max() < modq_ceiling,
    }


def suite_invariants(n=32, steps=20, dt=5e-3, p=None, seed=0):
    p = p or PhysParams()
    g = GridSpec(n)
    st = dy.gaussian_bumps(g, seed=seed)
    mon = StepMonitor(2, p)
    mon.start(st)
    dy.run(st, dy.StepperConfig(dt), p, steps * dt, step_callbacks=[mon])
    tr, dv = max(mon.trace_res), max(mon.div_res)
    inc = mon.max_energy_increase()
    return {"max_trace_res": tr, "max_div_res": dv, "max_energy_increase": inc,
            "pass": tr < 1e-12 and dv < 1e-12 and inc <= 1e-10}


def stepper_linear_deviation(n=16, steps=100, dt=0.01, p=None, seed=0):
    """Max relative deviation of 100 linear IF-RK4 steps from one exact propagation."""
    p = p or PhysParams(mu=2.0)
    g = GridSpec(n)
    st = dy.band_limited_random(g, 4, seed=seed)
    cfg = dy.StepperConfig(dt, nonlinear=False)
    a = st
    for _ in range(steps):
        a = dy.step(a, cfg, p)
    b = kn.propagate_linear(st, steps * dt, p)
    num = max(np.max(np.abs(a.qhat - b.qhat)), np.max(np.abs(a.uhat - b.uhat)))
    den = max(np.max(np.abs(b.qhat)), np.max(np.abs(b.uhat)))
    return float(num / den)


def stepper_order(n=16, kmax=3, amplitude=1.0, dt=0.05, horizon=0.4, p=None, seed=5):
    """Observed order from the Richardson triple dt, dt/2, dt/4."""
    p = p or PhysParams()
    g = GridSpec(n)
    st = dy.band_limited_random(g, kmax, seed=seed, amplitude=amplitude)
    sols = [dy.run(st, dy.StepperConfig(dt / 2 ** j), p, horizon).state for j in range(3)]

    def dist(x, y):
        return math.sqrt(float(np.sum(np.abs(x.qhat - y.qhat) ** 2)
                               + np.sum(np.abs(x.uhat - y.uhat) ** 2)))

    e1, e2 = dist(sols[0], sols[1]), dist(sols[1], sols[2])
    return math.log2(e1 / e2), e1, e2


def suite_stepper():
    dev = stepper_linear_deviation()
    order, e1, e2 = stepper_order()
    return {"linear_deviation": dev, "order": order, "richardson_diffs": [e1, e2],
            "pass": dev < 1e-12 and 3.5 <= order <= 4.3}


def suite_kernels():
    p = PhysParams(a=1.0, gamma=1.0, kappa=1.0, mu=2.0)
    probe = kernel_probe(p, {"k2_center": None, "half_width": 1e-3, "spacing": 1e-6,
                             "times": [0.1, 1.0, 10.0]})
    dev = max(v["max_rel_dev_two_branch"] for v in probe["stats"].values())
    jump = max(v["max_jump"] for v in probe["stats"].values())
    p1 = PhysParams()
    prof = kn.GaussianProfile(sigma=1.0)
    qrel = 0.0
    for name in ("A", "C"):
        for k in (0, 1, 2):
            for t in (0.0, 1.0, 10.0, 100.0):
                num = kn.radial_log_norm(name, k, t, prof, p1)
                ref = kn.gaussian_log_norm(name, k, t, prof, p1)
                qrel = max(qrel, abs(math.expm1(num - ref)))
    return {"B_max_rel_dev_two_branch": dev, "B_max_jump": jump,
            "quadrature_closed_form_max_rel": qrel,
            "pass": dev < 1e-10 and jump < 1e-9 and qrel < 1e-8}


def validate(cfg):
    v = cfg.validate
    t0 = time.perf_counter()
    suites = {
        "cancellations": suite_cancellations(v["n"], v["kmax"], v["cancel_states"]),
        "lemmas": suite_lemmas(v["n"], v["kmax"], v["lemma_seeds"], v["s"],
                               v["commutator_ceiling"], v["modq_ceiling"]),
        "invariants": suite_invariants(v["n"], v["run_steps"], p=cfg.phys
                                       if cfg.phys.a > 0 else None),
        "stepper": suite_stepper(),
        "kernels": suite_kernels(),
    }
    for name, res in suites.items():
        log.info("suite %-14s %s", name, "pass" if res["pass"] else "FAIL")
    return {"suites": suites, "pass": all(r["pass"] for r in suites.values()),
            "wall_seconds": time.perf_counter() - t0}


# -- fit of an existing series -------------------------------------------------------

def fit_series(csv_path, fit_cfg):
    data = read_series(csv_path)
    tcol, col = fit_cfg["t_column"], fit_cfg["column"]
    for c in (tcol, col):
        if c not in data:
            raise KeyError(f"column {c!r} not in {csv_path} (have {sorted(data)})")
    win = fit_cfg.get("window")
    fit = dg.fit_decay(data[tcol], data[col], tuple(win) if win else None,
                       log_y=fit_cfg.get("log_y", False))
    return {"column": col, "fit": vars(fit), "samples": int(len(data[tcol]))}


def write_rows(out_dir, name, rows):
    if out_dir is None:
        return None
    path = os.path.join(out_dir, name)
    emit_series(path, rows, list(rows[0]) if rows else ["t"])
    return path
