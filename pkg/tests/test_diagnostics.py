import math

import numpy as np
import pytest

from nematic_spectral import diagnostics as dg
from nematic_spectral import dynamics as dy
from nematic_spectral.grid import GridSpec, SpectralState
from nematic_spectral.qtensor import PhysParams

P = PhysParams()


# -- energy functionals -----------------------------------------------------------

def test_energy_example():
    g = GridSpec(16)
    st = SpectralState.zeros(g)
    x, _, _ = g.coordinates()
    st.qhat[0] = g.forward(0.1 * np.cos(x))
    rep = dg.energy_functionals(st, 2, P)
    M = 4.0
    ref = (3 * M + 3) * 0.01 * (2 * np.pi) ** 3 / 2
    assert math.isclose(rep.E, ref, rel_tol=1e-12)
    assert math.isclose(rep.E, 18.604, rel_tol=1e-4)


def test_energy_zero_state_and_rejects_nonpositive_a():
    g = GridSpec(8)
    rep = dg.energy_functionals(SpectralState.zeros(g), 2, P)
    assert rep.E == rep.D == rep.N == rep.Mw == rep.Hq == 0.0
    with pytest.raises(ValueError):
        dg.energy_functionals(SpectralState.zeros(g), 2, PhysParams(a=-0.5))
    with pytest.raises(ValueError):
        dg.energy_functionals(SpectralState.zeros(g), -1, P)


def test_energy_entries_finite_and_nonnegative():
    g = GridSpec(16)
    st = dy.band_limited_random(g, 4, seed=0)
    st.t = 3.0
    rep = dg.energy_functionals(st, 2, P)
    for v in (rep.E, rep.D, rep.N, rep.Mw, rep.Hq):
        assert np.isfinite(v) and v >= 0
    assert len(rep.norms_q) == 4 and len(rep.norms_u) == 3
    assert math.isclose(rep.E, dg.linear_energy(st, 2, P), rel_tol=1e-14)
    assert rep.trace_res < 1e-14 and rep.div_res < 1e-12


def test_energy_dissipation_identity_for_linear_flow():
    # with kappa = 0 the linear flow satisfies dE/dt = -2 D exactly
    from nematic_spectral.kernels import propagate_linear
    p = PhysParams(kappa=0.0, mu=1.3, gamma=0.7)
    g = GridSpec(16)
    st = dy.band_limited_random(g, 3, seed=1)
    h = 1e-5
    e0 = dg.linear_energy(st, 2, p)
    e_plus = dg.linear_energy(propagate_linear(st, h, p), 2, p)
    e_2 = dg.linear_energy(propagate_linear(st, 2 * h, p), 2, p)
    # second-order one-sided difference
    dE = (-3 * e0 + 4 * e_plus - e_2) / (2 * h)
    D = dg.energy_functionals(st, 2, p).D
    assert abs(dE + 2 * D) < 1e-6 * D


def test_grid_max_norms():
    g = GridSpec(16)
    st = dy.single_mode(g, (1, 0, 0), q_coeffs=[2.0, 0, 0, 0, 0])
    mx = dg.grid_max_norms(st, 1)
    assert math.isclose(mx["max_d0Q"], 2.0, rel_tol=1e-13)
    assert math.isclose(mx["max_d1Q"], 2.0, rel_tol=1e-13)
    assert mx["max_d0u"] == 0.0


def test_mean_velocity_and_divergence():
    g = GridSpec(8)
    st = SpectralState.zeros(g)
    st.uhat[:, 0, 0, 0] = [3.0, 4.0, 0.0]
    assert dg.mean_velocity(st) == 5.0
    assert dg.divergence_residual(st) == 0.0
    bad = dy.band_limited_random(g, 2, seed=2, solenoidal=False)
    assert dg.divergence_residual(bad) > 1e-3


# -- decay fits ---------------------------------------------------------------------

def test_fit_exact_examples():
    t = np.arange(0.0, 51.0)
    y = 2.0 * (1 + t) ** -0.75 * np.exp(-0.5 * t)
    fit = dg.fit_decay(t, y, window=(0, 50))
    assert abs(fit.logC - math.log(2)) < 1e-10
    assert abs(fit.alpha - 0.75) < 1e-10 and abs(fit.beta - 0.5) < 1e-10
    assert fit.window == (0.0, 50.0) and fit.rss < 1e-20
    np.testing.assert_allclose(fit.model(t), y, rtol=1e-9)
    fit2 = dg.fit_decay(t, (1 + t) ** -1.25, window=(0, 50))
    assert abs(fit2.alpha - 1.25) < 1e-10 and abs(fit2.beta) < 1e-10


def test_fit_noise_monte_carlo():
    t = np.linspace(0, 50, 200)
    truth = (1 + t) ** -0.75 * np.exp(-0.5 * t)
    for seed in range(20):
        rng = np.random.default_rng(seed)
        y = truth * (1 + 0.01 * rng.standard_normal(t.size))
        fit = dg.fit_decay(t, y, window=(0, 50))
        assert abs(fit.alpha - 0.75) < 0.05 and abs(fit.beta - 0.5) < 0.01


def test_fit_scale_invariance():
    t = np.linspace(1, 30, 40)
    y = (1 + t) ** -0.9 * np.exp(-0.2 * t) * (1 + 0.01 * np.sin(t))
    a = dg.fit_decay(t, y)
    b = dg.fit_decay(t, 7.5 * y)
    assert abs(a.alpha - b.alpha) < 1e-12 and abs(a.beta - b.beta) < 1e-12
    assert abs(b.logC - a.logC - math.log(7.5)) < 1e-12


def test_fit_default_window_is_last_decade():
    t = np.linspace(0, 100, 101)
    fit = dg.fit_decay(t, np.exp(-t / 50))
    assert fit.window == (10.0, 100.0)


def test_fit_log_input():
    t = np.linspace(0, 2000, 50)
    ly = -0.75 * np.log1p(t) - t          # exp underflows
    fit = dg.fit_decay(t, ly, window=(0, 2000), log_y=True)
    assert abs(fit.alpha - 0.75) < 1e-9 and abs(fit.beta - 1.0) < 1e-12


def test_fit_errors():
    t = np.linspace(0, 10, 20)
    with pytest.raises(ValueError):
        dg.fit_decay(t[:3], np.ones(3), window=(0, 10))
    with pytest.raises(ValueError):
        dg.fit_decay(t, -np.ones(20), window=(0, 10))
    with pytest.raises(ValueError):
        dg.fit_decay(t, np.ones(19))
    with pytest.raises(np.linalg.LinAlgError):
        dg.fit_decay(np.full(10, 3.0), np.ones(10), window=(0, 10))


# -- lower bound ----------------------------------------------------------------------

def test_lower_bound_heat_flow():
    from nematic_spectral import kernels as kn
    prof = kn.GaussianProfile(sigma=math.sqrt(0.5))
    ts = np.logspace(0, 3, 30)
    for k in (0, 1):
        y = np.array([kn.radial_norm_quadrature("C", k, t, prof, P) for t in ts])
        lo, hi = dg.lower_bound_check(ts, y, k)
        assert 0 < lo <= hi and hi / lo < 10
        comp = (1 + ts) ** (0.75 + 0.5 * k) * y
        assert np.all(np.diff(comp) >= -1e-12 * comp[1:])
    with pytest.raises(ValueError):
        dg.lower_bound_check(ts, np.zeros_like(ts), 0)


# -- commutators and |Q| -----------------------------------------------------------------

def fields(seed, n=32, kmax=6):
    g = GridSpec(n, dealias_rule="none")
    st = dy.band_limited_random(g, kmax, seed=seed)
    return g, st.qhat[0], st.qhat[1], st.qhat[2], st.qhat


def test_commutator_trivial_cases():
    g, psi, phi, Phi, _ = fields(0)
    assert dg.commutator_ratio(g, np.zeros_like(psi), phi, Phi, 2, 2)[:2] == (0.0, 0.0)
    assert dg.commutator_ratio(g, psi, phi, Phi, 0, 2) == pytest.approx((0, 0, 0), abs=1e-14)
    with pytest.raises(ValueError):
        dg.commutator_ratio(g, psi, phi, Phi, 3, 2)


def test_commutator_matches_leibniz_for_single_modes():
    # psi = cos(x), phi = sin(2x): d(psi d phi) - psi d^2 phi = psi' phi'
    g = GridSpec(16, dealias_rule="none")
    x, _, _ = g.coordinates()
    psi, phi = g.forward(np.cos(x)), g.forward(np.sin(2 * x))
    num = dg._commutator_norm(g, psi, g.gradient(phi), 1)
    ref = g.realspace_l2(-np.sin(x) * 2 * np.cos(2 * x))
    assert math.isclose(num, ref, rel_tol=1e-12)


def test_modq_ratio_homogeneous_and_finite():
    g, _, _, _, q = fields(1)
    r1 = dg.modQ_sobolev_ratio(g, q, 2)
    r2 = dg.modQ_sobolev_ratio(g, 2.0 * q, 2)
    assert np.isfinite(r1) and math.isclose(r1, r2, rel_tol=1e-12)
    with pytest.raises(ZeroDivisionError):
        dg.modQ_sobolev_ratio(g, np.zeros_like(q), 2)


def test_modq_ratio_smooth_uniaxial():
    # Q = s(x) (n n - I/3) with s > 0 everywhere: |Q| = sqrt(2/3) s is smooth
    g = GridSpec(16)
    x, y, _ = g.coordinates()
    s = 1.5 + np.cos(x) * np.sin(y)
    from nematic_spectral.qtensor import uniaxial
    q = s[None] * uniaxial(1.0, [0, 0, 1])[:, None, None, None]
    qh = g.forward(q)
    r = dg.modQ_sobolev_ratio(g, qh, 2)
    ref = g.sobolev_norm(g.forward(math.sqrt(2 / 3) * s), 2) / g.sobolev_norm(qh, 2)
    assert math.isclose(r, ref, rel_tol=1e-10)


# -- cancellations ------------------------------------------------------------------------

def test_cancellations_zero_state():
    assert dg.cancellation_residuals(SpectralState.zeros(GridSpec(8))) == [0.0] * 5


def test_cancellations_random_states():
    g = GridSpec(32, dealias_rule="none")
    for seed in range(5):
        st = dy.band_limited_random(g, 6, seed=seed)
        assert max(dg.cancellation_residuals(st)) < 1e-10


def test_cancellations_with_separate_g():
    g = GridSpec(32, dealias_rule="none")
    st = dy.band_limited_random(g, 5, seed=9)
    other = dy.band_limited_random(g, 5, seed=10).qhat
    r = dg.cancellation_residuals(st, other)
    assert r[3] < 1e-10 and r[4] < 1e-10


def test_cancellation_negative_control():
    g = GridSpec(32, dealias_rule="none")
    st = dy.band_limited_random(g, 6, seed=0, solenoidal=False)
    assert dg.cancellation_residuals(st)[0] > 1e-4
