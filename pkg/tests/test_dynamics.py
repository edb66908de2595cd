import math

import numpy as np
import pytest

from nematic_spectral import dynamics as dy
from nematic_spectral import kernels as kn
from nematic_spectral import qtensor as qt
from nematic_spectral.grid import GridSpec, SpectralState
from nematic_spectral.qtensor import PhysParams

P = PhysParams()
P6 = PhysParams(a=1.0, b=6.0, c=1.0)
Z = np.array([0.0, 0.0, 1.0])


def constant_q_state(g, q):
    st = SpectralState.zeros(g)
    st.qhat[:, 0, 0, 0] = q
    return st


def point(q=None, u=None, grad_u=None, grad_q=None, lap_q=None):
    """PointFields at a single point."""
    z = np.zeros
    return dy.PointFields(
        q=z((5, 1)) if q is None else np.asarray(q, float).reshape(5, 1),
        u=z((3, 1)) if u is None else np.asarray(u, float).reshape(3, 1),
        grad_u=z((3, 3, 1)) if grad_u is None else np.asarray(grad_u, float).reshape(3, 3, 1),
        grad_q=z((5, 3, 1)) if grad_q is None else np.asarray(grad_q, float).reshape(5, 3, 1),
        lap_q=z((5, 1)) if lap_q is None else np.asarray(lap_q, float).reshape(5, 1))


# -- assembly ---------------------------------------------------------------------

def test_f2_constant_uniaxial():
    q = qt.uniaxial(1.0, Z)
    f2 = dy.assemble_f2(point(q), P6)[:, 0]
    np.testing.assert_allclose(f2, 4.0 / 3.0 * q, atol=1e-15)
    np.testing.assert_allclose(qt.expand(f2), 4.0 / 3.0 * np.diag([-1 / 3, -1 / 3, 2 / 3]),
                               atol=1e-15)
    assert not dy.assemble_f2(point(), P6).any()


def test_f2_rigid_rotation_commutator():
    rng = np.random.default_rng(0)
    w = rng.standard_normal((3, 3))
    grad_u = w - w.T                    # pure rotation: D = 0
    q = rng.standard_normal(5)
    m = qt.expand(q)
    omega = 0.5 * (grad_u - grad_u.T)
    comm = omega @ m - m @ omega
    # hand check of one entry of the commutator
    assert math.isclose(comm[0, 1], sum(omega[0, k] * m[k, 1] - m[0, k] * omega[k, 1]
                                        for k in range(3)), rel_tol=1e-14)
    assert np.allclose(comm, comm.T)
    f2 = dy.assemble_f2(point(q, grad_u=grad_u), P6)[:, 0]
    rest = f2 - qt.reduce(comm)
    np.testing.assert_allclose(rest, P6.gamma * qt.bulk_force(q, P6), atol=1e-14)


def test_f3_examples():
    s0 = (6 - math.sqrt(12)) / 4
    q = qt.uniaxial(s0, Z)
    assert np.max(np.abs(dy.assemble_f3(point(q), P6))) < 1e-15
    q1 = qt.uniaxial(1.0, Z)
    f3 = dy.assemble_f3(point(q1), P6)[..., 0]
    h = qt.expand(qt.molecular_field(q1, np.zeros(5), P6))
    np.testing.assert_allclose(f3, P6.lam * qt.norm(q1) * h, atol=1e-15)
    u = np.array([1.0, -2.0, 0.5])
    np.testing.assert_allclose(dy.assemble_f3(point(u=u), P6)[..., 0], np.outer(u, u))


def test_f1_constant_u_single_mode():
    g = GridSpec(16, dealias_rule="none")
    st = dy.single_mode(g, (2, 1, 0), q_coeffs=np.arange(1.0, 6.0))
    st.uhat[:, 0, 0, 0] = [1.0, 0.0, 0.0]
    pf = dy.point_fields(st)
    divf1 = g.divergence(g.forward(dy.assemble_f1(pf)))
    np.testing.assert_allclose(divf1, 1j * g.wavevector[0] * st.qhat, atol=1e-14)
    np.testing.assert_allclose(g.forward(dy.transport(pf)), divf1, atol=1e-14)


def test_residual_zero_state():
    g = GridSpec(16)
    r = dy.nonlinear_residual(SpectralState.zeros(g), P)
    assert not r.gq.any() and not r.gu.any()


def test_residual_constant_q():
    g = GridSpec(16)
    q = qt.uniaxial(1.0, Z)
    r = dy.nonlinear_residual(constant_q_state(g, q), P6)
    np.testing.assert_allclose(r.gq[:, 0, 0, 0], 4.0 / 3.0 * q, atol=1e-14)
    r.gq[:, 0, 0, 0] = 0
    assert np.max(np.abs(r.gq)) < 1e-14
    assert np.max(np.abs(r.gu)) < 1e-14


@pytest.mark.parametrize("advection", dy.ADVECTION_FORMS)
def test_backends_agree(advection):
    g = GridSpec(16)
    st = dy.band_limited_random(g, 4, seed=1, amplitude=0.5)
    a = dy.nonlinear_residual(st, P6, "numba", advection)
    b = dy.nonlinear_residual(st, P6, "numpy", advection)
    scale = max(np.abs(b.gq).max(), np.abs(b.gu).max())
    assert np.abs(a.gq - b.gq).max() < 1e-13 * scale
    assert np.abs(a.gu - b.gu).max() < 1e-13 * scale


def test_advective_and_conservative_forms_agree():
    # the forms differ by q div u, which vanishes for solenoidal band-limited data
    g = GridSpec(32, dealias_rule="half")
    st = dy.band_limited_random(g, 5, seed=2, amplitude=0.3)
    a = dy.nonlinear_residual(st, P, advection="advective")
    b = dy.nonlinear_residual(st, P, advection="conservative")
    assert np.abs(a.gq - b.gq).max() < 1e-12 * np.abs(a.gq).max()
    np.testing.assert_array_equal(a.gu, b.gu)
    with pytest.raises(ValueError):
        dy.nonlinear_residual(st, P, advection="upwind")


def test_f3_divergence_against_term_by_term():
    g = GridSpec(32, dealias_rule="half")
    st = dy.single_mode(g, (1, 2, 0), q_coeffs=[0.3, -0.2, 0.5, 0.1, 0.4])
    p = PhysParams(lam=0.0)
    r = dy.nonlinear_residual(st, p)
    q = g.backward(st.qhat)
    gq = g.backward(g.gradient(st.qhat))            # [j, c]
    lq = g.backward(g.laplacian(st.qhat))
    Q, L = qt.expand(q), qt.expand(lq)
    gg = np.einsum("ac...,bc...->ab...", gq, gq)
    f3 = gg - np.einsum("ik...,kj...->ij...", Q, L) + np.einsum("ik...,kj...->ij...", L, Q)
    ref = -g.leray_project(g.row_divergence(g.forward(f3)))
    np.testing.assert_allclose(r.gu, g.dealias(ref), atol=1e-13)


def test_residual_structural_invariants():
    g = GridSpec(16)
    st = dy.band_limited_random(g, 4, seed=3)
    r = dy.nonlinear_residual(st, P)
    kx, ky, kz = g.wavevector
    dot = np.abs(kx * r.gu[0] + ky * r.gu[1] + kz * r.gu[2])
    mag = np.sqrt(g.k2) * np.linalg.norm(r.gu, axis=0)
    ok = mag > 1e-300
    assert np.max(dot[ok] / mag[ok]) < 1e-12
    m = qt.expand(g.backward(r.gq))
    assert np.max(np.abs(m[0, 0] + m[1, 1] + m[2, 2])) < 1e-13


def test_residual_is_quadratic_in_amplitude():
    g = GridSpec(16)
    for seed in range(20):
        st = dy.band_limited_random(g, 3, seed=seed, amplitude=1e-3)
        half = st.replace(st.qhat / 2, st.uhat / 2)
        r1 = dy.nonlinear_residual(st, P)
        r2 = dy.nonlinear_residual(half, P)
        n1 = math.hypot(np.linalg.norm(r1.gq), np.linalg.norm(r1.gu))
        n2 = math.hypot(np.linalg.norm(r2.gq), np.linalg.norm(r2.gu))
        assert n1 / n2 >= 3.9


# -- stepping ----------------------------------------------------------------------

def test_stepper_config_validation():
    for bad in (dict(dt=0.0), dict(dt=float("inf")), dict(dt=0.1, scheme="rk3"),
                dict(dt=0.1, reproject_every=0), dict(dt=0.1, backend="cuda"),
                dict(dt=0.1, advection="x")):
        with pytest.raises(ValueError):
            dy.StepperConfig(**bad)


def test_linear_step_matches_propagator():
    g = GridSpec(16)
    p = PhysParams(mu=2.0)
    st = dy.band_limited_random(g, 4, seed=4)
    cfg = dy.StepperConfig(0.01, nonlinear=False)
    out = dy.step(st, cfg, p)
    ref = kn.propagate_linear(st, 0.01, p)
    assert np.abs(out.qhat - ref.qhat).max() < 1e-14 * np.abs(ref.qhat).max()
    assert np.abs(out.uhat - ref.uhat).max() < 1e-14 * np.abs(ref.uhat).max()


def test_run_zero_horizon():
    g = GridSpec(16)
    st = dy.gaussian_bumps(g)
    res = dy.run(st, dy.StepperConfig(0.01), P, 0.0, callbacks=[lambda s, i: (i, s.t)])
    assert res.state is st and res.steps == 0 and res.rows == [(0, 0.0)]
    with pytest.raises(ValueError):
        dy.run(st, dy.StepperConfig(0.01), P, -1.0)
    with pytest.raises(ValueError):
        dy.run(st, dy.StepperConfig(0.03), P, 0.1)


def test_run_cadence_and_time_stamps():
    g = GridSpec(16)
    st = dy.gaussian_bumps(g)
    seen = []
    res = dy.run(st, dy.StepperConfig(0.01), P, 0.07, callbacks=[lambda s, i: seen.append(i)],
                 cadence=3, step_callbacks=[lambda s, i: None])
    assert seen == [0, 3, 6, 7]
    assert res.state.t == 0.07 and res.steps == 7


def test_run_deterministic():
    g = GridSpec(16)
    st = dy.band_limited_random(g, 3, seed=5, amplitude=0.5)
    cfg = dy.StepperConfig(0.01)
    a = dy.run(st, cfg, P, 0.05).state
    b = dy.run(st, cfg, P, 0.05).state
    np.testing.assert_array_equal(a.qhat, b.qhat)
    np.testing.assert_array_equal(a.uhat, b.uhat)


def test_blowup_detected():
    g = GridSpec(16)
    st = dy.gaussian_bumps(g)
    st.qhat[0, 1, 1, 1] = np.nan
    rows = []
    with pytest.raises(dy.BlowUpError) as exc:
        dy.run(st, dy.StepperConfig(0.01), P, 0.05, callbacks=[lambda s, i: rows.append(i)])
    assert exc.value.step == 1 and exc.value.partial.steps == 0
    assert rows == [0]


def test_pure_q_norm_strictly_decreases():
    g = GridSpec(16)
    st = dy.gaussian_bumps(g, u_fraction=0.0)
    norms = []
    dy.run(st, dy.StepperConfig(0.02), P, 0.4,
           callbacks=[lambda s, i: norms.append(g.l2_norm(s.qhat))])
    assert np.all(np.diff(norms) < 0)


def test_hygiene_projects():
    g = GridSpec(16)
    st = dy.band_limited_random(g, 7, seed=6, solenoidal=False)
    h = dy.hygiene(st)
    np.testing.assert_allclose(h.uhat, g.leray_project(g.dealias(st.uhat)))
    bad = st.qhat.copy()
    bad[0, 1, 1, 1] = np.inf
    assert dy.is_finite(st) and not dy.is_finite(st.replace(qhat=bad))


# -- initial data -------------------------------------------------------------------

def test_gaussian_bumps():
    g = GridSpec(16)
    st = dy.gaussian_bumps(g, sigma=1.0, seed=0, e0=1e-2, u_fraction=0.5)
    assert math.isclose(dy.initial_energy(st), 1e-2, rel_tol=1e-12)
    assert math.isclose(g.sobolev_norm(st.uhat, 2) ** 2, 5e-3, rel_tol=1e-12)
    assert not st.uhat[:, 0, 0, 0].any()
    q, u = st.real_fields()
    c = g.n // 2
    assert np.argmax(np.abs(q[0]).ravel()) == np.ravel_multi_index((c, c, c), g.shape)
    with pytest.raises(ValueError):
        dy.gaussian_bumps(g, u_fraction=1.5)


def test_band_limited_random():
    g = GridSpec(16)
    st = dy.band_limited_random(g, 3, seed=7, amplitude=0.2)
    q, u = st.real_fields()
    assert math.isclose(np.abs(q).max(), 0.2, rel_tol=1e-12)
    assert math.isclose(np.abs(u).max(), 0.2, rel_tol=1e-12)
    mx, my, mz = g.mode_index
    outside = (np.abs(mx) > 3) | (np.abs(my) > 3) | (mz > 3)
    outside = np.broadcast_to(outside, g.spectral_shape)
    assert not st.qhat[:, outside].any() and not st.uhat[:, outside].any()
    # real fields: the transform round trip changes nothing
    np.testing.assert_allclose(g.forward(q), st.qhat, atol=1e-16)


def test_single_mode():
    g = GridSpec(8)
    st = dy.single_mode(g, (1, 0, 0), q_coeffs=[1, 0, 0, 0, 0], u_vec=[0, 1, 0])
    q, u = st.real_fields()
    x, _, _ = g.coordinates()
    np.testing.assert_allclose(q[0], np.cos(x), atol=1e-15)
    np.testing.assert_allclose(u[1], np.cos(x), atol=1e-15)
    # a velocity parallel to the wavevector is projected away
    st2 = dy.single_mode(g, (1, 0, 0), u_vec=[1, 0, 0])
    assert np.abs(st2.uhat).max() < 1e-16
    with pytest.raises(ValueError):
        dy.single_mode(g, (0, 0, -1))


def test_scale_to_energy_rejects_zero():
    with pytest.raises(ValueError):
        dy.scale_to_energy(SpectralState.zeros(GridSpec(8)), 1.0)
