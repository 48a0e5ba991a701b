"""Relative energy, residual pairings and the certificate driver."""

import numpy as np
import pytest

from nemlab.certificate import (
    CertificateReport,
    TestSample,
    TestTrajectory,
    TrajectoryError,
    certificate,
    correction,
    equation_residual,
    initial_distance,
    regularity_weight,
    rel_dissipation,
    rel_energy,
    rel_energy_expanded,
    weak_pairing,
)
from nemlab.energy import variational_derivative
from nemlab.fields import (
    inner,
    leray_project,
    lp_norm,
    make_grid,
    random_band_limited,
    twist_field,
    unit_normalize,
)
from nemlab.material import default_params
from nemlab.scheme import FieldState, SchemeConfig, integrate, prepare_initial

PARAMS = default_params()


@pytest.fixture(scope="module")
def grid():
    return make_grid((16, 16))


@pytest.fixture(scope="module")
def short_trace(grid):
    rng = np.random.default_rng(77)
    d_raw = unit_normalize(twist_field(grid, 1) + 0.25 * random_band_limited(grid, rng, 3))
    v_raw = 0.3 * random_band_limited(grid, rng, 2)
    cfg = SchemeConfig(dt=1e-3, t_end=0.05, record_every=5)
    st0 = prepare_initial(grid, PARAMS, v_raw, d_raw, cfg)
    H = 0.3 * np.ones(grid.shape + (3,))
    return integrate(grid, PARAMS, st0, cfg, H=H), H


def random_state(grid, seed, amp=0.5):
    rng = np.random.default_rng(seed)
    d = unit_normalize(twist_field(grid, 1) + amp * random_band_limited(grid, rng, 3))
    v = 0.3 * random_band_limited(grid, rng, 2)
    return FieldState(v=v, d=d, t=0.0)


def make_sample(grid, seed, amp=0.5):
    st = random_state(grid, seed, amp)
    z = np.zeros(grid.shape + (3,))
    return TestSample(0.0, st.v, st.d, z, z)


# ---------------------------------------------------------------------------
# relative quantities


def test_rel_energy_vanishes_on_coincidence(grid):
    st = random_state(grid, 1)
    ts = TestSample(0.0, st.v, st.d, 0 * st.v, 0 * st.d)
    H = 0.4 * random_band_limited(grid, np.random.default_rng(2), 2)
    assert rel_energy(grid, st, H, ts, H, PARAMS) == 0.0
    assert rel_energy_expanded(grid, st, H, ts, H, PARAMS) == 0.0


def test_rel_energy_tensor_matches_expansion(grid):
    """Tensor form against the splay/twist/bend expansion, ten states."""
    for trial in range(10):
        st = random_state(grid, 100 + trial)
        ts = make_sample(grid, 200 + trial)
        rng = np.random.default_rng(300 + trial)
        H = 0.4 * random_band_limited(grid, rng, 2)
        Ht = 0.4 * random_band_limited(grid, rng, 2)
        a = rel_energy(grid, st, H, ts, Ht, PARAMS)
        b = rel_energy_expanded(grid, st, H, ts, Ht, PARAMS)
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_rel_energy_nonnegative(grid):
    for trial in range(10):
        st = random_state(grid, 400 + trial)
        ts = make_sample(grid, 500 + trial)
        assert rel_energy(grid, st, None, ts, None, PARAMS) >= 0.0


def test_rel_energy_magnetic_part(grid):
    """With equal fields the magnetic part reduces to the field mismatch."""
    st = random_state(grid, 6)
    ts = TestSample(0.0, st.v, st.d, 0 * st.v, 0 * st.d)
    rng = np.random.default_rng(7)
    H = 0.5 * random_band_limited(grid, rng, 2)
    Ht = 0.5 * random_band_limited(grid, rng, 2)
    dH = H - Ht
    par = np.sum(st.d * dH, -1)
    perp = np.cross(st.d, dH)
    expected = -0.5 * PARAMS.chi_par * inner(grid, par, par)
    expected += -0.5 * PARAMS.chi_perp * inner(grid, perp, perp)
    got = rel_energy(grid, st, H, ts, Ht, PARAMS)
    assert got == pytest.approx(expected, rel=1e-12)
    assert got > 0.0


def test_rel_dissipation_zero_and_nonnegative(grid):
    st = random_state(grid, 8)
    q = variational_derivative(grid, PARAMS, st.d)
    ts = TestSample(0.0, st.v, st.d, 0 * st.v, 0 * st.d)
    assert rel_dissipation(grid, st, q, ts, q, PARAMS) == 0.0
    for trial in range(5):
        other = make_sample(grid, 600 + trial)
        qo = variational_derivative(grid, PARAMS, other.d)
        assert rel_dissipation(grid, st, q, other, qo, PARAMS) >= 0.0


def test_rel_dissipation_velocity_only_terms(grid):
    """Against a direct evaluation for a resting test state."""
    st = random_state(grid, 9)
    q = variational_derivative(grid, PARAMS, st.d)
    ts = make_sample(grid, 10)
    qt = variational_derivative(grid, PARAMS, ts.d)
    ts_rest = TestSample(0.0, 0 * ts.v, ts.d, 0 * ts.v, 0 * ts.d)
    from nemlab.fields import grad
    from nemlab.tensors import matvec, sym_part

    s = sym_part(grad(grid, st.v))
    lam2 = PARAMS.lam**2
    a1 = np.sum(st.d * matvec(s, st.d), -1)
    a3 = matvec(s, st.d)
    a4 = np.cross(st.d, q) - np.cross(ts.d, qt)
    expected = (PARAMS.mu1 + lam2) * inner(grid, a1, a1)
    expected += PARAMS.mu4 * inner(grid, s, s)
    expected += (PARAMS.mu5 + PARAMS.mu6 - lam2) * inner(grid, a3, a3)
    expected += inner(grid, a4, a4)
    got = rel_dissipation(grid, st, q, ts_rest, qt, PARAMS)
    assert got == pytest.approx(expected, rel=1e-12)


def test_regularity_weight_for_resting_states(grid):
    """At rest with constant director every norm in the weight vanishes."""
    eq = TestTrajectory.equilibrium(grid)
    ts = eq.sample(0.0)
    assert regularity_weight(grid, PARAMS, ts, None, 3.0) == 0.0

    tw = TestTrajectory.static_twist(grid, mode=2)
    tst = tw.sample(0.0)
    qt = variational_derivative(grid, PARAMS, tst.d)
    expected = lp_norm(grid, qt, 3) ** 2
    assert regularity_weight(grid, PARAMS, tst, None, 1.0) == pytest.approx(
        expected, rel=1e-12
    )
    # and the weight is linear in the constant
    assert regularity_weight(grid, PARAMS, tst, None, 2.5) == pytest.approx(
        2.5 * expected, rel=1e-12
    )


def test_correction_vanishes_on_coincidence(grid):
    st = random_state(grid, 11)
    H = 0.3 * np.ones(grid.shape + (3,))
    a = correction(grid, PARAMS, st.d, H, st.d, H)
    np.testing.assert_array_equal(a, np.zeros_like(st.d))


def test_correction_magnetic_terms(grid):
    """Pure field mismatch against the hand-built coupling expression."""
    st = random_state(grid, 12)
    rng = np.random.default_rng(13)
    H = 0.5 * random_band_limited(grid, rng, 2)
    Ht = 0.5 * random_band_limited(grid, rng, 2)
    a = correction(grid, PARAMS, st.d, H, st.d, Ht)
    dh = Ht - H
    expected = PARAMS.chi_par * np.sum(st.d * Ht, -1)[..., None] * dh
    expected -= PARAMS.chi_perp * np.cross(dh, np.cross(Ht, st.d))
    np.testing.assert_allclose(a, expected, atol=1e-13)


def test_initial_distance_trivial_cases(grid):
    st = random_state(grid, 14)
    ts = TestSample(0.0, st.v, st.d, 0 * st.v, 0 * st.d)
    assert initial_distance(grid, st, None, ts, None, PARAMS) == 0.0
    # constant test director kills the rank-6 coupling, leaving the energy
    eq = TestTrajectory.equilibrium(grid).sample(0.0)
    e = rel_energy(grid, st, None, eq, None, PARAMS)
    d0 = initial_distance(grid, st, None, eq, None, PARAMS)
    assert d0 == pytest.approx(e, rel=1e-12)


def test_initial_distance_nonnegative(grid):
    for trial in range(20):
        st = random_state(grid, 700 + trial)
        ts = make_sample(grid, 800 + trial)
        rng = np.random.default_rng(900 + trial)
        H = 0.4 * random_band_limited(grid, rng, 2)
        Ht = 0.4 * random_band_limited(grid, rng, 2)
        assert initial_distance(grid, st, H, ts, Ht, PARAMS) >= -1e-10


# ---------------------------------------------------------------------------
# equation residual and weak pairing


def test_equilibrium_residual_is_zero(grid):
    eq = TestTrajectory.equilibrium(grid)
    ts = eq.sample(0.0)
    for mode in ("continuous", "discrete"):
        av, ad = equation_residual(grid, PARAMS, ts, None, mode=mode)
        assert np.abs(av).max() <= 1e-13
        assert np.abs(ad).max() <= 1e-13


def test_static_twist_residual_is_zero(grid):
    """The twist is a steady state, both residual components vanish."""
    tw = TestTrajectory.static_twist(grid, mode=2)
    ts = tw.sample(0.0)
    av, ad = equation_residual(grid, PARAMS, ts, None)
    assert np.abs(ad).max() <= 1e-10
    assert np.abs(av).max() <= 1e-10
    assert np.abs(leray_project(grid, av)).max() <= 1e-10


def test_forcing_cancels_momentum_residual(grid):
    """Passing the assembled momentum defect as forcing zeroes comp_v."""
    ts = make_sample(grid, 15)
    av, _ = equation_residual(grid, PARAMS, ts, None)
    av2, ad2 = equation_residual(grid, PARAMS, ts, None, g=av)
    np.testing.assert_allclose(av2, np.zeros_like(av2), atol=1e-14)
    _, ad = equation_residual(grid, PARAMS, ts, None)
    np.testing.assert_array_equal(ad, ad2)


def test_equation_residual_rejects_bad_mode(grid):
    ts = make_sample(grid, 16)
    with pytest.raises(ValueError, match="continuous.*discrete"):
        equation_residual(grid, PARAMS, ts, None, mode="weak")


def test_weak_pairing_matches_assembled_derivative(grid):
    """Integration by parts is exact, so the weak bracket must equal the
    inner product with the strong-form variational derivative."""
    rng = np.random.default_rng(17)
    h = unit_normalize(twist_field(grid, 1) + 0.3 * random_band_limited(grid, rng, 3))
    l = random_band_limited(grid, rng, 4)
    H = 0.4 * random_band_limited(grid, rng, 2)
    q = variational_derivative(grid, PARAMS, h, H)
    weak = weak_pairing(grid, PARAMS, l, h, H)
    strong = inner(grid, l, q)
    assert weak == pytest.approx(strong, rel=1e-10, abs=1e-11)


# ---------------------------------------------------------------------------
# trajectories


def test_equilibrium_normalizes_direction(grid):
    eq = TestTrajectory.equilibrium(grid, direction=(2.0, 0.0, 0.0))
    ts = eq.sample(0.5)
    np.testing.assert_allclose(ts.d[..., 0], 1.0, atol=1e-15)
    assert eq.label == "equilibrium"
    assert eq.H is None


def test_from_callables_fd_fallback(grid):
    shape = grid.shape + (3,)

    def d_fn(t):
        d = np.zeros(shape)
        d[..., 0] = np.cos(0.3 * t)
        d[..., 1] = np.sin(0.3 * t)
        return d

    def v_fn(t):
        return np.zeros(shape)

    tr = TestTrajectory.from_callables(grid, v_fn, d_fn, label="rotor")
    ts = tr.sample(0.4)
    expected = np.zeros(shape)
    expected[..., 0] = -0.3 * np.sin(0.12)
    expected[..., 1] = 0.3 * np.cos(0.12)
    np.testing.assert_allclose(ts.dt_d, expected, atol=1e-8)
    assert tr.label == "rotor"


def test_trajectory_rejects_non_unit_director(grid):
    shape = grid.shape + (3,)

    def d_fn(t):
        return 1.5 * np.ones(shape) / np.sqrt(3.0)

    with pytest.raises(TrajectoryError, match="unit nodewise"):
        TestTrajectory.from_callables(grid, lambda t: np.zeros(shape), d_fn)


def test_from_trace_lookup(short_trace):
    trace, _ = short_trace
    tr = TestTrajectory.from_trace(trace)
    ts = tr.sample(trace.times[2])
    np.testing.assert_array_equal(ts.d, trace.states[2].d)
    np.testing.assert_array_equal(ts.v, trace.states[2].v)
    with pytest.raises(TrajectoryError, match="no sample"):
        tr.sample(0.123456789)


# ---------------------------------------------------------------------------
# certificate driver


def test_certificate_self_consistency(short_trace):
    """A trace certified against itself has exactly matching sides."""
    trace, H = short_trace
    own = TestTrajectory.from_trace(trace)
    rep = certificate(trace, H, own, H, PARAMS)
    assert rep.passed
    assert rep.minimal_C == 0.0
    assert np.abs(rep.lhs).max() <= 1e-10
    assert np.abs(rep.rhs).max() <= 1e-10
    assert rep.label == "from_trace"


def test_certificate_equilibrium_both_pairings(short_trace):
    trace, H = short_trace
    eq = TestTrajectory.equilibrium(trace.grid)
    rep_c = certificate(trace, H, eq, None, PARAMS, pairing="continuous")
    rep_d = certificate(trace, H, eq, None, PARAMS, pairing="discrete")
    assert rep_c.passed and rep_d.passed
    assert rep_c.minimal_C == 0.0
    assert rep_d.minimal_C == 0.0
    assert rep_c.slack.min() > 0.0
    # collocation with unit test data: the extra discrete terms all vanish
    np.testing.assert_allclose(rep_d.slack, rep_c.slack, rtol=1e-9, atol=1e-10)
    s = rep_c.summary()
    assert s["passed"] is True
    assert s["minimal_C"] == 0.0
    assert s["trajectory"] == "equilibrium"
    assert s["samples"] == len(trace.times)


def test_certificate_explicit_constant(short_trace):
    trace, H = short_trace
    eq = TestTrajectory.equilibrium(trace.grid)
    rep = certificate(trace, H, eq, None, PARAMS, C=4.0)
    assert rep.minimal_C == 4.0
    assert rep.passed == bool(rep.slack.min() >= -rep.tol)
    rows = list(rep.rows())
    assert len(rows) == len(trace.times)
    assert rows[0][0] == pytest.approx(trace.times[0])
    assert CertificateReport.COLUMNS == ("t", "lhs", "rhs", "slack")


def test_certificate_warns_on_sparse_sampling(grid):
    rng = np.random.default_rng(19)
    d_raw = unit_normalize(twist_field(grid, 1) + 0.2 * random_band_limited(grid, rng, 2))
    v_raw = 0.2 * random_band_limited(grid, rng, 2)
    cfg = SchemeConfig(dt=1e-3, t_end=5e-3, record_every=100)
    st0 = prepare_initial(grid, PARAMS, v_raw, d_raw, cfg)
    trace = integrate(grid, PARAMS, st0, cfg)
    eq = TestTrajectory.equilibrium(grid)
    rep = certificate(trace, None, eq, None, PARAMS)
    assert any("under-resolved" in w for w in rep.warnings)
    assert rep.summary()["warnings"] == list(rep.warnings)


def test_certificate_rejects_bad_pairing(short_trace):
    trace, H = short_trace
    eq = TestTrajectory.equilibrium(trace.grid)
    with pytest.raises(ValueError, match="pairing"):
        certificate(trace, H, eq, None, PARAMS, pairing="weak")
