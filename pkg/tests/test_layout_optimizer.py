import logging
import math

import numpy as np
import pytest

from oracles import central_gradient, central_hessian, direct_gain
from squintlab.analog import Assignment, gain_profile
from squintlab.channel import C0, UserGeometry, Waveband
from squintlab.exceptions import ConfigurationError, SingularityError
from squintlab.geometry import nominal_layout, validate_layout
from squintlab.layout_optimizer import (
    TRACE_COLUMNS,
    SCAConfig,
    _panel_context,
    build_surrogate,
    concavify,
    gain_gradient_hessian,
    linearized_spacing,
    near_worst_set,
    optimize_layout,
    optimize_panel,
    squared_gain,
)

LAM = C0 / 100e9
USER = UserGeometry(5.0, np.pi / 3, np.pi / 6)
BAND = Waveband(100e9, 20e9, 64)


def test_squared_gain_is_gain_squared():
    lay = nominal_layout(1, 1, 16, 4, LAM)
    J = gain_profile(lay, BAND, USER, 0)
    for l in (1, 17, 64):
        assert squared_gain(lay, BAND, l, USER, 0, 3) == pytest.approx(J[l - 1] ** 2, rel=1e-12)


def test_squared_gain_center_frequency():
    lay = nominal_layout(1, 1, 4, 4, LAM)
    band = Waveband(100e9, 20e9, 5)
    assert squared_gain(lay, band, 3, USER, 0, 0) == pytest.approx(16.0**2, rel=1e-14)


def test_two_tile_direct_summation():
    lay = nominal_layout(1, 1, 2, 4, LAM).with_tile(0, 1, [0.004, 0.003])
    band = Waveband(100e9, 20e9, 8)
    ref = direct_gain(lay.panel_element_yz(0), USER.position, band.frequencies, 100e9)
    for l in range(1, 9):
        assert squared_gain(lay, band, l, USER, 0, 0) == pytest.approx(ref[l - 1] ** 2, rel=1e-9)


def test_derivatives_vanish_at_center_frequency():
    lay = nominal_layout(1, 1, 4, 4, LAM)
    band = Waveband(100e9, 20e9, 5)
    g, H = gain_gradient_hessian(lay, band, 3, USER, 0, 1)
    assert np.all(g == 0) and np.all(H == 0)


@pytest.mark.parametrize("seed", range(8))
def test_derivatives_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    u = UserGeometry(rng.uniform(0.5, 10), rng.uniform(-1, 1), rng.uniform(-1, 1))
    lay = nominal_layout(1, 1, 4, 4, LAM)
    deltas = lay.tile_translations[0] + rng.uniform(-LAM, LAM, (4, 2))
    lay = lay.with_translations(deltas[None])
    l, t = int(rng.integers(1, 65)), int(rng.integers(0, 4))

    def q(x):
        return squared_gain(lay.with_tile(0, t, x), BAND, l, u, 0, t)

    g, H = gain_gradient_hessian(lay, BAND, l, u, 0, t)
    x0 = lay.tile_translations[0, t]
    np.testing.assert_allclose(g, central_gradient(q, x0, 1e-6), rtol=1e-5, atol=1e-5 * np.abs(g).max())
    np.testing.assert_allclose(H, central_hessian(q, x0, 1e-5), rtol=1e-4, atol=1e-4 * np.abs(H).max())
    np.testing.assert_array_equal(H, H.T)


def test_singularity():
    lay = nominal_layout(1, 1, 1, 1, LAM)
    u = UserGeometry(1e-9, 0.0, 0.0)
    ctx = _panel_context(lay, 0, UserGeometry(1.0, 0.0, 0.0))
    ctx = (ctx[0], ctx[1], np.zeros(2), 0.0, 1.0)
    with pytest.raises(SingularityError):
        build_surrogate(np.zeros(2), np.array([1.0]), np.zeros(1, complex), ctx)
    del u


@pytest.mark.parametrize(
    "H,expected",
    [
        (np.diag([-1.0, -2.0]), np.diag([-1.0, -2.0])),
        (np.diag([3.0, 5.0]), np.zeros((2, 2))),
        (np.diag([2.0, -4.0]), np.diag([0.0, -4.0])),
    ],
)
def test_concavify_examples(H, expected):
    # clamped cases carry a few-ulp safety shift
    np.testing.assert_allclose(concavify(H), expected, atol=1e-13)


def test_concavify_random_nsd():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(500, 2, 2))
    U = concavify(A + np.swapaxes(A, 1, 2))
    assert np.linalg.eigvalsh(U).max() <= 1e-12
    nsd = -(A @ np.swapaxes(A, 1, 2))
    np.testing.assert_allclose(concavify(nsd), nsd, atol=1e-12)


def test_near_worst_examples():
    np.testing.assert_array_equal(near_worst_set([2.0, 2.0, 2.0], 0.01), [0, 1, 2])
    np.testing.assert_array_equal(near_worst_set([3.0, 1.0, 1.0, 4.0], 0.0), [1, 2])
    np.testing.assert_array_equal(near_worst_set([5.0, 5.005, 5.2], 0.01), [0, 1])
    np.testing.assert_array_equal(near_worst_set([10.0, 10.5, 12.0], 0.06, relative=True), [0, 1])


def test_linearized_spacing_tight_and_inner():
    rng = np.random.default_rng(1)
    for _ in range(20):
        other = rng.normal(size=2)
        ang = rng.uniform(0, 2 * np.pi)
        d_min = rng.uniform(0.1, 1)
        ref = other + d_min * np.array([np.cos(ang), np.sin(ang)])
        hp = linearized_spacing(ref, other, d_min)
        assert hp.slack(ref) == pytest.approx(0.0, abs=1e-12)
        pts = rng.uniform(-4, 4, (10_000, 2))
        inside = pts[hp.slack(pts) >= 0]
        assert np.all(np.linalg.norm(inside - other, axis=1) >= d_min - 1e-12)


def test_linearized_spacing_coincident(caplog):
    with caplog.at_level(logging.WARNING):
        hp = linearized_spacing([0.0, 0.0], [0.0, 0.0], 1.0)
    assert np.linalg.norm(hp.normal) == pytest.approx(1.0) and "coincident" in caplog.text


def _surrogate_at(seed):
    rng = np.random.default_rng(seed)
    lay = nominal_layout(1, 1, 4, 4, LAM)
    ctx = _panel_context(lay, 0, USER)
    kappa = np.abs(BAND.residual_wavenumbers[rng.integers(0, 64, 3)])
    rest = rng.normal(size=3) + 1j * rng.normal(size=3)
    delta = lay.tile_translations[0, 0] + rng.uniform(-LAM, LAM, 2)
    return build_surrogate(delta, kappa, rest, ctx), ctx, kappa, rest, delta


def test_surrogate_tangency():
    from squintlab.layout_optimizer import _derivatives

    for seed in range(20):
        model, ctx, kappa, rest, delta = _surrogate_at(seed)
        center, offsets, focus, r, d_ref = ctx
        Q, g, _ = _derivatives(delta, offsets, center, focus, r, kappa, rest, d_ref)
        np.testing.assert_array_equal(model.evaluate(delta), Q)
        np.testing.assert_array_equal(model.gradients, g)
        assert np.linalg.eigvalsh(model.curvatures).max() <= 1e-12


def test_surrogate_concavity():
    rng = np.random.default_rng(5)
    model, *_ = _surrogate_at(3)
    a = model.center + rng.uniform(-LAM, LAM, (2000, 2))
    b = model.center + rng.uniform(-LAM, LAM, (2000, 2))
    lam = rng.uniform(0, 1, (2000, 1))
    lhs = model.evaluate(lam * a + (1 - lam) * b)
    rhs = lam * model.evaluate(a) + (1 - lam) * model.evaluate(b)
    assert np.all(lhs >= rhs - 1e-10 * (1 + np.abs(rhs)))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SCAConfig(eps=0)
    with pytest.raises(ConfigurationError):
        SCAConfig(eps_j_mode="percent")
    with pytest.raises(ConfigurationError):
        SCAConfig(trust_radius=-1.0)


def test_single_tile_zero_bandwidth_unchanged():
    lay = nominal_layout(1, 1, 1, 4, LAM)
    band = Waveband(100e9, 0.0, 8)
    deltas, trace = optimize_panel(lay, band, USER, 0)
    np.testing.assert_array_equal(deltas, lay.tile_translations[0])
    assert not any(r.accepted for r in trace[1:])


def test_zero_budget_trace_is_initial_gain():
    lay = nominal_layout(1, 1, 16, 4, LAM)
    _, trace = optimize_panel(lay, BAND, USER, 0, SCAConfig(n_outer=0))
    assert len(trace) == 1
    J = gain_profile(lay, BAND, USER, 0)
    assert trace[0].min_J == pytest.approx(J.min(), rel=1e-12)
    assert trace[0].sum_J == pytest.approx(J.sum(), rel=1e-12)


@pytest.fixture(scope="module")
def single_user_run():
    lay = nominal_layout(1, 1, 16, 4, LAM)
    new, trace = optimize_layout(lay, BAND, (USER,), Assignment((0,)), SCAConfig())
    return lay, new, trace


def test_monotone_feasible_and_improving(single_user_run):
    lay, new, trace = single_user_run
    accepted = [r.min_J for r in trace if r.accepted]
    assert all(b >= a - 1e-12 for a, b in zip(accepted, accepted[1:]))
    assert validate_layout(new).ok
    assert gain_profile(new, BAND, USER, 0).min() == pytest.approx(trace[-1].min_J, rel=1e-9)
    assert gain_profile(new, BAND, USER, 0).min() > gain_profile(lay, BAND, USER, 0).min()
    assert [c for c in TRACE_COLUMNS] == list(trace[0].__dataclass_fields__)[: len(TRACE_COLUMNS)]


def test_every_accepted_iterate_validates():
    lay = nominal_layout(1, 1, 4, 4, LAM)
    _, trace = optimize_panel(lay, BAND, USER, 0, SCAConfig(n_outer=2))
    deltas = np.array(lay.tile_translations[0])
    for r in trace[1:]:
        if r.accepted:
            deltas[r.tile] = (r.delta_y, r.delta_z)
            assert validate_layout(lay.with_translations(deltas[None])).ok


def test_deterministic_trace():
    lay = nominal_layout(1, 1, 4, 4, LAM)
    a = optimize_panel(lay, BAND, USER, 0, SCAConfig(n_outer=2))[1]
    b = optimize_panel(lay, BAND, USER, 0, SCAConfig(n_outer=2))[1]
    assert [r.as_tuple() for r in a] == [r.as_tuple() for r in b] or all(
        (math.isnan(x) and math.isnan(y)) or x == y for ra, rb in zip(a, b) for x, y in zip(ra.as_tuple(), rb.as_tuple())
    )


def test_unassigned_panels_untouched():
    lay = nominal_layout(2, 1, 4, 4, LAM)
    new, _ = optimize_layout(lay, BAND, (USER,), Assignment((1,)), SCAConfig(n_outer=1))
    np.testing.assert_array_equal(new.tile_translations[0], lay.tile_translations[0])
