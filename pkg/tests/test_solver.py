from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockfront.flux import Burgers, PowerFlux, interpolate_flux, legendre_transform
from shockfront.piecewise import (
    PiecewiseConstantFn,
    PiecewiseLinearFn,
    primitive,
    project_to_grid,
    pseudo_inverse,
)
from shockfront.reference import WedgeSolution

from _checks import check_structure
from shockfront.solver import (
    EventCapExceeded,
    hopf_lax_primitive,
    inverse_primitive_formula,
    run,
    snap_to_lattice,
    snapshot,
    solve_riemann,
)

DELTA = 0.25


def lattice_data(delta=DELTA, nonneg=False, max_cells=8):
    lo = 0 if nonneg else -6
    return st.builds(
        lambda left, widths, js: PiecewiseConstantFn(
            left + np.concatenate(([0.0], np.cumsum(widths))), np.array(js[: len(widths)], dtype=float) * delta
        ),
        st.floats(-2, 2),
        st.lists(st.floats(0.05, 1.0), min_size=1, max_size=max_cells),
        st.lists(st.integers(lo, 6), min_size=max_cells, max_size=max_cells),
    )


def flux_for(u: PiecewiseConstantFn, delta=DELTA):
    return interpolate_flux(Burgers(), delta, max(u.sup_norm, delta))


# -- Riemann problems -----------------------------------------------------------------------


def test_riemann_shock():
    fan = solve_riemann(interpolate_flux(Burgers(), 0.5, 1.0), 1.0, 0.0)
    assert fan.states == (1.0, 0.0)
    assert fan.speeds == (0.5,)


def test_riemann_rarefaction():
    fan = solve_riemann(interpolate_flux(Burgers(), 0.5, 1.0), 0.0, 1.0)
    assert fan.states == (0.0, 0.5, 1.0)
    assert fan.speeds == (0.25, 0.75)


def test_riemann_rejects_equal_and_off_lattice():
    g = interpolate_flux(Burgers(), 0.5, 1.0)
    with pytest.raises(ValueError):
        solve_riemann(g, 0.5, 0.5)
    with pytest.raises(ValueError):
        solve_riemann(g, 0.3, 1.0)


@given(st.integers(-8, 8), st.integers(-8, 8))
def test_riemann_fan_structure(i, j):
    if i == j:
        return
    g = interpolate_flux(Burgers(), DELTA, 2.0)
    fan = solve_riemann(g, i * DELTA, j * DELTA)
    assert np.all(np.diff(fan.speeds) > 0)
    if i > j:
        assert len(fan) == 1
    else:
        assert len(fan) == j - i
        np.testing.assert_allclose(np.diff(fan.states), DELTA)


# -- runs ------------------------------------------------------------------------------------


def test_single_shock_translates():
    g = interpolate_flux(Burgers(), 0.5, 1.0)
    u0 = PiecewiseConstantFn([-1, 0], [1.0])  # the left edge is a rarefaction, the right edge a shock
    r = run(u0, g, 1.0)
    shock = [f for f in r.active_fronts(0.5) if f.left > f.right]
    assert len(shock) == 1
    assert shock[0].position(0.5) == pytest.approx(0.25)


def test_two_front_merge():
    g = interpolate_flux(Burgers(), 0.5, 1.0)
    u0 = PiecewiseConstantFn([-1, 0, 1], [1.0, 0.5])
    r = run(u0, g, 3.0)
    merges = [e for e in r.events if len(e.absorbed) == 2 and len(e.emitted) == 1]
    assert len(merges) == 1
    ev = merges[0]
    assert ev.time == pytest.approx(2.0)
    assert ev.position == pytest.approx(1.5)
    new = r.fronts[ev.emitted[0]]
    assert (new.left, new.right, new.speed) == (1.0, 0.0, 0.5)


def test_snapshot_examples():
    u0 = project_to_grid(WedgeSolution(0.0), 1 / 16)
    g = interpolate_flux(Burgers(), 1 / 16, 2.0)
    r = run(u0, g, 2.0)
    assert snapshot(r, 0.0).equals(r.initial)
    t1 = r.events[0].time
    t = 0.5 * t1
    s = r.snapshot(t)
    expected = np.array([f.birth_position + f.speed * t for f in r.active_fronts(0.0)])
    np.testing.assert_allclose(s.breakpoints, expected, atol=1e-14)
    with pytest.raises(ValueError):
        r.snapshot(2.5)


def test_event_cap():
    u0 = project_to_grid(WedgeSolution(0.0), 1 / 32)
    g = interpolate_flux(Burgers(), 1 / 32, 2.0)
    with pytest.raises(EventCapExceeded):
        run(u0, g, 2.0, max_events=3)


def test_snap_to_lattice_records_change():
    g = interpolate_flux(Burgers(), 0.25, 1.0)
    u, change = snap_to_lattice(PiecewiseConstantFn([0, 1], [0.3]), g)
    assert u.values[0] == 0.25
    assert change == pytest.approx(0.05)


def test_wedge_final_profile_is_ladder_closed_by_one_shock():
    u0 = project_to_grid(WedgeSolution(0.0), 1 / 32)
    g = interpolate_flux(Burgers(), 1 / 32, 2.0)
    r = run(u0, g, 2.0)
    counts = [len(ids) for _, ids in r.iter_epochs()]
    assert all(b <= a for a, b in zip(counts, counts[1:]))
    final = r.snapshot(2.0)
    jumps = np.diff(np.concatenate(([0.0], final.values, [0.0])))
    # a ladder of single-delta rises closed by one shock down to 0
    assert np.all(jumps[:-1] > 0)
    assert np.all(jumps[:-1] <= 1 / 32 + 1e-15)
    assert jumps[-1] < 0


# -- structural invariants ---------------------------------------------------------------------


@given(lattice_data())
@settings(max_examples=40, deadline=None)
def test_structure_random(u0):
    r = run(u0, flux_for(u0), 3.0)
    check_structure(r)


@given(lattice_data(nonneg=True))
@settings(max_examples=30, deadline=None)
def test_support_stays_connected(u0):
    if not u0.has_connected_support():
        return
    r = run(u0, flux_for(u0), 3.0)
    for t in np.linspace(0.01, 3.0, 25):
        assert r.snapshot(float(t)).has_connected_support()


@given(lattice_data(nonneg=True), lattice_data(nonneg=True))
@settings(max_examples=25, deadline=None)
def test_primitive_difference_does_not_grow(u0, v0):
    if u0.is_zero or v0.is_zero:
        return
    v0 = v0 * (u0.mass / v0.mass)
    g = interpolate_flux(Burgers(), DELTA, max(u0.sup_norm, v0.sup_norm) + DELTA)
    ru, rv = run(u0, g, 2.0, snap=False), run(v0, g, 2.0, snap=False)
    prev = math.inf
    for t in np.linspace(0.0, 2.0, 21):
        su, sv = ru.snapshot(float(t)), rv.snapshot(float(t))
        x = np.union1d(su.breakpoints, sv.breakpoints)
        cur = float(np.max(np.abs(su.cdf(x) - sv.cdf(x))))
        assert cur <= prev + 1e-12
        prev = cur


def test_unsnapped_run_conserves_mass():
    u0 = PiecewiseConstantFn([0, 0.3, 1.1, 1.7], [0.37, 1.21, 0.05])
    r = run(u0, interpolate_flux(Burgers(), 0.25, 1.3), 2.0, snap=False)
    assert r.initial.equals(u0)
    check_structure(r)


# -- Hopf-Lax oracle ---------------------------------------------------------------------------


def test_hopf_lax_zero_data():
    cp = legendre_transform(interpolate_flux(Burgers(), 0.25, 1.0))
    U0 = PiecewiseLinearFn([0.0], [0.0])
    np.testing.assert_array_equal(hopf_lax_primitive(U0, cp, np.linspace(-2, 2, 9), 1.3), 0.0)


def test_hopf_lax_matches_front_tracking_on_wedge():
    dx = 1 / 64
    u0 = project_to_grid(WedgeSolution(0.0), dx)
    g = interpolate_flux(Burgers(), dx, 2.0)
    r = run(u0, g, 2.0)
    cp = legendre_transform(g)
    U0 = primitive(r.initial)
    x = np.linspace(-0.5, 2.5, 1000)
    for t in (0.1, 0.5, 1.0, 2.0):
        hl = hopf_lax_primitive(U0, cp, x, t)
        np.testing.assert_allclose(hl, r.snapshot(t).cdf(x), atol=1e-9)


def test_hopf_lax_translation():
    cp = legendre_transform(interpolate_flux(Burgers(), 0.25, 2.0))
    U0 = primitive(PiecewiseConstantFn([0, 0.5, 1.5], [1.0, 0.5]))
    h = 0.375
    U0h = PiecewiseLinearFn(U0.breakpoints + h, U0.values)
    x = np.linspace(-1, 3, 41)
    np.testing.assert_allclose(hopf_lax_primitive(U0h, cp, x + h, 0.8), hopf_lax_primitive(U0, cp, x, 0.8), atol=1e-13)


def test_hopf_lax_time_zero_and_negative():
    cp = legendre_transform(Burgers())
    U0 = primitive(PiecewiseConstantFn.indicator(0, 1))
    assert hopf_lax_primitive(U0, cp, 0.5, 0.0) == 0.5
    with pytest.raises(ValueError):
        hopf_lax_primitive(U0, cp, 0.5, -1.0)


def test_hopf_lax_analytic_flux_reproduces_wedge():
    # with the exact flux the oracle evolves the step data exactly; its mass is conserved
    u0 = project_to_grid(WedgeSolution(0.0), 1 / 8)
    cp = legendre_transform(Burgers())
    U0 = primitive(u0)
    x = np.linspace(-1, 4, 11)
    vals = hopf_lax_primitive(U0, cp, x, 1.0)
    assert vals[-1] == pytest.approx(1.0)
    assert np.all(np.diff(vals) >= -1e-15)


# -- inverse primitive formula ------------------------------------------------------------------


def test_inverse_formula_matches_quantile_of_snapshot():
    dx = 1 / 64
    u0 = project_to_grid(WedgeSolution(0.0), dx)
    g = interpolate_flux(Burgers(), dx, 2.0)
    r = run(u0, g, 2.0)
    cp = legendre_transform(g)
    Q0 = pseudo_inverse(primitive(r.initial))
    gamma = np.linspace(0, 1, 200)
    for t in (0.25, 1.0, 2.0):
        got = inverse_primitive_formula(Q0, cp, gamma, t)
        Qt = r.snapshot(t).quantile(gamma)
        np.testing.assert_allclose(got, Qt, atol=1e-9)


def test_inverse_formula_limits():
    Q0 = pseudo_inverse(primitive(PiecewiseConstantFn([0, 1, 2], [0.5, 0.5 + 0.25])))
    cp = legendre_transform(Burgers())
    assert inverse_primitive_formula(Q0, cp, 0.0, 0.7) == Q0(0.0)
    gamma = np.linspace(0, Q0.mass, 17)
    np.testing.assert_allclose(inverse_primitive_formula(Q0, cp, gamma, 1e-6), Q0(gamma), atol=1e-4)
    with pytest.raises(ValueError):
        inverse_primitive_formula(Q0, cp, Q0.mass + 0.1, 1.0)


def test_inverse_formula_power_flux_consistent_with_hopf_lax():
    u0 = PiecewiseConstantFn([0, 0.5, 1.0, 1.25], [1.0, 1.5, 0.5])
    f = PowerFlux(4.0, 0.25)
    cp = legendre_transform(f)
    U0, Q0 = primitive(u0), pseudo_inverse(primitive(u0))
    t = 0.6
    gamma = np.linspace(0.05, u0.mass - 0.05, 25)
    x = inverse_primitive_formula(Q0, cp, gamma, t)
    np.testing.assert_allclose(hopf_lax_primitive(U0, cp, x, t), gamma, atol=1e-8)
