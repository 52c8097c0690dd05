from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shockfront.flux import (
    Burgers,
    PiecewiseLinearFlux,
    PowerFlux,
    flux_from_dict,
    flux_gap,
    interpolate_flux,
    legendre_transform,
    oleinik_a_sup,
    restricted_inverse,
)


def burgers_pl(delta: float, M: float) -> PiecewiseLinearFlux:
    return interpolate_flux(Burgers(), delta, M)


# -- interpolation --------------------------------------------------------------------


def test_interpolate_burgers_slopes():
    g = burgers_pl(1.0, 1.0)
    np.testing.assert_array_equal(g.nodes, [-2, -1, 0, 1, 2])
    np.testing.assert_array_equal(g.slopes, [-1.5, -0.5, 0.5, 1.5])


def test_interpolate_linear_flux_is_exact():
    class Linear(Burgers):
        def __call__(self, u):
            return 3.0 * np.asarray(u, dtype=float)

    g = interpolate_flux(Linear(), 0.25, 1.0)
    u = np.linspace(-1.2, 1.2, 97)
    np.testing.assert_allclose(g(u), 3.0 * u, atol=1e-14)


def test_interpolant_matches_nodes_and_lies_above():
    f = Burgers()
    g = burgers_pl(0.25, 1.0)
    np.testing.assert_allclose(g(g.nodes), f(g.nodes), atol=0)
    u = np.linspace(-1.2, 1.2, 1001)
    assert np.all(g(u) >= f(u) - 1e-15)


def test_interpolate_rejects_nonpositive_delta():
    with pytest.raises(ValueError):
        interpolate_flux(Burgers(), 0.0, 1.0)


def test_node_range_covers_m_plus_delta():
    g = burgers_pl(0.3, 1.0)
    assert g.nodes[0] <= -1.3 and g.nodes[-1] >= 1.3


def test_rejects_nonconvex():
    with pytest.raises(ValueError):
        PiecewiseLinearFlux([0, 1, 2], [0, 1, 1.5])


# -- flux gap ----------------------------------------------------------------------------


def test_flux_gap_examples():
    f = Burgers()
    assert flux_gap(f, f, 1.0) == 0.0
    for delta in (0.25, 0.125):
        assert flux_gap(f, burgers_pl(delta, 1.0), 1.0) == pytest.approx(delta**2 / 8, rel=1e-12)

    class Shifted(Burgers):
        def __call__(self, u):
            return 0.5 * np.asarray(u, dtype=float) ** 2 + 0.01

    assert flux_gap(f, Shifted(), 1.0) == pytest.approx(0.01, rel=1e-12)


def test_flux_gap_bound_and_monotone_in_delta():
    f = Burgers()
    gaps = [flux_gap(f, burgers_pl(2.0**-k, 1.0), 1.0) for k in range(1, 7)]
    assert gaps[1] <= 0.5 * (1 / 4) ** 2 * 1.0
    assert all(b <= a for a, b in zip(gaps, gaps[1:]))


# -- Legendre transform ------------------------------------------------------------------------


def test_burgers_is_self_conjugate():
    cp = legendre_transform(Burgers())
    p = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(cp(p), p**2 / 2)


def test_pl_conjugate_example():
    cp = legendre_transform(burgers_pl(1.0, 1.0))
    assert cp(0.5) == 0.0
    assert cp(1.0) == pytest.approx(0.5)  # u=1 piece: 1*1 - 1/2
    assert cp(1.6) == math.inf
    assert cp(-1.6) == math.inf
    np.testing.assert_array_equal(cp.kinks, [-1.5, -0.5, 0.5, 1.5])


@given(st.floats(-1.4, 1.4), st.floats(-2.0, 2.0))
def test_fenchel_young_pl(u, p):
    g = burgers_pl(0.25, 1.0)
    cp = legendre_transform(g)
    if cp.slope_min <= p <= cp.slope_max:
        assert g(u) + cp(p) >= u * p - 1e-12


def test_fenchel_young_equality_on_subdifferential():
    g = burgers_pl(0.25, 1.0)
    cp = legendre_transform(g)
    for j in range(1, g.nodes.size - 1):
        for p in (g.slopes[j - 1], g.slopes[j], 0.5 * (g.slopes[j - 1] + g.slopes[j])):
            assert g(g.nodes[j]) + cp(p) == pytest.approx(g.nodes[j] * p, abs=1e-12)


def test_biconjugate_recovers_nodes():
    g = burgers_pl(0.125, 1.0)
    cp = legendre_transform(g)
    # (f*)*(u) = max over the kinks of u p - f*(p): f* is linear between kinks
    for u in g.nodes:
        assert np.max(u * cp.kinks - cp.kink_values) == pytest.approx(g(u), abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_fenchel_young_power(u, p):
    f = PowerFlux()
    assert f(u) + f.conjugate(p) >= u * p - 1e-10


# -- restricted inverse ----------------------------------------------------------------------


def test_restricted_inverse_burgers():
    cp = legendre_transform(Burgers())
    assert restricted_inverse(cp, 2.0) == pytest.approx(2.0)
    assert restricted_inverse(cp, 0.0) == 0.0
    with pytest.raises(ValueError):
        restricted_inverse(cp, -1.0)


def test_restricted_inverse_pl_sup_convention():
    delta = 0.25
    cp = legendre_transform(burgers_pl(delta, 1.0))
    # f* vanishes on [-delta/2, delta/2]; the sup convention picks the right end
    assert restricted_inverse(cp, 0.0) == pytest.approx(delta / 2)
    p = np.linspace(delta / 2, cp.slope_max, 50)
    np.testing.assert_allclose(restricted_inverse(cp, cp(p)), p, atol=1e-12)
    # above sup f* the inverse clamps at the top of the slope range
    assert restricted_inverse(cp, 100.0) == cp.slope_max


def test_inverse_gap_driver_bound():
    f = legendre_transform(Burgers())
    for delta in (0.25, 0.125):
        g = legendre_transform(burgers_pl(delta, 6.0))
        gamma = np.linspace(0, 1, 4097)
        for t in (0.1, 0.5, 2.0):
            gap = np.max(np.abs(f.inverse(gamma / t) - g.inverse(gamma / t)))
            assert gap <= 2 * delta * 1.0 + 1e-12


# -- Oleinik-type constant ------------------------------------------------------------------------


def test_oleinik_burgers_and_power():
    assert oleinik_a_sup(Burgers(), 3.0) == 0.5
    assert oleinik_a_sup(PowerFlux(4.0, 1.0), 2.0) == pytest.approx(12.0)
    assert oleinik_a_sup(PowerFlux(), 2.0) == pytest.approx(3.0)  # u^4/4: a(v) = 3v^2/4


def test_oleinik_sampled_matches_closed_form():
    f = PowerFlux(4.0, 1.0)
    from shockfront.flux import _sampled_oleinik

    assert _sampled_oleinik(f, 1.5) == pytest.approx(3 * 1.5**2, rel=1e-6)


def test_oleinik_pl_burgers_interpolant():
    # a(v) = delta^2 / v^2 just above v = delta, so the sup is exactly 1
    for delta in (0.25, 0.125):
        assert oleinik_a_sup(burgers_pl(delta, 1.0), 1.0) == pytest.approx(1.0)


# -- zero-crossing lemma -------------------------------------------------------------------------


@pytest.mark.parametrize("delta", [0.25, 0.125])
def test_conjugate_difference_vanishes_on_every_chord_interval(delta):
    f = legendre_transform(Burgers())
    g = legendre_transform(burgers_pl(delta, 1.0))
    s = g.kinks
    for lo, hi in zip(s[:-1], s[1:]):
        p = np.linspace(lo, hi, 2049)
        d = f(p) - g(p)
        assert np.min(np.abs(d)) <= 1e-10
        assert np.min(d) >= -1e-12


# -- descriptors ---------------------------------------------------------------------------------


def test_flux_descriptors():
    assert isinstance(flux_from_dict({"type": "burgers"}), Burgers)
    p = flux_from_dict({"type": "power", "exponent": 4})
    assert p(2.0) == pytest.approx(4.0)
    g = flux_from_dict({"type": "pl", "nodes": [[-1, 0.5], [0, 0], [1, 0.5]]})
    assert g.slope_max == 0.5
    assert flux_from_dict(g.to_dict()).to_dict() == g.to_dict()
    with pytest.raises(ValueError):
        flux_from_dict({"type": "cubic"})
