from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockfront.piecewise import (
    PiecewiseConstantFn,
    PiecewiseLinearFn,
    from_json_dict,
    l1_distance,
    lip_plus,
    mass,
    primitive,
    project_to_grid,
    pseudo_inverse,
    total_variation,
)
from shockfront.reference import WedgeSolution


def step_functions(min_cells=1, max_cells=8, nonneg=False, positive=False):
    lo = 0.1 if positive else (0.0 if nonneg else -2.0)
    return st.builds(
        lambda left, widths, values: PiecewiseConstantFn(
            left + np.concatenate(([0.0], np.cumsum(widths))), values[: len(widths)]
        ),
        st.floats(-3, 3),
        st.lists(st.floats(0.05, 1.0), min_size=min_cells, max_size=max_cells),
        st.lists(st.floats(lo, 2.0).map(lambda v: v if abs(v) > 1e-6 else 0.0), min_size=max_cells, max_size=max_cells),
    )


# -- canonical form ---------------------------------------------------------------------


def test_canonical_form_merges_and_trims():
    u = PiecewiseConstantFn([0, 1, 2, 3, 4, 5], [0, 1, 1, 2, 0])
    np.testing.assert_array_equal(u.breakpoints, [1, 3, 4])
    np.testing.assert_array_equal(u.values, [1, 2])


def test_zero_function_is_empty():
    z = PiecewiseConstantFn([0, 1, 2], [0, 0])
    assert z.is_zero
    assert z(0.5) == 0.0


def test_rejects_bad_breakpoints():
    with pytest.raises(ValueError):
        PiecewiseConstantFn([0, 2, 1], [1, 1])
    with pytest.raises(ValueError):
        PiecewiseConstantFn([0, 1], [1, 2])


def test_evaluation_is_left_closed():
    u = PiecewiseConstantFn([0, 1, 2], [3, 5])
    np.testing.assert_array_equal(u([-0.1, 0, 0.99, 1, 2]), [0, 3, 3, 5, 0])


# -- mass, variation, Lip+ ----------------------------------------------------------------------


def test_mass_examples():
    assert mass(PiecewiseConstantFn.indicator(0, 1)) == 1.0
    assert mass(PiecewiseConstantFn.zero()) == 0.0
    assert mass(PiecewiseConstantFn([0, 1, 3], [2, -1])) == 0.0


def test_total_variation_examples():
    assert total_variation(PiecewiseConstantFn.indicator(0, 1)) == 2.0
    assert total_variation(PiecewiseConstantFn.from_cells(0, 1, [1, 2, 0.5])) == 4.0
    assert total_variation(PiecewiseConstantFn.zero()) == 0.0


def test_lip_plus_examples():
    # compact step data always rises from 0 somewhere, so only 0 has Lip+ = 0
    assert lip_plus(PiecewiseConstantFn.zero()) == 0.0
    assert lip_plus(PiecewiseConstantFn([-1, 0, 1], [1, 0.5])) == math.inf
    assert lip_plus(PiecewiseConstantFn([0, 1], [-1])) == math.inf
    assert lip_plus(PiecewiseConstantFn([0, 1], [1])) == math.inf
    # the decreasing step 1 -> 0 seen as a continuous broken line from the left
    assert lip_plus(PiecewiseLinearFn([0, 1], [1, 0], left_slope=0.0)) == 0.0
    wedge = PiecewiseLinearFn([0, 1], [0, 2])
    assert lip_plus(wedge) == 2.0


def test_lip_plus_of_projection_is_infinite_for_increasing_data():
    u = project_to_grid(WedgeSolution(0.0), 1 / 16)
    assert lip_plus(u) == math.inf


# -- primitive and quantile --------------------------------------------------------------------


def test_primitive_examples():
    U = primitive(PiecewiseConstantFn.indicator(0, 1))
    np.testing.assert_allclose(U([-1, 0, 0.5, 1, 3]), [0, 0, 0.5, 1, 1])
    Z = primitive(PiecewiseConstantFn.zero())
    assert Z(5.0) == 0.0
    W = primitive(PiecewiseConstantFn([0, 0.5, 1], [0.5, 1.5]))
    np.testing.assert_allclose(W([0, 0.5, 1]), [0, 0.25, 1])
    assert W.is_nondecreasing


@given(step_functions())
def test_primitive_derivative_round_trip(u):
    d = primitive(u).derivative()
    assert d.equals(u, atol=1e-12)


def test_pseudo_inverse_examples():
    Q = pseudo_inverse(primitive(PiecewiseConstantFn.indicator(0, 1)))
    np.testing.assert_allclose(Q([0, 0.3, 1]), [0, 0.3, 1])

    two = PiecewiseConstantFn([0, 1, 2, 3], [1, 0, 1])
    Q = pseudo_inverse(primitive(two))
    assert Q.mass == 2.0
    np.testing.assert_allclose(Q([0, 0.5, 1, 1.5, 2]), [0, 0.5, 2, 2.5, 3])
    assert Q(1.0, side="left") == 1.0
    assert Q.jumps == [(1.0, 1.0, 2.0)]

    Q = pseudo_inverse(primitive(PiecewiseConstantFn.indicator(0, 1, 2.0)))
    np.testing.assert_allclose(Q([0, 1, 2]), [0, 0.5, 1])


def test_pseudo_inverse_rejects_decreasing():
    with pytest.raises(ValueError):
        pseudo_inverse(PiecewiseLinearFn([0, 1, 2], [0, 1, 0.5]))


def test_quantile_rejects_out_of_range():
    Q = pseudo_inverse(primitive(PiecewiseConstantFn.indicator(0, 1)))
    with pytest.raises(ValueError):
        Q(1.5)


@given(step_functions(positive=True), st.floats(0.001, 0.999))
def test_quantile_inverts_primitive(u, s):
    a, b = u.support
    x = a + s * (b - a)
    if np.min(np.abs(u.breakpoints - x)) < 1e-9:
        return
    assert u.quantile(u.cdf(x)) == pytest.approx(x, abs=1e-9)


# -- projection ---------------------------------------------------------------------------------


def test_project_wedge():
    u = project_to_grid(WedgeSolution(0.0), 0.5)
    # cells are centred on multiples of dx, so the wedge touches three of them
    np.testing.assert_allclose(u.breakpoints, [-0.25, 0.25, 0.75, 1.25])
    np.testing.assert_allclose(u.values, [0.0625 / 0.5, 1.0, 0.4375 / 0.5])


class _ShiftedWedge:
    """2(x + 1/4) on [-1/4, 3/4): the wedge moved so grid cells align with [0, 1/2), [1/2, 1)."""

    support = (-0.25, 0.75)

    def cdf(self, x):
        y = np.clip(np.asarray(x, dtype=float) + 0.25, 0.0, 1.0)
        return y * y


def test_project_wedge_aligned_cell_averages():
    u = project_to_grid(_ShiftedWedge(), 0.5)
    np.testing.assert_allclose(u.values, [0.5, 1.5])
    np.testing.assert_allclose(u.breakpoints, [-0.25, 0.25, 0.75])


def test_projection_is_idempotent_on_cell_data():
    u = PiecewiseConstantFn.from_cells(-0.125, 0.25, [1.0, 3.0, 2.0])
    assert project_to_grid(u, 0.25).equals(u, atol=1e-15)


def test_projection_aligned_indicator():
    u = project_to_grid(PiecewiseConstantFn.indicator(-1 / 6, 5 / 6), 1 / 3)
    np.testing.assert_allclose(u.values, 1.0, rtol=1e-14)
    np.testing.assert_allclose(u.support, (-1 / 6, 5 / 6))


def test_projection_rejects_nonpositive_dx():
    with pytest.raises(ValueError):
        project_to_grid(PiecewiseConstantFn.indicator(0, 1), 0.0)


@pytest.mark.parametrize("k", range(3, 9))
def test_projection_preserves_mass_and_tv(k):
    u0 = WedgeSolution(0.0)
    u = project_to_grid(u0, 2.0**-k)
    assert u.mass == pytest.approx(1.0, rel=1e-13)
    assert total_variation(u) <= 4.0 + 1e-12  # TV of the wedge: up 2, down 2


@given(step_functions(), st.sampled_from([0.5, 0.25, 0.1]))
def test_projection_mass_random(u, dx):
    v = project_to_grid(u, dx)
    assert v.mass == pytest.approx(u.mass, rel=1e-13, abs=1e-13)
    assert total_variation(v) <= total_variation(u) + 1e-12


# -- L1 -------------------------------------------------------------------------------------------


def test_l1_examples():
    u = PiecewiseConstantFn.indicator(0, 1)
    assert l1_distance(u, u) == 0.0
    assert l1_distance(u, u.shift(0.25)) == pytest.approx(0.5)
    assert l1_distance(u, PiecewiseConstantFn.indicator(0, 1, 2.0)) == 1.0


@given(step_functions(), step_functions(), step_functions())
@settings(max_examples=60)
def test_l1_metric_axioms(u, v, w):
    assert l1_distance(u, u) == 0.0
    assert l1_distance(u, v) == pytest.approx(l1_distance(v, u), abs=1e-12)
    assert l1_distance(u, w) <= l1_distance(u, v) + l1_distance(v, w) + 1e-12


# -- algebra and serialisation -------------------------------------------------------------------------


def test_sum_and_difference():
    u = PiecewiseConstantFn([0, 2], [1])
    v = PiecewiseConstantFn([1, 3], [1])
    s = u + v
    np.testing.assert_array_equal(s.breakpoints, [0, 1, 2, 3])
    np.testing.assert_array_equal(s.values, [1, 2, 1])
    assert (s - v).equals(u)
    assert (u - u).is_zero


def test_restrict():
    u = PiecewiseConstantFn.from_cells(0, 1, [1, 2, 3])
    r = u.restrict(0.5, 2.5)
    np.testing.assert_array_equal(r.breakpoints, [0.5, 1, 2, 2.5])


def test_json_round_trip():
    u = PiecewiseConstantFn([0, 0.5, 2], [1.5, 0.25])
    d = json.loads(json.dumps(u.to_dict()))
    assert d["kind"] == "pc"
    assert from_json_dict(d).equals(u)
    U = primitive(u)
    V = from_json_dict(json.loads(json.dumps(U.to_dict())))
    np.testing.assert_array_equal(V.values, U.values)
