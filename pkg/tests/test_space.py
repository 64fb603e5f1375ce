from fractions import Fraction

import hypothesis.strategies as st
import pytest
from hypothesis import given

from cdkn import (
    FiniteMetricMeasureSpace,
    ball,
    default_radius_sweep,
    diameter,
    doubling_constant,
    generate_example,
    validate_metric,
)


def three_point_equilateral():
    return FiniteMetricMeasureSpace.create(
        ("a", "b", "c"),
        ((0, 1, 1), (1, 0, 1), (1, 1, 0)),
        (1, 1, 1))


def test_equilateral_triangle_is_a_metric():
    assert validate_metric(three_point_equilateral()).ok


def test_triangle_violation_is_reported_with_the_offending_triple():
    space = FiniteMetricMeasureSpace.create(
        ("a", "b", "c"),
        ((0, 1, 5), (1, 0, 1), (5, 1, 0)),
        (1, 1, 1))
    report = validate_metric(space)
    assert not report.ok
    triples = {v.indices for v in report.violations if v.kind == "triangle"}
    assert (0, 1, 2) in triples


def test_graph_closure_of_four_cycle_is_a_metric():
    # shortest-path closure of a connected graph always passes, exactly
    from cdkn.generators import _shortest_path_closure
    edges = [(0, 1, Fraction(1)), (1, 2, Fraction(1)),
             (2, 3, Fraction(1)), (3, 0, Fraction(1))]
    dist = _shortest_path_closure(4, edges)
    space = FiniteMetricMeasureSpace.create("abcd", dist, (1, 1, 1, 1))
    assert validate_metric(space).ok
    assert space.dist[0][2] == 2  # opposite corners


def test_ball_membership_on_segment():
    seg = generate_example("segment", n=5)  # {0, 1/4, 1/2, 3/4, 1}
    b = ball(seg, 2, 0.3)
    assert b.members == {1, 2, 3}


def test_ball_radius_beyond_diameter_contains_everything():
    seg = generate_example("segment", n=5)
    assert ball(seg, 0, 2).members == set(range(5))


def test_ball_is_open_at_exact_radius():
    seg = generate_example("segment", n=5)
    b = ball(seg, 2, Fraction(1, 4))  # radius = smallest positive distance
    assert b.members == {2}


@given(st.integers(0, 4), st.floats(0.05, 0.9), st.floats(1.0, 3.0))
def test_ball_monotonicity(center, r, factor):
    seg = generate_example("segment", n=5)
    small = ball(seg, center, r)
    big = ball(seg, center, r * factor)
    assert small.members <= big.members


def test_diameter_examples(segment65):
    assert diameter(segment65, {3}) == 0
    assert diameter(segment65, {0, 64}) == 1
    assert diameter(segment65) == 1
    two = FiniteMetricMeasureSpace.create("ab", ((0, 3), (3, 0)), (1, 1))
    assert diameter(two, {0, 1}) == 3


def test_doubling_single_point_mass():
    one = FiniteMetricMeasureSpace.create(("x",), ((0,),), (2,))
    # a single point has no radii in (0, diam); the ratio is always 1
    assert doubling_constant(one, [0.5]) == 1.0


def test_doubling_segment_window(segment65):
    value = doubling_constant(segment65, default_radius_sweep(segment65))
    assert 1 <= value <= 2 + 8 / 65


def test_doubling_grid_window(grid17):
    value = doubling_constant(grid17, default_radius_sweep(grid17))
    assert value <= 4 * (1 + 8 / 17)


def test_doubling_at_least_one(segment65):
    assert doubling_constant(segment65, [0.3]) >= 1.0


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        FiniteMetricMeasureSpace.create("ab", ((0, 1), (1, 0)), (1, 0))
