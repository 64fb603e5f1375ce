import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from cdkn import (
    ProbMeasure,
    branch_violation_search,
    evaluate_entropy,
    generate_example,
    interpolate,
    interval_condition,
    multiplicity_report,
    optimal_dynamical_plan,
    renyi,
    shannon,
)
from cdkn.errors import GridTooCoarseError, PreconditionError
from cdkn.uniqueness import min_resolution_for_windows, valid_grid_windows


def test_interval_condition_examples():
    assert interval_condition(0.3, 0.3, 1)
    assert interval_condition(0.5, 0.5, 7)
    assert not interval_condition(0.5, 0.7, 1)   # max = 5/3 > sqrt(2)
    assert interval_condition(0.5, 0.6, 1)       # max = 1.25 <= sqrt(2)
    with pytest.raises(ValueError):
        interval_condition(0.0, 0.5, 1)
    with pytest.raises(ValueError):
        interval_condition(0.5, 1.0, 1)


def test_grid_windows_need_enough_resolution():
    assert valid_grid_windows(2, 1) == []
    assert valid_grid_windows(16, 1)
    k_min = min_resolution_for_windows(1)
    assert valid_grid_windows(k_min, 1)
    assert not valid_grid_windows(k_min - 1, 1)


def test_multiplicity_zero_on_segment_every_base(segment65):
    for x in range(0, 65, 16):
        rep = multiplicity_report(segment65, x, 16, 0)
        assert rep.multi_fraction == 0.0
        assert rep.exhaustive


def test_multiplicity_circle_antipode_only(circle32):
    rep = multiplicity_report(circle32, 0, 16, 0)
    assert rep.multi_fraction == pytest.approx(1 / 32)
    assert rep.counts[16] == 2
    assert rep.exhaustive


def test_multiplicity_theta_beyond_far_junction(theta16):
    rep = multiplicity_report(theta16, 0, 16, 0)
    assert rep.multi_fraction > 0
    multi = {theta16.points[y] for y, c in rep.counts.items() if c >= 2}
    assert multi == {"j2", "z"}


def test_multiplicity_tripod_unique(tripod8):
    for x in (0, 1, 8, 20):
        rep = multiplicity_report(tripod8, x, 16, 0)
        assert rep.multi_fraction == 0.0
        assert max(rep.counts.values()) <= 1
        assert rep.exhaustive


def test_multiplicity_time_symmetry(theta16):
    k = 16
    rep0 = multiplicity_report(theta16, 0, k, 0)
    for y in range(theta16.n):
        rep_y = multiplicity_report(theta16, y, k, 0)
        assert rep0.counts[y] == rep_y.counts[0]


def test_branch_search_rejects_shannon(theta16):
    with pytest.raises(PreconditionError):
        branch_violation_search(theta16, 0, shannon(), 16, 0)


def test_branch_search_grid_too_coarse(theta16):
    with pytest.raises(GridTooCoarseError) as err:
        branch_violation_search(theta16, 0, renyi(1), 2, 0)
    assert err.value.k_min > 2


def test_branch_search_none_found_on_segment(segment65):
    res = branch_violation_search(segment65, 0, renyi(1), 16, 0)
    assert res.kind == "none_found"
    assert res.reason == "no_branching"


def test_branch_search_none_found_on_tripod(tripod8):
    res = branch_violation_search(tripod8, 0, renyi(1), 16, 0)
    assert res.kind == "none_found"


def test_branch_search_violation_on_theta(theta16):
    res = branch_violation_search(theta16, 0, renyi(1), 16, 0)
    assert res.kind == "violation"
    v = res.violation
    assert v.defect > 0
    # the witness replays through the convexity evaluator exactly
    assert abs(v.replay(theta16) - v.defect) < 1e-9
    st_ = res.state
    assert st_.t1 < st_.t2
    assert interval_condition(st_.t1, st_.t2, 1)
    assert st_.quantities["defect"] > 0
    assert st_.quantities["time_factor"] >= 1
    # mid-time supports of the two plans are disjoint
    t2 = st_.t2
    s1 = set(interpolate(theta16, st_.plan_in, t2).support)
    s2 = set(interpolate(theta16, st_.plan_out, t2).support)
    assert not (s1 & s2)


def test_branch_witness_chains_agree_before_split(theta16):
    res = branch_violation_search(theta16, 0, renyi(1), 16, 0)
    st_ = res.state
    j1 = int(st_.t1 * 16)
    for y, (ca, cb) in st_.pairs.items():
        assert ca.nodes[:j1 + 1] == cb.nodes[:j1 + 1]
        assert ca.nodes != cb.nodes


@settings(max_examples=10)
@given(st.integers(1, 7))
def test_initial_mass_spread_inequality(step):
    # along a plan toward a point mass the support shrinks no faster than
    # the dimensional power of the remaining time
    theta = generate_example("theta", k=8)
    seg_targets = [theta.index_of("z"), theta.index_of("j2")]
    mu0 = ProbMeasure.restriction(theta, seg_targets)
    nu = ProbMeasure.dirac(theta, 0)
    plan = optimal_dynamical_plan(theta, mu0, nu, 8, 0)
    n_dim = 1
    s = Fraction(step, 8)
    mass0 = float(theta.mass_of(mu0.support))
    mu_s = interpolate(theta, plan, s)
    mass_s = float(theta.mass_of(mu_s.support))
    assert mass_s >= (1 - float(s)) ** n_dim * mass0 - 1e-12


def test_violation_matches_renyi_support_arithmetic(theta16):
    # with N = 1 the entropy is minus the support mass, so the defect is a
    # pure support count: pooled support doubles after the split
    res = branch_violation_search(theta16, 0, renyi(1), 16, 0)
    q = res.state.quantities
    assert q["pooled_t2"] == pytest.approx(2 * q["r1_t2"])
    assert q["halving_identity"] == pytest.approx(q["pooled_t2"])
