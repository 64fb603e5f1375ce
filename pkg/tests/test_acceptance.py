"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line with its measured quantity and
wall time, and asserts both the stated tolerance and the stated runtime
budget.  Instance parameters (chain resolution, tolerance, ball ladders,
sampling supports) are pinned here; sampling is seeded and reproducible.

Alignment note: sampled-measure criteria place atoms on the coarse
sub-grid (every 16th point of segment(65)), so every coupling cell lifts
to exact chains at eps_geo = 0 and margins carry no discretization noise.
"""
import math
import time
from fractions import Fraction

import numpy as np
import pytest

import cdkn
from cdkn import (
    DistortionParams,
    FlowTrajectory,
    ProbMeasure,
    branch_violation_search,
    check_cd,
    check_density_bound_strong,
    default_function_suite,
    default_radius_sweep,
    doubling_constant,
    enumerate_optimal_plans,
    evaluate_entropy,
    evi_check,
    generate_example,
    interpolate,
    median_split,
    multiplicity_report,
    optimal_dynamical_plan,
    plan_marginal,
    poincare_sweep,
    renyi,
    sample_measure_pairs,
    shannon,
    slope_gradient,
    w2,
    w2_brute_force,
)
from cdkn.entropy import beta_lower_bound, beta_of_distance
from cdkn.poincare import certify_strong_poincare
from cdkn.space import ball as make_ball

SUPPORT5 = [0, 16, 32, 48, 64]
EPS2 = Fraction(1, 2)


def report(criterion, passed, detail, elapsed, budget):
    status = "PASS" if passed else "FAIL"
    print(f"[{status}] criterion {criterion}: {detail} "
          f"({elapsed:.2f}s <= {budget:.0f}s)")
    assert passed, f"criterion {criterion}: {detail}"
    assert elapsed <= budget, f"criterion {criterion} over budget: {elapsed}"


@pytest.fixture(scope="module")
def segment():
    return generate_example("segment", n=65)


@pytest.fixture(scope="module")
def grid():
    return generate_example("grid2d", m=17)


@pytest.fixture(scope="module")
def theta():
    return generate_example("theta", arm_length=1,
                            arm_separation=Fraction(1, 2), k=16)


@pytest.fixture(scope="module")
def tripod():
    return generate_example("tripod", arm_length=1, k=8)


def test_criterion_01_transport_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 5))
        m = rng.uniform(0.5, 1.0, size=(n, n))
        m = (m + m.T) / 2
        np.fill_diagonal(m, 0.0)
        space = cdkn.FiniteMetricMeasureSpace.create(
            tuple(f"q{i}" for i in range(n)),
            tuple(tuple(float(x) for x in row) for row in m),
            tuple(float(x) for x in rng.uniform(0.2, 1.0, size=n)))
        mu = ProbMeasure.create(tuple(float(v) for v in rng.dirichlet(np.ones(n))))
        nu = ProbMeasure.create(tuple(float(v) for v in rng.dirichlet(np.ones(n))))
        d, _ = w2(space, mu, nu)
        worst = max(worst, abs(d - w2_brute_force(space, mu, nu)))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-9,
           f"200 instances, worst |w2 - oracle| = {worst:.2e} <= 1e-9",
           elapsed, 10)


def test_criterion_02_entropy_convexity_on_model_space(segment):
    t0 = time.perf_counter()
    specs = [shannon(), renyi(1), renyi(2), renyi(4)]
    pairs = sample_measure_pairs(segment, 50, seed=42, support=SUPPORT5)
    worst = -math.inf
    plans_seen = 0
    for mu0, mu1 in pairs:
        _, plans = enumerate_optimal_plans(segment, mu0, mu1, 16, 0)
        plans_seen += len(plans)
        for spec in specs:
            e0 = evaluate_entropy(spec, mu0, segment)
            e1 = evaluate_entropy(spec, mu1, segment)
            for plan in plans:
                for j in range(plan.k + 1):
                    t = j / plan.k
                    e_t = evaluate_entropy(
                        spec, plan_marginal(segment, plan, j), segment)
                    worst = max(worst, e_t - ((1 - t) * e0 + t * e1))
    elapsed = time.perf_counter() - t0
    report(2, worst <= 0.05,
           f"50 pairs, {plans_seen} plans, worst convexity defect "
           f"{worst:.2e} <= 0.05", elapsed, 300)


def clipped_ball_ladder():
    """20 even-count balls: half-widths 8..17 clipped at both segment
    ends, so the median split needs no fractional atom and every
    transport span equals the half-width."""
    specs = []
    for h in range(8, 18):
        specs.append((h - 1, Fraction(2 * h - (h - 1), 1) / 64
                      - Fraction(1, 128)))
        specs.append((64 - (h - 1), Fraction(2 * h - (h - 1), 1) / 64
                      - Fraction(1, 128)))
    return specs


def test_criterion_03_sharp_density_bound(segment):
    t0 = time.perf_counter()
    u = [float(segment.dist[0][q]) for q in range(segment.n)]
    worst = 0.0
    checked = 0
    for center, radius in clipped_ball_ladder():
        b = make_ball(segment, center, radius)
        assert len(b.members) % 2 == 0
        split = median_split(segment, u, b)
        mu_p = ProbMeasure.restriction(segment, split.plus)
        mu_m = ProbMeasure.restriction(segment, split.minus)
        plan = optimal_dynamical_plan(segment, mu_p, mu_m, 8,
                                      Fraction(3, 16), chain_select="spread")
        rep = check_density_bound_strong(segment, plan, 2 / b.mass,
                                         tol_factor=0.10)
        worst = max(worst, rep.worst_ratio)
        checked += 1
        assert rep.passed
    elapsed = time.perf_counter() - t0
    report(3, checked == 20 and worst <= 1.10,
           f"20 median-split plans, worst sup rho_t / (2/m(B)) = "
           f"{worst:.4f} <= 1.10", elapsed, 120)


def test_criterion_04_weak_poincare_constants(segment, grid):
    t0 = time.perf_counter()
    suite_seg = default_function_suite(segment, seed=0, random_fields=1)
    balls_seg = [(32, Fraction(1, 4)), (20, Fraction(3, 16)),
                 (44, Fraction(3, 16)), (32, Fraction(5, 16))]
    certs = poincare_sweep(segment, DistortionParams(0.0, 1), balls_seg,
                           suite_seg, k=2, eps_geo=EPS2)
    worst_seg = max(c.measured_ratio for c in certs)
    ok_seg = worst_seg <= 8 * 1.10 and all(c.lam == 2 for c in certs)

    suite_grid = default_function_suite(grid, seed=0, random_fields=1)
    center = grid.index_of("p8_8")
    balls_grid = [(center, Fraction(1, 4)), (center, Fraction(3, 16)),
                  (grid.index_of("p6_10"), Fraction(3, 16))]
    certs_g = poincare_sweep(grid, DistortionParams(0.0, 2), balls_grid,
                             suite_grid, k=2, eps_geo=EPS2)
    worst_grid = max(c.measured_ratio for c in certs_g)
    ok_grid = worst_grid <= 16 * 1.10
    elapsed = time.perf_counter() - t0
    report(4, ok_seg and ok_grid,
           f"worst ratios: segment {worst_seg:.3f} <= 8.8, "
           f"grid {worst_grid:.3f} <= 17.6 (lambda = 2)", elapsed, 600)


def test_criterion_05_strong_poincare_three_piece(segment, grid):
    t0 = time.perf_counter()
    u_seg = [float(segment.dist[0][q]) for q in range(segment.n)]
    grad_seg = slope_gradient(segment, u_seg, 1.5 / 64, k=2, eps_geo=EPS2)
    results = []
    for radius in (Fraction(8, 64), Fraction(12, 64), Fraction(16, 64),
                   Fraction(20, 64), Fraction(24, 64)):
        b = make_ball(segment, 32, radius)
        cert = certify_strong_poincare(segment, b, 1, u_seg, grad_seg,
                                       k=2, eps_geo=EPS2, tol_factor=0.10)
        results.append(cert)

    u_grid = []
    for i in range(17):
        u_grid.extend([i / 16] * 17)
    grad_grid = slope_gradient(grid, u_grid, 1.5 / 16, k=2, eps_geo=EPS2)
    grid_balls = [(grid.index_of("p8_8"), Fraction(1, 8)),
                  (grid.index_of("p8_8"), Fraction(5, 32)),
                  (grid.index_of("p8_8"), Fraction(7, 32)),
                  (grid.index_of("p8_8"), Fraction(9, 32)),
                  (grid.index_of("p7_8"), Fraction(9, 32))]
    for center, radius in grid_balls:
        b = make_ball(grid, center, radius)
        cert = certify_strong_poincare(grid, b, 2, u_grid, grad_grid,
                                       k=2, eps_geo=EPS2, tol_factor=0.10)
        results.append(cert)
    ok = all(c.passed and c.lam == 1 for c in results)
    worst_density = max(c.density.worst_ratio for c in results)
    worst_ratio = max(c.measured_ratio / c.theoretical_constant
                      for c in results)
    elapsed = time.perf_counter() - t0
    report(5, ok and len(results) == 10,
           f"10 balls, worst ratio/constant {worst_ratio:.3f} <= 1.10, "
           f"worst piece density ratio {worst_density:.3f} <= 1.10",
           elapsed, 600)


def test_criterion_06_bishop_gromov_doubling(segment, grid):
    t0 = time.perf_counter()
    v_seg = doubling_constant(segment, default_radius_sweep(segment))
    v_grid = doubling_constant(grid, default_radius_sweep(grid))
    ok = (v_seg <= 2 * (1 + 8 / 65)) and (v_grid <= 4 * (1 + 8 / 17))
    elapsed = time.perf_counter() - t0
    report(6, ok,
           f"doubling segment {v_seg:.4f} <= {2 * (1 + 8 / 65):.4f}, "
           f"grid {v_grid:.4f} <= {4 * (1 + 8 / 17):.4f}", elapsed, 60)


def test_criterion_07_beta_soundness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = math.inf
    for _ in range(10_000):
        K = -float(rng.uniform(0, 5))
        N = float(rng.choice([1.0, 1.3, 2.0, 3.0, 8.0, 64.0, math.inf]))
        D = float(rng.uniform(0.05, 4.0))
        t = float(rng.uniform(0, 1))
        d = float(rng.uniform(0, D))
        params = DistortionParams(K, N)
        worst = min(worst, beta_of_distance(t, d, params)
                    - beta_lower_bound(params, D))
    flat_ok = all(
        beta_of_distance(t, d, DistortionParams(0.0, N)) == 1.0
        for t in (0.0, 0.3, 1.0) for d in (0.1, 2.0) for N in (1, 2, 9))
    elapsed = time.perf_counter() - t0
    report(7, worst >= -1e-12 and flat_ok,
           f"10^4 samples, worst beta - bound = {worst:.2e} >= -1e-12; "
           f"flat branch exactly 1", elapsed, 5)


def test_criterion_08_branching_certificate(theta, segment, tripod):
    t0 = time.perf_counter()
    res = branch_violation_search(theta, theta.index_of("j1"), renyi(1),
                                  16, 0)
    ok = res.kind == "violation" and res.violation.defect > 0
    replay_gap = abs(res.violation.replay(theta) - res.violation.defect)
    ok &= replay_gap <= 1e-9
    ok &= branch_violation_search(segment, 0, renyi(1), 16, 0).kind == "none_found"
    ok &= branch_violation_search(tripod, 0, renyi(1), 16, 0).kind == "none_found"
    elapsed = time.perf_counter() - t0
    report(8, ok,
           f"theta defect {res.violation.defect:.4f} > 0, replay gap "
           f"{replay_gap:.1e} <= 1e-9; segment and tripod none_found",
           elapsed, 300)


def test_criterion_09_uniqueness_fractions(segment, tripod, theta):
    t0 = time.perf_counter()
    ok = True
    for x in range(segment.n):
        rep = multiplicity_report(segment, x, 16, 0)
        ok &= rep.multi_fraction == 0.0 and rep.exhaustive
    for x in range(tripod.n):
        rep = multiplicity_report(tripod, x, 16, 0)
        ok &= rep.multi_fraction == 0.0 and rep.exhaustive
    circle = generate_example("circle", n=32)
    rep_c = multiplicity_report(circle, 0, 16, 0)
    ok &= abs(rep_c.multi_fraction - 1 / 32) < 1e-15 and rep_c.exhaustive
    antipode_only = all(c < 2 for y, c in rep_c.counts.items() if y != 16)
    ok &= antipode_only and rep_c.counts[16] == 2
    rep_t = multiplicity_report(theta, theta.index_of("j1"), 16, 0)
    ok &= rep_t.multi_fraction > 0 and rep_t.exhaustive
    elapsed = time.perf_counter() - t0
    report(9, ok,
           f"fractions: segment 0, tripod 0, circle {rep_c.multi_fraction:.4f}"
           f" = 1/32 (antipode), theta {rep_t.multi_fraction:.4f} > 0; "
           "exhaustive, cap uncrossed", elapsed, 300)


def test_criterion_10_evi_checker():
    t0 = time.perf_counter()
    two = cdkn.FiniteMetricMeasureSpace.create(
        ("a", "b"), ((0, 1), (1, 0)), (Fraction(1, 2), Fraction(1, 2)))
    uni = ProbMeasure.uniform(two)
    flow_uni = FlowTrajectory.create([(0.0, uni), (0.5, uni), (1.0, uni)])
    rng = np.random.default_rng(10)
    ok = True
    for _ in range(10):
        x = rng.dirichlet((1.0, 1.0))
        nu = ProbMeasure.create((float(x[0]), float(x[1])))
        ok &= evi_check(two, flow_uni, nu, shannon()).passed
    bad = ProbMeasure.create((1, 0))
    flow_bad = FlowTrajectory.create([(0.0, bad), (1.0, bad)])
    rep = evi_check(two, flow_bad, uni, shannon())
    residual_gap = abs(rep.worst_residual - math.log(2))
    ok &= (not rep.passed) and residual_gap <= 1e-9
    elapsed = time.perf_counter() - t0
    report(10, ok,
           f"uniform flow passes 10 test measures; non-minimizer flagged "
           f"with residual log 2 (gap {residual_gap:.1e})", elapsed, 5)


def test_criterion_11_cd_monotonicity(segment):
    t0 = time.perf_counter()
    kwargs = dict(sample_count=12, k=16, eps_geo=0, seed=77,
                  support=SUPPORT5)
    base = check_cd(segment, DistortionParams(0.0, 2), **kwargs)
    lower_k = check_cd(segment, DistortionParams(-1.0, 2), **kwargs)
    higher_n = check_cd(segment, DistortionParams(0.0, 3), **kwargs)
    ok = base.verdict == "consistent"
    for a, b in zip(base.sample_verdicts(), lower_k.sample_verdicts()):
        ok &= (not a) or b
    for a, b in zip(base.sample_verdicts(), higher_n.sample_verdicts()):
        ok &= (not a) or b
    ok &= lower_k.verdict == "consistent" and higher_n.verdict == "consistent"
    elapsed = time.perf_counter() - t0
    report(11, ok,
           "consistent at (0,2) implies consistent at (-1,2) and (0,3) "
           "on the same 12 seeded samples", elapsed, 300)
