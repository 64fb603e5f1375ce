"""Curvature-dimension inequality checks, displacement convexity, density
bounds and evolution-variational-inequality checking.

Verdict semantics are deliberately one-sided: "violated" is only reported
when the witnessing enumeration was complete, so it is certificate-grade;
"consistent" means no violation was found in the enumerated family and is
evidence, not proof.  Reports carry margins rather than bare booleans so
borderline discretization artifacts stay visible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .entropy import (
    DistortionParams,
    EntropySpec,
    beta_of_distance,
    evaluate_entropy,
    power_test,
    renyi,
    shannon,
)
from .errors import EmptyChainSetError, PreconditionError
from .space import FiniteMetricMeasureSpace
from .transport import (
    DynamicalPlan,
    ProbMeasure,
    enumerate_optimal_plans,
    interpolate,
    plan_marginal,
    restrict_plan,
    slice_plan,
    w2,
)

TOL_NUM = 1e-9

#: power-test exponents used alongside the critical functional
CD_POWER_GRID = (1, 2, 4, 8, 16)


def cd_test_family(n_dim) -> tuple:
    """The finite functional family used by the CD checker.

    Failure on the family refutes the condition; success only supports it
    (the full dimensional class is infinite).
    """
    specs = [shannon() if n_dim == math.inf else renyi(n_dim)]
    specs.extend(power_test(p) for p in CD_POWER_GRID)
    return tuple(specs)


def beta_slack(params: DistortionParams, diam: float, eps_geo) -> float:
    """Inequality slack absorbing chain discretization error.

    Scales a numeric Lipschitz estimate of the distortion coefficient in
    the distance argument by the worst node displacement eps_geo * diam.
    """
    e = float(eps_geo)
    if e == 0:
        return 0.0
    if params.K == 0:
        return 2.0 * e  # entropy terms still move with the interpolant
    ds = np.linspace(0.0, diam, 33)
    worst = 0.0
    for t in (0.25, 0.5, 0.75):
        vals = [beta_of_distance(t, float(d), params) for d in ds]
        if any(math.isinf(v) for v in vals):
            return math.inf
        grads = np.abs(np.diff(vals)) / max(diam / 32, 1e-9)
        worst = max(worst, float(grads.max()))
    return 2.0 * e * (1.0 + worst * diam)


# ---------------------------------------------------------------------------
# the distorted right-hand side
# ---------------------------------------------------------------------------

def cd_rhs(spec: EntropySpec, params: DistortionParams, mu0: ProbMeasure,
           mu1: ProbMeasure, coupling, t, space: FiniteMetricMeasureSpace) -> float:
    """Distorted convex combination bounding the entropy at time t.

    Sums (1-t) * beta_{1-t}/rho0 * F(rho0/beta_{1-t}) and the symmetric
    t-term over the positive coupling cells; on those cells the endpoint
    densities are automatically positive.
    """
    tf = float(t)
    rho0 = mu0.density(space)
    rho1 = mu1.density(space)
    total = 0.0
    for i, j, sigma in coupling.cells:
        if sigma == 0:
            continue
        d = float(space.dist[i][j])
        s = float(sigma)
        b0 = beta_of_distance(1.0 - tf, d, params)
        b1 = beta_of_distance(tf, d, params)
        r0 = float(rho0[i])
        r1 = float(rho1[j])
        for tt, bb, rr in (((1.0 - tf), b0, r0), (tf, b1, r1)):
            if tt == 0.0:
                continue
            if math.isinf(bb):
                if spec.kind == "power":
                    # (rho/beta)^p * beta/rho -> 0 for p > 1, -> 1 for p = 1
                    total += tt * s * (1.0 if spec.param == 1 else 0.0)
                    continue
                # -(beta/rho)^(1/N) and log(rho/beta) both diverge downward
                return -math.inf
            total += tt * s * (bb / rr) * spec.F(rr / bb)
    return total


# ---------------------------------------------------------------------------
# strong displacement convexity
# ---------------------------------------------------------------------------

@dataclass
class ConvexityViolation:
    """Replayable witness: a verified geodesic plan, an interior grid time
    and the entropy/chord values with their positive defect."""

    plan: DynamicalPlan
    t: object
    spec: EntropySpec
    lhs: float
    rhs: float
    defect: float
    window: tuple = (0, None)   # grid window of the parent plan, if sliced

    def replay(self, space: FiniteMetricMeasureSpace) -> float:
        gap, _, _ = convexity_gap(space, self.plan, self.t, self.spec)
        return gap


def convexity_gap(space: FiniteMetricMeasureSpace, plan: DynamicalPlan,
                  t, spec: EntropySpec):
    """E(mu_t) minus the endpoint chord; positive values violate convexity."""
    e_t = evaluate_entropy(spec, interpolate(space, plan, t), space)
    e_0 = evaluate_entropy(spec, plan_marginal(space, plan, 0), space)
    e_1 = evaluate_entropy(spec, plan_marginal(space, plan, plan.k), space)
    tf = float(t)
    chord = (1.0 - tf) * e_0 + tf * e_1
    return e_t - chord, e_t, chord


@dataclass
class ConvexityCheck:
    consistent: bool
    violation: ConvexityViolation | None
    complete: bool
    plans_tested: int
    worst_defect: float
    tol: float


def check_strong_displacement_convexity(
        space: FiniteMetricMeasureSpace, spec: EntropySpec, mu0: ProbMeasure,
        mu1: ProbMeasure, k: int, eps_geo=None, cap: int = 10_000,
        tol: float = None, max_plans: int = 256) -> ConvexityCheck:
    """Search the enumerated plan family for a convexity violation.

    Every grid sub-window of every plan is tested (a restriction of a
    geodesic is a geodesic), so a dip-then-rise entropy profile whose
    endpoint chord looks fine is still caught.  The worst-margin violation
    is returned with a sliced, re-verified plan as witness.
    """
    if tol is None:
        tol = TOL_NUM + (2.0 * float(eps_geo) if eps_geo else 0.0)
    family, plans = enumerate_optimal_plans(space, mu0, mu1, k, eps_geo,
                                            cap=cap, max_plans=max_plans)
    worst = None
    worst_defect = -math.inf
    for plan in plans:
        energies = [evaluate_entropy(spec, plan_marginal(space, plan, j), space)
                    for j in range(plan.k + 1)]
        for s in range(plan.k + 1):
            for u in range(s + 2, plan.k + 1):
                e_s, e_u = energies[s], energies[u]
                for j in range(s + 1, u):
                    lam = (j - s) / (u - s)
                    chord = (1 - lam) * e_s + lam * e_u
                    defect = energies[j] - chord
                    if defect > worst_defect:
                        worst_defect = defect
                        worst = (plan, s, j, u)
    if worst is None or worst_defect <= tol:
        return ConvexityCheck(True, None, family.complete, len(plans),
                              worst_defect, tol)
    plan, s, j, u = worst
    sliced = slice_plan(space, plan, s, u)
    if not sliced.optimal:
        # the sub-window coupling failed its optimality recheck, so it is
        # not a geodesic witness; report the evidence as inconclusive
        return ConvexityCheck(True, None, False, len(plans), worst_defect, tol)
    t_rel = Fraction(j - s, u - s)
    gap, lhs, rhs = convexity_gap(space, sliced, t_rel, spec)
    violation = ConvexityViolation(sliced, t_rel, spec, lhs, rhs, gap, (s, u))
    return ConvexityCheck(False, violation, family.complete, len(plans),
                          worst_defect, tol)


# ---------------------------------------------------------------------------
# CD(K, N) checking
# ---------------------------------------------------------------------------

@dataclass
class CdSampleRecord:
    index: int
    liftable: bool
    passing_plan: int | None
    plans_tested: int
    worst_margin: float            # best plan's worst relative (RHS-LHS) margin
    complete: bool
    witness: tuple | None = None   # (plan, t, spec, lhs, rhs) when failing


@dataclass
class CdReport:
    params: DistortionParams
    family: tuple
    samples: list = field(default_factory=list)
    verdict: str = "consistent"
    witness: CdSampleRecord | None = None
    complete: bool = True
    tol: float = TOL_NUM

    def sample_verdicts(self):
        return [s.passing_plan is not None for s in self.samples]


def sample_measure_pairs(space: FiniteMetricMeasureSpace, count: int,
                         seed: int, support=None):
    """Seeded symmetric-Dirichlet density pairs, reproducible by seed.

    ``support`` restricts the atoms (useful to keep couplings liftable at
    a given chain resolution); densities are drawn with concentration 1
    and renormalized against the ambient weights.
    """
    rng = np.random.default_rng(seed)
    if support is None:
        support = list(range(space.n))
    support = sorted(support)
    pairs = []
    for _ in range(count):
        out = []
        for _ in range(2):
            x = rng.dirichlet(np.ones(len(support)))
            w = [0.0] * space.n
            for idx, v in zip(support, x):
                w[idx] = float(v)
            total = sum(w)
            out.append(ProbMeasure.create(tuple(v / total for v in w)))
        pairs.append(tuple(out))
    return pairs


def check_cd(space: FiniteMetricMeasureSpace, params: DistortionParams,
             sample_count: int = 20, k: int = 8, eps_geo=None, seed: int = 0,
             pairs=None, support=None, tol: float = None,
             max_plans: int = 64) -> CdReport:
    """Search for one plan per sampled pair satisfying the distorted
    convexity inequality for the whole test family at every grid time.

    A pair is consistent when some enumerated plan passes; the report
    verdict is "violated" only when a pair fails with complete
    enumeration.  Pairs whose couplings cannot be lifted at this
    resolution are flagged, not crashed on.
    """
    family_specs = cd_test_family(params.N)
    if tol is None:
        tol = TOL_NUM + beta_slack(params, float(space.diam), eps_geo or 0)
    if pairs is None:
        pairs = sample_measure_pairs(space, sample_count, seed, support)
    report = CdReport(params, family_specs, tol=tol)
    for idx, (mu0, mu1) in enumerate(pairs):
        try:
            fam, plans = enumerate_optimal_plans(space, mu0, mu1, k, eps_geo,
                                                 max_plans=max_plans)
        except EmptyChainSetError:
            report.samples.append(
                CdSampleRecord(idx, False, None, 0, -math.inf, False))
            report.complete = False
            continue
        best_margin = -math.inf
        passing = None
        fail_witness = None
        for p_idx, plan in enumerate(plans):
            agg = plan.endpoint_coupling_cells()
            coupling = _AggCoupling(agg)
            margin = math.inf
            worst_tuple = None
            for j in range(plan.k + 1):
                t = Fraction(j, plan.k)
                mu_t = interpolate(space, plan, t)
                for spec in family_specs:
                    lhs = evaluate_entropy(spec, mu_t, space)
                    rhs = cd_rhs(spec, params, mu0, mu1, coupling, t, space)
                    # margins are relative: the power family reaches huge
                    # magnitudes where absolute float noise is meaningless
                    scale = max(1.0, abs(lhs), abs(rhs) if not math.isinf(rhs)
                                else abs(lhs))
                    m = -math.inf if math.isinf(rhs) and rhs < 0 \
                        else (rhs - lhs) / scale
                    if m < margin:
                        margin = m
                        worst_tuple = (p_idx, t, spec, lhs, rhs)
            if margin > best_margin:
                best_margin = margin
                fail_witness = worst_tuple
            if margin >= -tol:
                passing = p_idx
                break
        rec = CdSampleRecord(idx, True, passing, len(plans), best_margin,
                             fam.complete,
                             None if passing is not None else fail_witness)
        report.samples.append(rec)
        if passing is None:
            if fam.complete:
                report.verdict = "violated"
                if report.witness is None:
                    report.witness = rec
            else:
                report.complete = False
    return report


class _AggCoupling:
    """Light coupling view over aggregated plan cells for cd_rhs."""

    def __init__(self, cells):
        self.cells = cells


# ---------------------------------------------------------------------------
# density bounds
# ---------------------------------------------------------------------------

@dataclass
class DensityReport:
    bound: float
    sup_by_time: list
    worst_ratio: float
    passed: bool
    detail: dict = field(default_factory=dict)


def _density_profile(space, plan):
    out = []
    for j in range(plan.k + 1):
        mu = plan_marginal(space, plan, j)
        rho = [float(w) / float(m) for w, m in zip(mu.weights, space.weights)]
        out.append(rho)
    return out


def check_density_bound_cd(space: FiniteMetricMeasureSpace, plan: DynamicalPlan,
                           c, params: DistortionParams, D,
                           tol_factor: float = 1e-9) -> DensityReport:
    """Interpolant densities stay below c divided by the distortion infimum.

    The bound reads exp(|K| D^2 / 6) c at N = inf and
    exp(sqrt((N-1)|K|) D) c below infinity; at K = 0 it is exactly c.
    """
    from .entropy import beta_lower_bound
    cf = float(c)
    profile = _density_profile(space, plan)
    for rho, which in ((profile[0], "first"), (profile[-1], "second")):
        peak = max(rho)
        if peak > cf * (1 + 1e-9):
            raise PreconditionError(
                f"{which} endpoint density {peak} exceeds the stated bound {cf}")
    bound = cf / beta_lower_bound(params, float(D))
    sups = [max(rho) for rho in profile]
    worst = max(sups) / bound
    return DensityReport(bound, sups, worst, worst <= 1 + tol_factor)


def check_density_bound_strong(space: FiniteMetricMeasureSpace,
                               plan: DynamicalPlan, c,
                               tol_factor: float = 1e-9) -> DensityReport:
    """Sharp flat-curvature bound sup rho_t <= c, plus an independent
    rederivation through plan restriction.

    At the worst (time, level) the plan is restricted to chains passing
    through the high-density set; the restricted entropy is bracketed
    below by the concentration term and above by the endpoint chord, and
    the bracket implies the bound.  Both routes are reported.
    """
    cf = float(c)
    profile = _density_profile(space, plan)
    for rho, which in ((profile[0], "first"), (profile[-1], "second")):
        if max(rho) > cf * (1 + 1e-9):
            raise PreconditionError(
                f"{which} endpoint density {max(rho)} exceeds {cf}")
    sups = [max(rho) for rho in profile]
    worst = max(sups) / cf
    detail = {}
    peak = max(sups)
    interior = [j for j in range(1, plan.k)
                if sups[j] >= peak * (1 - 1e-12)]
    j_star = interior[len(interior) // 2] if interior \
        else max(range(len(sups)), key=lambda j: sups[j])
    if 0 < j_star < plan.k:
        a = sups[j_star] * (1 - 1e-12)
        rho_star = profile[j_star]
        level = {i for i, r in enumerate(rho_star) if r >= a}
        sub = restrict_plan(space, plan,
                            lambda ch: ch.nodes[j_star] in level)
        wmass = sum(w for ch, w in zip(plan.chains, plan.weights)
                    if ch.nodes[j_star] in level)
        wf = float(wmass)
        t = Fraction(j_star, plan.k)
        e_mid = evaluate_entropy(shannon(), interpolate(space, sub, t), space)
        e0 = evaluate_entropy(shannon(), plan_marginal(space, sub, 0), space)
        e1 = evaluate_entropy(shannon(), plan_marginal(space, sub, sub.k), space)
        chord = (1 - float(t)) * e0 + float(t) * e1
        mass_a = float(space.mass_of(level))
        jensen = math.log(1.0 / mass_a)
        detail = {
            "time_index": j_star,
            "level": a,
            "restricted_mass": wf,
            "jensen_lower": jensen,
            "restricted_entropy": e_mid,
            "chord_upper": chord,
            "log_bound": math.log(cf / wf),
            "concentration_ok": jensen >= math.log(a / wf) - 1e-9,
            "bracket_ok": (jensen <= e_mid + 1e-9
                           and e_mid <= chord + 1e-9
                           and chord <= math.log(cf / wf) + 1e-9),
            # the level the restriction argument certifies on this instance;
            # chain wobble can make it lag the direct measurement
            "implied_level_bound": wf * math.exp(min(chord, math.log(cf / wf))),
            "restriction_optimal": sub.optimal,
        }
    return DensityReport(cf, sups, worst, worst <= 1 + tol_factor, detail)


# ---------------------------------------------------------------------------
# evolution variational inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowTrajectory:
    """Sampled flow: strictly increasing times with a measure at each."""

    samples: tuple

    @staticmethod
    def create(samples) -> "FlowTrajectory":
        ss = tuple((float(t), mu) for t, mu in samples)
        if len(ss) < 2:
            raise ValueError("a flow needs at least two samples")
        if any(t1 <= t0 for (t0, _), (t1, _) in zip(ss, ss[1:])):
            raise ValueError("flow times must be strictly increasing")
        if any(t < 0 for t, _ in ss):
            raise ValueError("flow times must be nonnegative")
        return FlowTrajectory(ss)


@dataclass
class EviStepRecord:
    t: float
    h: float
    lhs: float
    rhs: float
    residual: float


@dataclass
class EviReport:
    steps: list
    passed: bool
    worst_residual: float


def evi_check(space: FiniteMetricMeasureSpace, flow: FlowTrajectory,
              nu: ProbMeasure, spec: EntropySpec,
              tol: float = TOL_NUM) -> EviReport:
    """Forward-difference check of the evolution variational inequality.

    For each consecutive sample pair the squared-distance difference
    quotient must not exceed the entropy gap to the test measure.
    """
    if spec.kind not in ("renyi", "shannon"):
        raise PreconditionError("the flow inequality is for critical entropies")
    e_nu = evaluate_entropy(spec, nu, space)
    steps = []
    worst = -math.inf
    for (t0, m0), (t1, m1) in zip(flow.samples, flow.samples[1:]):
        h = t1 - t0
        d0, _ = w2(space, nu, m0)
        d1, _ = w2(space, nu, m1)
        lhs = (d1 * d1 - d0 * d0) / (2 * h)
        rhs = e_nu - evaluate_entropy(spec, m0, space)
        residual = lhs - rhs
        worst = max(worst, residual)
        steps.append(EviStepRecord(t0, h, lhs, rhs, residual))
    return EviReport(steps, worst <= tol, worst)
