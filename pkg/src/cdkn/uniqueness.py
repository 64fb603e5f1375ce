"""Geodesic multiplicity measurement and branching-driven convexity
violations.

Multiplicity is resolution-relative: two chains count as distinct only
when they separate by more than ``delta_sep`` at some grid time, which
filters discretization ghosts (chains through adjacent grid points that
approximate the same continuum geodesic).  Counting uses greedy
representative clustering in enumeration order, so the reported
multiplicity is the size of a deterministic pairwise-distinct family.

The violation search turns the branching argument into a certificate
machine: find targets with two distinct chains to the base that agree on
an initial grid interval and separate later, pin a time window obeying the
dimensional interval condition, gather the separated chains into two
plans, pool them, and evaluate the convexity chain numerically.  A
returned witness is a verified geodesic plan whose entropy exceeds its
chord with positive defect; measure-theoretic selections of the continuum
argument are replaced by exhaustive scans that prefer maximal-mass target
sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .cd_verify import ConvexityViolation, convexity_gap
from .entropy import EntropySpec, evaluate_entropy
from .errors import EmptyChainSetError, GridTooCoarseError, PreconditionError
from .space import FiniteMetricMeasureSpace
from .transport import ProbMeasure, interpolate, make_plan, slice_plan
from .geodesics import distinct, enumerate_chains

TOL_NUM = 1e-9


def default_delta_sep(space: FiniteMetricMeasureSpace, k: int):
    return 2 * space.diam / k


def cluster_chains(space, chains, delta_sep):
    """Greedy representatives: a chain founds a new cluster iff it is
    distinct from every representative so far."""
    reps = []
    for c in chains:
        if all(distinct(space, c, r, delta_sep) for r in reps):
            reps.append(c)
    return reps


@dataclass
class MultiplicityReport:
    base: int
    k: int
    eps_geo: object
    delta_sep: object
    counts: dict
    truncated: set
    multi_fraction: float

    @property
    def exhaustive(self) -> bool:
        return not self.truncated


def multiplicity_report(space: FiniteMetricMeasureSpace, x: int, k: int,
                        eps_geo=None, delta_sep=None,
                        cap: int = 10_000) -> MultiplicityReport:
    """Distinct-chain count from the base to every point; the fraction is
    the measure of points with two or more distinct chains."""
    if delta_sep is None:
        delta_sep = default_delta_sep(space, k)
    counts = {}
    truncated = set()
    for y in range(space.n):
        try:
            cs = enumerate_chains(space, x, y, k, eps_geo, cap=cap)
        except EmptyChainSetError:
            counts[y] = 0
            continue
        if cs.truncated:
            truncated.add(y)
        counts[y] = len(cluster_chains(space, cs.chains, delta_sep))
    multi_mass = sum(space.weights[y] for y, c in counts.items() if c >= 2)
    frac = float(multi_mass) / float(space.total_mass)
    return MultiplicityReport(x, k, eps_geo, delta_sep, counts, truncated, frac)


# ---------------------------------------------------------------------------
# interval condition
# ---------------------------------------------------------------------------

def interval_condition(t1, t2, n_dim: float) -> bool:
    """Time-window restriction max{t2/t1, (1-t1)/(1-t2)} <= 2^(1/(2N))."""
    t1f, t2f = float(t1), float(t2)
    if not (0 < t1f <= t2f < 1):
        raise ValueError("need 0 < t1 <= t2 < 1")
    bound = 2.0 ** (1.0 / (2.0 * n_dim))
    return max(t2f / t1f, (1.0 - t1f) / (1.0 - t2f)) <= bound


def valid_grid_windows(k: int, n_dim: float):
    """All strict grid pairs (j1, j2), j1 < j2, passing the condition."""
    out = []
    for j1 in range(1, k):
        for j2 in range(j1 + 1, k):
            if interval_condition(Fraction(j1, k), Fraction(j2, k), n_dim):
                out.append((j1, j2))
    return out


def min_resolution_for_windows(n_dim: float, k_max: int = 4096) -> int:
    for k in range(2, k_max):
        if valid_grid_windows(k, n_dim):
            return k
    return k_max


# ---------------------------------------------------------------------------
# branch violation search
# ---------------------------------------------------------------------------

@dataclass
class BranchSearchState:
    base: int
    targets: list                       # A: multi-geodesic target indices
    t1: object = None
    t2: object = None
    delta: float = None
    witness_point: int = None
    E: list = field(default_factory=list)
    pairs: dict = field(default_factory=dict)   # y -> (chain, alt chain)
    plan_in: object = None              # chains hitting the witness ball
    plan_out: object = None
    quantities: dict = field(default_factory=dict)


@dataclass
class BranchSearchResult:
    kind: str                           # "violation" | "none_found"
    reason: str = ""
    violation: ConvexityViolation | None = None
    state: BranchSearchState | None = None


def _renyi_mass_integral(space, mu: ProbMeasure, n_dim: float) -> float:
    """integral rho^(1 - 1/N) dm, the positive part of the entropy."""
    total = 0.0
    for w, m in zip(mu.weights, space.weights):
        if w > 0:
            total += (float(w) / float(m)) ** (1.0 - 1.0 / n_dim) * float(m)
    return total


def branch_violation_search(space: FiniteMetricMeasureSpace, x: int,
                            spec: EntropySpec, k: int, eps_geo=None,
                            delta_sep=None, mass_floor=None,
                            cap: int = 10_000,
                            tol: float = TOL_NUM) -> BranchSearchResult:
    """Search for a displacement-convexity violation caused by branching.

    Proceeds through the documented filtration: multi-geodesic targets,
    agree-then-separate chain pairs per valid time window, separation
    level delta (half the maximal separation at the window end), witness
    ball selection maximizing target mass, pooled half/half plans, and the
    final numeric inequality chain.  Rejects the Shannon functional: the
    pooled-support accounting needs the dimensional entropy.
    """
    if spec.kind != "renyi":
        raise PreconditionError(
            "branch search needs a dimensional (Renyi) entropy; the "
            "argument does not extend to the Shannon functional")
    n_dim = spec.param
    if delta_sep is None:
        delta_sep = default_delta_sep(space, k)
    if mass_floor is None:
        mass_floor = min(space.weights)

    windows = valid_grid_windows(k, n_dim)
    if not windows:
        raise GridTooCoarseError(k, n_dim, min_resolution_for_windows(n_dim))

    # stage 1: multi-geodesic targets, chains oriented target -> base
    reps_by_target = {}
    for y in range(space.n):
        if y == x:
            continue
        try:
            cs = enumerate_chains(space, y, x, k, eps_geo, cap=cap)
        except EmptyChainSetError:
            continue
        reps = cluster_chains(space, cs.chains, delta_sep)
        if len(reps) >= 2:
            reps_by_target[y] = reps
    state = BranchSearchState(x, sorted(reps_by_target))
    if not reps_by_target:
        return BranchSearchResult("none_found", "no_branching", state=state)

    for j1, j2 in windows:
        # stage 2: pairs that agree through j1 and differ within (j1, j2]
        window_pairs = {}
        for y, reps in reps_by_target.items():
            found = []
            for ca, cb in combinations(reps, 2):
                if any(ca.nodes[j] != cb.nodes[j] for j in range(j1 + 1)):
                    continue
                if all(ca.nodes[j] == cb.nodes[j] for j in range(j1 + 1, j2 + 1)):
                    continue
                found.append((ca, cb))
            if found:
                window_pairs[y] = found
        if not window_pairs:
            continue

        # stage 3: separation level from the window end
        sep_max = 0.0
        for y, prs in window_pairs.items():
            for ca, cb in prs:
                sep_max = max(sep_max,
                              float(space.dist[ca.nodes[j2]][cb.nodes[j2]]))
        if sep_max <= 0:
            continue
        delta = sep_max / 2.0

        # stage 4: witness ball maximizing the captured target mass
        best_w, best_mass, best_sel = None, 0, None
        for w in range(space.n):
            sel = {}
            for y, prs in window_pairs.items():
                for ca, cb in prs:
                    da = float(space.dist[ca.nodes[j2]][w])
                    db = float(space.dist[cb.nodes[j2]][w])
                    if float(space.dist[ca.nodes[j2]][cb.nodes[j2]]) <= delta:
                        continue
                    if da < delta / 2 and db >= delta / 2:
                        sel[y] = (ca, cb)
                        break
                    if db < delta / 2 and da >= delta / 2:
                        sel[y] = (cb, ca)
                        break
            mass = sum(space.weights[y] for y in sel)
            if mass > best_mass:
                best_w, best_mass, best_sel = w, mass, sel
        if best_sel is None or float(best_mass) < float(mass_floor):
            continue

        for trial_sel in _candidate_selections(space, best_sel, best_mass,
                                               mass_floor):
            result = _evaluate_window(space, x, n_dim, spec, trial_sel,
                                      j1, j2, k, delta, best_w, state, tol)
            if result is not None:
                return result

    return BranchSearchResult("none_found", "no_violation_found", state=state)


def _candidate_selections(space, sel, mass, floor):
    """Full selection first; the single heaviest target as fallback when
    the pooled window plan fails its geodesic recheck."""
    yield sel
    if len(sel) > 1:
        heaviest = max(sel, key=lambda y: (space.weights[y], -y))
        yield {heaviest: sel[heaviest]}


def _evaluate_window(space, x, n_dim, spec, sel, j1, j2, k, delta, w_point,
                     state, tol):
    mass_e = sum(space.weights[y] for y in sel)
    chains_in = []
    chains_out = []
    weights = []
    for y in sorted(sel):
        ca, cb = sel[y]
        chains_in.append(ca)
        chains_out.append(cb)
        weights.append(space.weights[y] / mass_e)
    plan_in = make_plan(space, chains_in, weights, verify=False)
    plan_out = make_plan(space, chains_out, weights, verify=False)

    t1 = Fraction(j1, k)
    t2 = Fraction(j2, k)
    mu1_t1 = interpolate(space, plan_in, t1)
    mu2_t1 = interpolate(space, plan_out, t1)
    if mu1_t1.weights != mu2_t1.weights:
        agree_gap = max(abs(float(a) - float(b)) for a, b in
                        zip(mu1_t1.weights, mu2_t1.weights))
        if agree_gap > 1e-12:
            return None
    mu1_t2 = interpolate(space, plan_in, t2)
    mu2_t2 = interpolate(space, plan_out, t2)
    overlap = sum(space.weights[i] for i in
                  set(mu1_t2.support) & set(mu2_t2.support))
    if overlap != 0:
        return None

    r1_t1 = _renyi_mass_integral(space, mu1_t1, n_dim)
    r2_t1 = _renyi_mass_integral(space, mu2_t1, n_dim)
    r1_t2 = _renyi_mass_integral(space, mu1_t2, n_dim)
    r2_t2 = _renyi_mass_integral(space, mu2_t2, n_dim)

    pooled_chains = list(plan_in.chains) + list(plan_out.chains)
    pooled_weights = [w / 2 for w in plan_in.weights] + \
                     [w / 2 for w in plan_out.weights]
    pooled = make_plan(space, pooled_chains, pooled_weights, verify=False)
    pooled_t1 = interpolate(space, pooled, t1)
    pooled_t2 = interpolate(space, pooled, t2)
    r_pool_t1 = _renyi_mass_integral(space, pooled_t1, n_dim)
    r_pool_t2 = _renyi_mass_integral(space, pooled_t2, n_dim)

    lam = float(t1) / float(t2)
    m_e = float(mass_e) ** (1.0 / n_dim)
    halving = 2.0 ** (1.0 / n_dim - 1.0) * (r1_t2 + r2_t2)
    chord = (1.0 - lam) * m_e + lam * r_pool_t2
    defect = chord - r_pool_t1
    time_factor = lam * 2.0 ** (1.0 / n_dim) * \
        (1.0 - float(t2)) / (1.0 - float(t1))
    branch_ratios = []
    for ra, rb in ((r1_t1, r1_t2), (r2_t1, r2_t2)):
        branch_ratios.append(rb - (1.0 - float(t2)) / (1.0 - float(t1)) * ra)

    state.t1, state.t2, state.delta = t1, t2, delta
    state.witness_point = w_point
    state.E = sorted(sel)
    state.pairs = dict(sel)
    state.plan_in, state.plan_out = plan_in, plan_out
    state.quantities = {
        "mass_E": float(mass_e),
        "uniform_start_integral": m_e,
        "r1_t1": r1_t1, "r2_t1": r2_t1,
        "r1_t2": r1_t2, "r2_t2": r2_t2,
        "pooled_t1": r_pool_t1, "pooled_t2": r_pool_t2,
        "halving_identity": halving,
        "chord": chord,
        "defect": defect,
        "time_factor": time_factor,
        "branch_convexity_margins": branch_ratios,
    }
    if defect <= tol:
        return None

    window_plan = slice_plan(space, pooled, 0, j2)
    if not window_plan.optimal:
        return None
    t_rel = Fraction(j1, j2)
    gap, lhs, rhs = convexity_gap(space, window_plan, t_rel, spec)
    if gap <= tol:
        return None
    violation = ConvexityViolation(window_plan, t_rel, spec, lhs, rhs, gap,
                                   (0, j2))
    return BranchSearchResult("violation", "", violation, state)
