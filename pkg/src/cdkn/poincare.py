"""Upper gradients, median splits and local Poincare certificates.

A weak certificate executes the transport proof as computation: split the
ball at the median of u into equal-mass halves, transport one half to the
other along an optimal plan, bound the interpolant densities, and chain
the resulting inequalities into the oscillation bound.  Every intermediate
inequality is evaluated and recorded, not just the end-to-end ratio.

A strong certificate (dilation 1) replaces the single transport by a
three-piece curve through the ball center: half-way from each half toward
the center point, bridged in the middle.  Chains to the center stay inside
the ball, which is what buys the undilated inequality.

Fractional point splitting stands in for the atomless level-set split: a
point may carry submass in both halves, and all transport and density
bookkeeping treats submasses as first class.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cd_verify import DensityReport, check_density_bound_cd
from .entropy import DistortionParams, beta_lower_bound
from .errors import InsideBallViolationError, NotAnUpperGradientError, PreconditionError
from .geodesics import enumerate_chains
from .space import Ball, FiniteMetricMeasureSpace, ball as make_ball
from .transport import (
    DynamicalPlan,
    ProbMeasure,
    optimal_dynamical_plan,
    plan_marginal,
    slice_plan,
)

TOL_NUM = 1e-9


# ---------------------------------------------------------------------------
# upper gradients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UpperGradient:
    """Nonnegative field g certified against chains at one resolution."""

    g: tuple
    k: int
    eps_geo: object
    exhaustive: bool


def trapezoid_chain_integral(g, chain) -> float:
    """Discrete line integral (1/k) sum of trapezoid node averages."""
    nodes = chain.nodes
    k = chain.k
    total = 0.0
    for a, b in zip(nodes, nodes[1:]):
        total += 0.5 * (float(g[a]) + float(g[b]))
    return total / k


DEFAULT_VERIFY_PAIR_CAP = 600


def verify_upper_gradient(space: FiniteMetricMeasureSpace, u, g, k: int,
                          eps_geo=None, tol: float = None,
                          chain_cap: int = 64,
                          pair_cap: int = DEFAULT_VERIFY_PAIR_CAP):
    """Check |u(p_0) - u(p_k)| <= span * chain integral of g on all chains.

    Exhaustive over endpoint pairs when they fit under ``pair_cap``;
    otherwise a deterministic stride subsample is used and the exhaustive
    flag is cleared.  Pairs with no admissible chain contribute nothing.
    Returns ``(ok, worst_chain, worst_margin, exhaustive)`` where margin
    is lhs - rhs (positive means failure).
    """
    n = space.n
    if tol is None:
        gmax = max(float(x) for x in g) if len(g) else 0.0
        tol = TOL_NUM + 2.0 * float(eps_geo or 0) * float(space.diam) * gmax
    pairs = [(x, y) for x in range(n) for y in range(x + 1, n)]
    exhaustive = True
    if pair_cap is not None and len(pairs) > pair_cap:
        stride = len(pairs) // pair_cap + 1
        pairs = pairs[::stride]
        exhaustive = False
    worst_chain = None
    worst_margin = -math.inf
    from .errors import EmptyChainSetError
    for x, y in pairs:
        try:
            cs = enumerate_chains(space, x, y, k, eps_geo, cap=chain_cap)
        except EmptyChainSetError:
            continue
        if cs.truncated:
            exhaustive = False
        du = abs(float(u[x]) - float(u[y]))
        for chain in cs.chains:
            rhs = float(chain.span) * trapezoid_chain_integral(g, chain)
            margin = du - rhs
            if margin > worst_margin:
                worst_margin = margin
                worst_chain = chain
    return worst_margin <= tol, worst_chain, worst_margin, exhaustive


def slope_gradient(space: FiniteMetricMeasureSpace, u, neighbor_radius,
                   k: int = 8, eps_geo=None, tol: float = None) -> UpperGradient:
    """Canonical discrete gradient: max difference quotient over neighbors
    within the radius, then certified against chains.

    Raises NotAnUpperGradientError with the violating chain when the
    certification fails at the requested resolution.
    """
    if not neighbor_radius > 0:
        raise ValueError("neighbor radius must be positive")
    n = space.n
    g = []
    for p in range(n):
        row = space.dist[p]
        best = 0.0
        for q in range(n):
            if q == p:
                continue
            d = float(row[q])
            if d <= float(neighbor_radius):
                slope = abs(float(u[p]) - float(u[q])) / d
                if slope > best:
                    best = slope
        g.append(best)
    ok, chain, margin, exhaustive = verify_upper_gradient(
        space, u, g, k, eps_geo, tol=tol)
    if not ok:
        rhs = float(chain.span) * trapezoid_chain_integral(g, chain)
        raise NotAnUpperGradientError(chain, rhs + margin, rhs)
    return UpperGradient(tuple(g), k, eps_geo, exhaustive)


# ---------------------------------------------------------------------------
# median split
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MedianSplit:
    """Equal-mass halves of a ball separated by the median of u.

    ``minus`` and ``plus`` map point index to submass; a median-level atom
    may carry weight in both maps.  Masses agree exactly when the ambient
    weights are rational.
    """

    ball: Ball
    median: float
    minus: dict
    plus: dict
    mass_minus: object
    mass_plus: object


def median_split(space: FiniteMetricMeasureSpace, u, ball_: Ball) -> MedianSplit:
    """Split a ball at the median level of u, fractionally if an atom
    straddles the half mass."""
    members = sorted(ball_.members)
    if not members:
        raise PreconditionError("cannot split an empty ball")
    mass = ball_.mass
    half = mass / 2 if not isinstance(mass, int) else Fraction(mass, 2)
    values = sorted({float(u[i]) for i in members})
    median = None
    for a in values:
        above = sum(space.weights[i] for i in members if float(u[i]) > a)
        if above <= half:
            median = a
            break
    lower = {i: space.weights[i] for i in members if float(u[i]) < median}
    level = [i for i in members if float(u[i]) == median]
    upper = {i: space.weights[i] for i in members if float(u[i]) > median}
    level_mass = sum(space.weights[i] for i in level)
    need = half - sum(lower.values())
    frac = need / level_mass if level_mass else 0
    minus = dict(lower)
    plus = dict(upper)
    for i in level:
        lo = space.weights[i] * frac
        hi = space.weights[i] - lo
        if lo:
            minus[i] = lo
        if hi:
            plus[i] = hi
    return MedianSplit(ball_, median, minus, plus,
                       sum(minus.values()), sum(plus.values()))


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

@dataclass
class StepRecord:
    name: str
    lhs: float
    rhs: float
    ok: bool


@dataclass
class PoincareCertificate:
    ball: Ball
    lam: int
    measured_ratio: float
    theoretical_constant: float
    passed: bool
    provenance: str
    steps: list = field(default_factory=list)
    density: object = None
    chain_intact: bool = True
    flags: dict = field(default_factory=dict)

    def record(self, name, lhs, rhs, tol=TOL_NUM):
        ok = lhs <= rhs + tol
        self.steps.append(StepRecord(name, lhs, rhs, ok))
        if not ok:
            self.chain_intact = False
        return ok


def _ball_oscillation(space, u, ball_):
    members = sorted(ball_.members)
    mass = float(ball_.mass)
    avg = sum(float(u[i]) * float(space.weights[i]) for i in members) / mass
    lhs = sum(abs(float(u[i]) - avg) * float(space.weights[i]) for i in members)
    return avg, lhs


def _grad_mass(space, g, members):
    return sum(float(g[i]) * float(space.weights[i]) for i in members)


def theoretical_weak_constant(params: DistortionParams, r: float) -> float:
    """Constant of the invoked inequality: 4 e^{|K| r^2} at N = inf
    (integral form), 2^{N+2} e^{2 r sqrt((N-1)|K|)} below (average form)."""
    if params.K > 0:
        raise PreconditionError("weak certificates are stated for K <= 0")
    if params.N == math.inf:
        return 4.0 * math.exp(abs(params.K) * r * r)
    return 2.0 ** (params.N + 2) * math.exp(
        2.0 * r * math.sqrt((params.N - 1) * abs(params.K)))


def certify_weak_poincare(space: FiniteMetricMeasureSpace, ball_: Ball,
                          params: DistortionParams, u, grad: UpperGradient,
                          k: int = None, eps_geo=None,
                          tol_factor: float = 0.10) -> PoincareCertificate:
    """Run the median-split transport pipeline and certify the dilated
    oscillation inequality, asserting every intermediate step."""
    if k is None:
        k = grad.k
    if eps_geo is None:
        eps_geo = grad.eps_geo
    g = grad.g
    r = float(ball_.radius)
    cert = PoincareCertificate(
        ball_, 2, 0.0, theoretical_weak_constant(params, r), False,
        "median-split transport, dilation 2")

    split = median_split(space, u, ball_)
    mu_plus = ProbMeasure.restriction(space, split.plus)
    mu_minus = ProbMeasure.restriction(space, split.minus)
    mass_b = float(ball_.mass)
    c_density = 2.0 / mass_b
    for mu, name in ((mu_plus, "upper-half"), (mu_minus, "lower-half")):
        peak = max(float(w) / float(m)
                   for w, m in zip(mu.weights, space.weights) if w > 0)
        cert.record(f"density of {name} restriction <= 2/m(B)", peak, c_density)

    plan = optimal_dynamical_plan(space, mu_plus, mu_minus, k, eps_geo,
                                  chain_select="spread")
    support = {i for c in plan.chains for i in (c.nodes[0], c.nodes[-1])}
    D = max(space.dist[i][j] for i in support for j in support) if len(support) > 1 else 0
    cert.density = check_density_bound_cd(space, plan, c_density, params,
                                          float(D), tol_factor)
    cert.flags["density_passed"] = cert.density.passed

    avg, lhs1 = _ball_oscillation(space, u, ball_)
    members = sorted(ball_.members)
    double_int = sum(
        abs(float(u[i]) - float(u[j])) * float(space.weights[i]) *
        float(space.weights[j]) for i in members for j in members) / mass_b
    two_med = 2.0 * sum(abs(float(u[i]) - split.median) * float(space.weights[i])
                        for i in members)
    cert.record("oscillation <= averaged pair difference", lhs1, double_int)
    cert.record("pair difference <= twice median deviation", double_int, two_med)

    sep_worst = 0.0
    for c in plan.chains:
        x0, x1 = c.nodes[0], c.nodes[-1]
        du = abs(float(u[x0]) - float(u[x1]))
        two_sided = abs(float(u[x0]) - split.median) + abs(split.median - float(u[x1]))
        sep_worst = max(sep_worst, abs(du - two_sided))
    cert.record("median separation equality (worst chain)", sep_worst, 0.0)

    transport_term = mass_b * sum(
        float(w) * abs(float(u[c.nodes[0]]) - float(u[c.nodes[-1]]))
        for c, w in zip(plan.chains, plan.weights))
    cert.record("twice median deviation = transported difference",
                abs(two_med - transport_term), 0.0,
                tol=TOL_NUM * max(1.0, two_med))

    gmax = max(float(x) for x in g) if g else 0.0
    chain_tol = TOL_NUM + 2.0 * float(eps_geo or 0) * float(space.diam) * gmax
    grad_term = 0.0
    span_worst = 0.0
    ug_worst = -math.inf
    for c, w in zip(plan.chains, plan.weights):
        du = abs(float(u[c.nodes[0]]) - float(u[c.nodes[-1]]))
        integral = trapezoid_chain_integral(g, c)
        ug_worst = max(ug_worst, du - float(c.span) * integral)
        span_worst = max(span_worst, float(c.span))
        grad_term += float(w) * integral
    cert.record("upper-gradient step (worst chain)", ug_worst, 0.0, tol=chain_tol)
    cert.record("chain spans stay below the dilated diameter", span_worst, 2 * r)
    cert.record("transported difference <= 2r * plan gradient integral",
                transport_term, mass_b * 2 * r * grad_term, tol=chain_tol * mass_b)

    # Fubini: plan gradient integral equals the trapezoid time average of
    # the gradient mass against the interpolant densities
    time_w = [1.0] * (plan.k + 1)
    time_w[0] = time_w[-1] = 0.5
    swap = 0.0
    big_ball = make_ball(space, ball_.center, 2 * ball_.radius)
    leaks = 0
    for j in range(plan.k + 1):
        mu_t = plan_marginal(space, plan, j)
        s = sum(float(w) * float(g[i]) for i, w in enumerate(mu_t.weights) if w > 0)
        swap += time_w[j] * s
        leaks += sum(1 for i, w in enumerate(mu_t.weights)
                     if w > 0 and i not in big_ball.members)
    swap /= plan.k
    cert.record("time-integral swap identity", abs(grad_term - swap), 0.0,
                tol=TOL_NUM * max(1.0, grad_term))
    cert.flags["support_leaks"] = leaks
    if leaks:
        cert.chain_intact = False

    sup_rho = max(cert.density.sup_by_time)
    grad_region = big_ball.members if not leaks else frozenset(range(space.n))
    grad_mass_2r = _grad_mass(space, g, big_ball.members)
    cert.record("density step: plan gradient integral <= sup rho * grad mass",
                grad_term, sup_rho * _grad_mass(space, g, grad_region),
                tol=TOL_NUM * max(1.0, grad_term))

    if params.N == math.inf:
        denom = r * grad_mass_2r
        measured = lhs1 / denom if denom > 0 else 0.0
    else:
        mass_2r = float(big_ball.mass)
        denom = r * grad_mass_2r / mass_2r
        measured = (lhs1 / mass_b) / denom if denom > 0 else 0.0
    cert.measured_ratio = measured
    cert.passed = measured <= cert.theoretical_constant * (1 + tol_factor)
    return cert


def certify_strong_poincare(space: FiniteMetricMeasureSpace, ball_: Ball,
                            n_dim: float, u, grad: UpperGradient,
                            k: int = 2, eps_geo=None,
                            tol_factor: float = 0.10) -> PoincareCertificate:
    """Three-piece curve through the center: undilated certificate.

    Each half travels half-way toward the center point, the half-time
    measures are bridged, and the piecewise densities are checked against
    2^{N+1}/m(B).  All chains must stay inside the ball.
    """
    if k % 2:
        raise ValueError("strong certificates need an even chain resolution")
    if eps_geo is None:
        eps_geo = grad.eps_geo
    g = grad.g
    r = float(ball_.radius)
    center = ball_.center
    const = 2.0 ** (n_dim + 2)
    cert = PoincareCertificate(ball_, 1, 0.0, const, False,
                               "three-piece curve through the center")

    split = median_split(space, u, ball_)
    mu_plus = ProbMeasure.restriction(space, split.plus)
    mu_minus = ProbMeasure.restriction(space, split.minus)
    delta_c = ProbMeasure.dirac(space, center)
    mass_b = float(ball_.mass)
    piece_bound = 2.0 ** (n_dim + 1) / mass_b

    plan_up = optimal_dynamical_plan(space, mu_plus, delta_c, k, eps_geo,
                                     chain_select="spread")
    plan_dn = optimal_dynamical_plan(space, mu_minus, delta_c, k, eps_geo,
                                     chain_select="spread")
    half_up = slice_plan(space, plan_up, 0, k // 2)
    half_dn = slice_plan(space, plan_dn, 0, k // 2)
    nu_up = plan_marginal(space, half_up, half_up.k)
    nu_dn = plan_marginal(space, half_dn, half_dn.k)
    bridge = optimal_dynamical_plan(space, nu_up, nu_dn, k, eps_geo,
                                    chain_select="spread")

    pieces = (("upper half-way", half_up), ("bridge", bridge),
              ("lower half-way", half_dn))
    sup_rho = 0.0
    for name, piece in pieces:
        for c in piece.chains:
            for node in c.nodes:
                if node not in ball_.members:
                    raise InsideBallViolationError(
                        c, node, space.dist[ball_.center][node], ball_.radius)
        sups = []
        for j in range(piece.k + 1):
            mu_t = plan_marginal(space, piece, j)
            sups.append(max(float(w) / float(m)
                            for w, m in zip(mu_t.weights, space.weights) if w > 0))
        sup_rho = max(sup_rho, max(sups))
        cert.record(f"piece density bound ({name})", max(sups),
                    piece_bound * (1 + tol_factor))
    cert.density = DensityReport(piece_bound, [], sup_rho / piece_bound,
                                 sup_rho <= piece_bound * (1 + tol_factor))
    cert.flags["density_passed"] = cert.density.passed

    # composite curve lengths: half + bridge + half, each piece dominated
    # by twice the radius times its time share
    lam_max = {"upper half-way": 0.25, "bridge": 0.5, "lower half-way": 0.25}
    length_worst = 0.0
    for name, piece in pieces:
        span_max = max(float(c.span) for c in piece.chains)
        cert.record(f"piece length share ({name})", span_max,
                    2 * r * lam_max[name] * (1 + float(eps_geo or 0)))
        length_worst += span_max
    cert.record("composite curve length <= 2r", length_worst,
                2 * r * (1 + float(eps_geo or 0)))

    avg, lhs1 = _ball_oscillation(space, u, ball_)
    members = sorted(ball_.members)
    double_int = sum(
        abs(float(u[i]) - float(u[j])) * float(space.weights[i]) *
        float(space.weights[j]) for i in members for j in members) / mass_b
    two_med = 2.0 * sum(abs(float(u[i]) - split.median) * float(space.weights[i])
                        for i in members)
    cert.record("oscillation <= averaged pair difference", lhs1, double_int)
    cert.record("pair difference <= twice median deviation", double_int, two_med)

    # endpoint difference decomposes along the composite; each piece is
    # bounded by its span times its chain gradient integral
    gmax = max(float(x) for x in g) if g else 0.0
    chain_tol = TOL_NUM + 2.0 * float(eps_geo or 0) * float(space.diam) * gmax
    piece_terms = {}
    for name, piece in pieces:
        term = 0.0
        ug_worst = -math.inf
        for c, w in zip(piece.chains, piece.weights):
            du = abs(float(u[c.nodes[0]]) - float(u[c.nodes[-1]]))
            integral = trapezoid_chain_integral(g, c)
            ug_worst = max(ug_worst, du - float(c.span) * integral)
            term += float(w) * float(c.span) * integral
        cert.record(f"upper-gradient step ({name})", ug_worst, 0.0, tol=chain_tol)
        piece_terms[name] = term

    transported = mass_b * (
        sum(float(w) * abs(float(u[c.nodes[0]]) - split.median)
            for c, w in zip(half_up.chains, half_up.weights)) +
        sum(float(w) * abs(float(u[c.nodes[0]]) - split.median)
            for c, w in zip(half_dn.chains, half_dn.weights)))
    cert.record("twice median deviation = transported difference",
                abs(two_med - transported), 0.0, tol=TOL_NUM * max(1.0, two_med))

    total_piece = sum(piece_terms.values())
    cert.record("transported difference <= plan span-gradient sum",
                transported, mass_b * total_piece + chain_tol * mass_b)

    grad_mass_b = _grad_mass(space, g, ball_.members)
    time_integral = 0.0
    for name, piece in pieces:
        time_w = [1.0] * (piece.k + 1)
        time_w[0] = time_w[-1] = 0.5
        s = 0.0
        for j in range(piece.k + 1):
            mu_t = plan_marginal(space, piece, j)
            s += time_w[j] * sum(float(w) * float(g[i])
                                 for i, w in enumerate(mu_t.weights) if w > 0)
        time_integral += lam_max[name] * (s / piece.k)
    cert.record("span-gradient sum <= 2r * composite time integral",
                total_piece,
                2 * r * (1 + float(eps_geo or 0)) * time_integral + chain_tol)
    cert.record("composite time integral <= sup rho * ball gradient mass",
                time_integral, sup_rho * grad_mass_b + TOL_NUM)

    denom = r * grad_mass_b / mass_b
    measured = (lhs1 / mass_b) / denom if denom > 0 else 0.0
    cert.measured_ratio = measured
    cert.passed = (measured <= const * (1 + tol_factor)
                   and cert.flags["density_passed"])
    return cert


# ---------------------------------------------------------------------------
# function suites and sweeps
# ---------------------------------------------------------------------------

def lipschitz_project(space: FiniteMetricMeasureSpace, values):
    """Largest 1-Lipschitz function below the given values (inf-convolution
    with the distance)."""
    vals = [float(v) for v in values]
    return [min(vals[q] + float(space.dist[p][q]) for q in range(space.n))
            for p in range(space.n)]


def default_function_suite(space: FiniteMetricMeasureSpace, seed: int = 0,
                           random_fields: int = 2):
    """Distance functions, seeded random Lipschitz fields and smoothed
    steps; the standard battery for certificate sweeps."""
    rng = np.random.default_rng(seed)
    suite = []
    base_pts = [0, space.n // 2, space.n - 1]
    for b in base_pts[:2]:
        suite.append((f"dist_to_{b}", [float(space.dist[b][q])
                                       for q in range(space.n)]))
    diam = float(space.diam)
    for i in range(random_fields):
        raw = rng.uniform(0.0, diam, size=space.n)
        suite.append((f"random_lipschitz_{i}", lipschitz_project(space, raw)))
    a, b = 0.25 * diam, 0.5 * diam
    step = [min(1.0, max(0.0, (float(space.dist[0][q]) - a) / (b - a)))
            for q in range(space.n)]
    suite.append(("smoothed_step", step))
    return suite


def poincare_sweep(space: FiniteMetricMeasureSpace, params: DistortionParams,
                   ball_specs, function_suite, k: int = 8, eps_geo=None,
                   tol_factor: float = 0.10, neighbor_radius=None):
    """Run weak certificates over balls x functions; returns all
    certificates (worst ratio per ball is a max over the suite)."""
    certs = []
    if neighbor_radius is None:
        neighbor_radius = min(float(space.dist[i][j])
                              for i in range(space.n)
                              for j in range(space.n) if i != j) * 1.5
    for name, u in function_suite:
        grad = slope_gradient(space, u, neighbor_radius, k, eps_geo)
        for center, radius in ball_specs:
            b = make_ball(space, center, radius)
            cert = certify_weak_poincare(space, b, params, u, grad, k,
                                         eps_geo, tol_factor)
            cert.flags["function"] = name
            certs.append(cert)
    return certs
