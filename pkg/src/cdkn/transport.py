"""Exact quadratic-cost optimal transport and dynamical plans over chains.

The solver is a transportation simplex that runs in exact rational
arithmetic whenever the space and the measures are rational, and in floats
otherwise.  The returned coupling is the lexicographically smallest vertex
of the optimal face (row-major order), computed by a greedy pass of
max-flow feasibility problems over the zero-reduced-cost cells; this makes
every downstream selection reproducible.

``w2_brute_force`` is an independent oracle: it enumerates every basic
feasible solution of the coupling polytope (spanning trees of the
bipartite support graph) and takes the minimum.  It shares no code path
with the simplex.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import (
    EmptyChainSetError,
    SizeLimitError,
    SolverFailureError,
    ZeroMassRestrictionError,
)
from .geodesics import (
    DEFAULT_CHAIN_CAP,
    ChainSet,
    GeodesicChain,
    enumerate_chains,
    subchain,
)
from .space import FiniteMetricMeasureSpace, is_exact_number

#: feasibility tolerance for float marginals
MARGINAL_TOL = 1e-10

#: absolute weight-sum tolerance for probability measures
PROB_TOL = 1e-12


# ---------------------------------------------------------------------------
# measures and couplings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbMeasure:
    """Probability measure as a weight per point; always absolutely
    continuous because the ambient weights are strictly positive."""

    weights: tuple

    @staticmethod
    def create(weights) -> "ProbMeasure":
        w = tuple(weights)
        if any(x < 0 for x in w):
            raise ValueError("probability weights must be nonnegative")
        total = sum(w)
        if abs(float(total) - 1.0) > PROB_TOL:
            raise ValueError(f"weights sum to {float(total)}, not 1")
        return ProbMeasure(w)

    @staticmethod
    def uniform(space: FiniteMetricMeasureSpace) -> "ProbMeasure":
        t = space.total_mass
        return ProbMeasure(tuple(w / t for w in space.weights))

    @staticmethod
    def dirac(space: FiniteMetricMeasureSpace, i: int) -> "ProbMeasure":
        w = [0] * space.n
        w[i] = 1
        return ProbMeasure(tuple(w))

    @staticmethod
    def restriction(space: FiniteMetricMeasureSpace, part) -> "ProbMeasure":
        """Normalized restriction of the ambient measure.

        ``part`` is either an index collection or a map index -> submass
        (submasses support fractional atom splits)."""
        if isinstance(part, dict):
            sub = dict(part)
        else:
            sub = {i: space.weights[i] for i in part}
        total = sum(sub.values())
        if not total > 0:
            raise ZeroMassRestrictionError("restriction has zero mass")
        w = [0] * space.n
        for i, v in sub.items():
            w[i] = v / total
        return ProbMeasure(tuple(w))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def support(self):
        return tuple(i for i, w in enumerate(self.weights) if w > 0)

    def density(self, space: FiniteMetricMeasureSpace):
        return tuple(w / m for w, m in zip(self.weights, space.weights))

    def is_exact(self) -> bool:
        return all(is_exact_number(w) for w in self.weights)


@dataclass(frozen=True)
class Coupling:
    """Sparse joint measure with prescribed marginals."""

    cells: tuple          # ((i, j, weight), ...) sorted by (i, j)
    mu: ProbMeasure
    nu: ProbMeasure
    cost2: object         # transport cost sum sigma * d^2 (exact when inputs are)

    def as_dict(self):
        return {(i, j): w for i, j, w in self.cells}

    def marginal_defect(self) -> float:
        n = self.mu.n
        row = [0.0] * n
        col = [0.0] * n
        for i, j, w in self.cells:
            row[i] += float(w)
            col[j] += float(w)
        worst = 0.0
        for i in range(n):
            worst = max(worst, abs(row[i] - float(self.mu.weights[i])),
                        abs(col[i] - float(self.nu.weights[i])))
        return worst


def _support(mu: ProbMeasure):
    return [i for i, w in enumerate(mu.weights) if w > 0]


def coupling_cost2(space: FiniteMetricMeasureSpace, cells):
    return sum(w * space.dist[i][j] ** 2 for i, j, w in cells)


# ---------------------------------------------------------------------------
# transportation simplex
# ---------------------------------------------------------------------------

def _northwest_corner(a, b):
    """Deterministic starting basis: m + n - 1 staircase cells."""
    m, n = len(a), len(b)
    ra, rb = list(a), list(b)
    cells = {}
    i = j = 0
    while True:
        v = min(ra[i], rb[j])
        cells[(i, j)] = v
        ra[i] -= v
        rb[j] -= v
        if i == m - 1 and j == n - 1:
            break
        if ra[i] == 0 and i < m - 1:
            i += 1
        else:
            j += 1
    return cells


def _tree_adjacency(basis, m, n):
    row_adj = [[] for _ in range(m)]
    col_adj = [[] for _ in range(n)]
    for (i, j) in basis:
        row_adj[i].append(j)
        col_adj[j].append(i)
    return row_adj, col_adj


def _potentials(basis, cost, m, n):
    row_adj, col_adj = _tree_adjacency(basis, m, n)
    u = [None] * m
    v = [None] * n
    u[0] = 0
    stack = [("r", 0)]
    while stack:
        kind, idx = stack.pop()
        if kind == "r":
            for j in row_adj[idx]:
                if v[j] is None:
                    v[j] = cost[idx][j] - u[idx]
                    stack.append(("c", j))
        else:
            for i in col_adj[idx]:
                if u[i] is None:
                    u[i] = cost[i][idx] - v[idx]
                    stack.append(("r", i))
    if any(x is None for x in u) or any(x is None for x in v):
        raise SolverFailureError("basis is not a spanning tree")
    return u, v


def _tree_path(basis, m, n, start_row, end_col):
    """Alternating node path from a row to a column inside the basis tree."""
    row_adj, col_adj = _tree_adjacency(basis, m, n)
    parent = {("r", start_row): None}
    stack = [("r", start_row)]
    target = ("c", end_col)
    while stack:
        node = stack.pop()
        if node == target:
            break
        kind, idx = node
        nbrs = ((("c", j) for j in row_adj[idx]) if kind == "r"
                else (("r", i) for i in col_adj[idx]))
        for nb in nbrs:
            if nb not in parent:
                parent[nb] = node
                stack.append(nb)
    if target not in parent:
        raise SolverFailureError("entering cell closes no cycle")
    path = [target]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    path.reverse()  # r, c, r, c, ..., c
    return path


def _solve_flows(basis, a, b, m, n):
    """Leaf elimination on the basis tree; flows may be zero (degenerate)."""
    degree = {}
    for (i, j) in basis:
        degree[("r", i)] = degree.get(("r", i), 0) + 1
        degree[("c", j)] = degree.get(("c", j), 0) + 1
    row_adj, col_adj = _tree_adjacency(basis, m, n)
    rem_a = list(a)
    rem_b = list(b)
    alive = set(basis)
    flows = {}
    leaves = [nd for nd, dg in degree.items() if dg == 1]
    adj_r = [set(js) for js in row_adj]
    adj_c = [set(is_) for is_ in col_adj]
    while leaves:
        kind, idx = leaves.pop()
        if degree.get((kind, idx), 0) != 1:
            continue
        if kind == "r":
            j = next(iter(adj_r[idx]))
            e = (idx, j)
            x = rem_a[idx]
            rem_b[j] -= x
            other = ("c", j)
        else:
            i = next(iter(adj_c[idx]))
            e = (i, idx)
            x = rem_b[idx]
            rem_a[i] -= x
            other = ("r", i)
        flows[e] = x
        alive.discard(e)
        adj_r[e[0]].discard(e[1])
        adj_c[e[1]].discard(e[0])
        degree[(kind, idx)] = 0
        degree[other] -= 1
        if degree[other] == 1:
            leaves.append(other)
    if alive:
        raise SolverFailureError("flow elimination left unresolved cells")
    return flows


def _simplex(cost, a, b, exact: bool):
    """Minimize sum x_ij c_ij over the transportation polytope.

    Returns (basis, flows, potentials).  Deterministic: most-negative
    entering cell with lowest-index ties, lowest-index leaving cell; Bland's
    rule takes over after a run of degenerate pivots to guarantee
    termination.
    """
    m, n = len(a), len(b)
    flows = _northwest_corner(a, b)
    basis = set(flows.keys())
    if exact:
        opt_tol = 0
    else:
        scale = max(max(abs(c) for c in row) for row in cost) or 1.0
        opt_tol = 1e-12 * scale
    degen_run = 0
    bland = False
    max_iter = 2000 + 40 * (m + n) * max(m, n)
    for _ in range(max_iter):
        u, v = _potentials(basis, cost, m, n)
        entering = None
        best = -opt_tol
        for i in range(m):
            ci = cost[i]
            ui = u[i]
            for j in range(n):
                if (i, j) in basis:
                    continue
                r = ci[j] - ui - v[j]
                if r < best:
                    best = r
                    entering = (i, j)
                    if bland:
                        break
            if bland and entering is not None:
                break
        if entering is None:
            return basis, flows, (u, v)
        path = _tree_path(basis, m, n, entering[0], entering[1])
        # cycle: entering cell, then path edges alternate -, +, -, ...
        minus = []
        plus = []
        for t in range(len(path) - 1):
            na, nb = path[t], path[t + 1]
            cell = (na[1], nb[1]) if na[0] == "r" else (nb[1], na[1])
            (minus if t % 2 == 0 else plus).append(cell)
        theta = min(flows[c] for c in minus)
        leaving = min(c for c in minus if flows[c] == theta)
        for c in minus:
            flows[c] -= theta
        for c in plus:
            flows[c] += theta
        flows[entering] = theta
        del flows[leaving]
        basis.discard(leaving)
        basis.add(entering)
        if theta == 0:
            degen_run += 1
            if degen_run > 20 + 2 * (m + n):
                bland = True
        else:
            degen_run = 0
            bland = False
    raise SolverFailureError("transportation simplex did not converge")


# ---------------------------------------------------------------------------
# lexicographically smallest optimal vertex
# ---------------------------------------------------------------------------

def _max_flow(edges, a, b, m, n):
    """Max mass routable through the allowed cells (Edmonds-Karp).

    Cell capacities are infinite, so every augmentation saturates a supply
    or demand edge; the augmentation count is bounded by the node count
    regardless of the arithmetic, which keeps the routine exact-safe.
    """
    adj_r = [[] for _ in range(m)]
    adj_c = [[] for _ in range(n)]
    for (i, j) in edges:
        adj_r[i].append(j)
        adj_c[j].append(i)
    res_a = list(a)
    res_b = list(b)
    flow = {}
    total = 0
    while True:
        prev_r = [None] * m   # ("s",) or ("c", j)
        prev_c = [None] * n   # ("r", i)
        queue = []
        for i in range(m):
            if res_a[i] > 0:
                prev_r[i] = ("s",)
                queue.append(("r", i))
        reached = None
        qi = 0
        while qi < len(queue) and reached is None:
            kind, idx = queue[qi]
            qi += 1
            if kind == "r":
                for j in adj_r[idx]:
                    if prev_c[j] is not None:
                        continue
                    prev_c[j] = ("r", idx)
                    if res_b[j] > 0:
                        reached = j
                        break
                    queue.append(("c", j))
            else:
                for i in adj_c[idx]:
                    if prev_r[i] is None and flow.get((i, idx), 0) > 0:
                        prev_r[i] = ("c", idx)
                        queue.append(("r", i))
        if reached is None:
            return total, flow
        # trace the augmenting path back to the source
        path = []
        j = reached
        bottleneck = res_b[j]
        while True:
            i = prev_c[j][1]
            path.append((i, j, +1))
            back = prev_r[i]
            if back[0] == "s":
                bottleneck = min(bottleneck, res_a[i])
                start_row = i
                break
            j = back[1]
            bottleneck = min(bottleneck, flow[(i, j)])
            path.append((i, j, -1))
        res_a[start_row] -= bottleneck
        res_b[reached] -= bottleneck
        for i, j, sgn in path:
            flow[(i, j)] = flow.get((i, j), 0) + sgn * bottleneck
        total += bottleneck


def _lex_min_on_face(face_cells, a, b, m, n, zero_tol):
    """Greedy row-major minimization over the optimal face.

    Every feasible point supported on the zero-reduced-cost cells is
    optimal, so fixing each coordinate at its feasibility minimum yields
    the lexicographically smallest optimal coupling.
    """
    rem_a = list(a)
    rem_b = list(b)
    remaining = sorted(face_cells)
    fixed = {}
    for idx, (i, j) in enumerate(remaining):
        others = remaining[idx + 1:]
        if rem_a[i] <= zero_tol or rem_b[j] <= zero_tol:
            x = 0
        else:
            flow, _ = _max_flow(others, rem_a, rem_b, m, n)
            total = sum(rem_a)
            x = total - flow
            if x <= zero_tol:
                x = 0
        if x:
            fixed[(i, j)] = x
            rem_a[i] -= x
            rem_b[j] -= x
    if any(float(x) > MARGINAL_TOL for x in rem_a):
        raise SolverFailureError("lexicographic refinement lost mass")
    return fixed


def _optimal_face(cost, basis, potentials, m, n, exact):
    u, v = potentials
    if exact:
        tol = 0
    else:
        scale = max(max(abs(c) for c in row) for row in cost) or 1.0
        tol = 1e-9 * scale
    cells = set(basis)
    for i in range(m):
        for j in range(n):
            if abs(cost[i][j] - u[i] - v[j]) <= tol:
                cells.add((i, j))
    return cells


def w2(space: FiniteMetricMeasureSpace, mu: ProbMeasure, nu: ProbMeasure):
    """Exact quadratic Wasserstein distance and one optimal coupling.

    The coupling is the lexicographically smallest optimal vertex in
    row-major order, so repeated runs (and downstream chain lifts) are
    reproducible.  Returns ``(distance, Coupling)``; the coupling carries
    the exact squared cost.
    """
    if mu.n != space.n or nu.n != space.n:
        raise ValueError("measures must live on the given space")
    I = _support(mu)
    J = _support(nu)
    a = [mu.weights[i] for i in I]
    b = [nu.weights[j] for j in J]
    exact = (space.is_exact and mu.is_exact() and nu.is_exact())
    if exact:
        cost = [[space.dist[i][j] ** 2 for j in J] for i in I]
    else:
        cost = [[float(space.dist[i][j]) ** 2 for j in J] for i in I]
        a = [float(x) for x in a]
        b = [float(x) for x in b]
    basis, flows, potentials = _simplex(cost, a, b, exact)
    face = _optimal_face(cost, basis, potentials, len(I), len(J), exact)
    zero_tol = 0 if exact else MARGINAL_TOL * 1e-2
    fixed = _lex_min_on_face(face, a, b, len(I), len(J), zero_tol)
    cells = tuple(sorted((I[i], J[j], x) for (i, j), x in fixed.items()))
    cost2 = coupling_cost2(space, cells)
    coupling = Coupling(cells, mu, nu, cost2)
    return math.sqrt(float(cost2)), coupling


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _spanning_tree_orders(m: int, n: int):
    """All spanning trees of K_{m,n} as leaf-elimination step lists."""
    count_estimate = m ** (n - 1) * n ** (m - 1)
    if count_estimate > 300_000:
        raise SizeLimitError(
            f"{count_estimate} spanning trees for a {m}x{n} support; "
            "the brute-force oracle is for tiny instances")
    edges = [(i, j) for i in range(m) for j in range(n)]
    need = m + n - 1
    trees = []

    def grow(start, chosen, comp):
        if len(chosen) == need:
            trees.append(list(chosen))
            return
        if len(chosen) + (len(edges) - start) < need:
            return
        for idx in range(start, len(edges)):
            i, j = edges[idx]
            ri, cj = comp[i], comp[m + j]
            if ri == cj:
                continue
            new_comp = [ri if c == cj else c for c in comp]
            chosen.append(edges[idx])
            grow(idx + 1, chosen, new_comp)
            chosen.pop()

    grow(0, [], list(range(m + n)))

    orders = []
    for tree in trees:
        degree = [0] * (m + n)
        adj = [[] for _ in range(m + n)]
        for (i, j) in tree:
            degree[i] += 1
            degree[m + j] += 1
            adj[i].append(m + j)
            adj[m + j].append(i)
        alive = set(tree)
        steps = []
        leaves = [nd for nd in range(m + n) if degree[nd] == 1]
        adjs = [set(x) for x in adj]
        while leaves:
            nd = leaves.pop()
            if degree[nd] != 1:
                continue
            other = next(iter(adjs[nd]))
            e = (nd, other - m) if nd < m else (other, nd - m)
            steps.append((nd < m, nd if nd < m else nd - m,
                          other - m if nd < m else other, e))
            alive.discard(e)
            adjs[nd].discard(other)
            adjs[other].discard(nd)
            degree[nd] = 0
            degree[other] -= 1
            if degree[other] == 1:
                leaves.append(other)
        orders.append(steps)
    return orders


def w2_brute_force(space: FiniteMetricMeasureSpace, mu: ProbMeasure,
                   nu: ProbMeasure) -> float:
    """Oracle: minimum cost over every vertex of the coupling polytope.

    Enumerates all basic solutions via precomputed spanning-tree
    elimination orders; infeasible (negative-flow) trees are skipped.
    """
    I = _support(mu)
    J = _support(nu)
    m, n = len(I), len(J)
    if m > 6 or n > 6:
        raise SizeLimitError("brute-force oracle supports at most 6x6 supports")
    a = [float(mu.weights[i]) for i in I]
    b = [float(nu.weights[j]) for j in J]
    cost = [[float(space.dist[i][j]) ** 2 for j in J] for i in I]
    tol = -1e-12
    best = None
    for steps in _spanning_tree_orders(m, n):
        ra = a[:]
        rb = b[:]
        total = 0.0
        ok = True
        for is_row, leaf, other, e in steps:
            if is_row:
                x = ra[leaf]
                rb[other] -= x
            else:
                x = rb[leaf]
                ra[e[0]] -= x
            if x < tol:
                ok = False
                break
            total += x * cost[e[0]][e[1]]
        if ok and (best is None or total < best):
            best = total
    if best is None:
        raise SolverFailureError("no feasible basic solution found")
    return math.sqrt(max(best, 0.0))


# ---------------------------------------------------------------------------
# dynamical plans
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DynamicalPlan:
    """Finitely supported measure on chains; time-t pushforwards trace the
    displacement interpolation."""

    chains: tuple
    weights: tuple
    k: int
    optimal: bool
    cost_gap: float       # coupling cost minus W2^2, from the optimality check

    def endpoint_coupling_cells(self):
        agg = {}
        for c, w in zip(self.chains, self.weights):
            key = (c.nodes[0], c.nodes[-1])
            agg[key] = agg.get(key, 0) + w
        return tuple(sorted((i, j, w) for (i, j), w in agg.items()))


def plan_marginal(space: FiniteMetricMeasureSpace, plan: DynamicalPlan,
                  index: int) -> ProbMeasure:
    w = [0] * space.n
    for c, wt in zip(plan.chains, plan.weights):
        w[c.nodes[index]] += wt
    return ProbMeasure.create(tuple(w))


def interpolate(space: FiniteMetricMeasureSpace, plan: DynamicalPlan, t) -> ProbMeasure:
    """Displacement interpolation at a grid time of the plan."""
    pos = t * plan.k
    j = round(float(pos))
    if abs(float(pos) - j) > 1e-12 or not (0 <= j <= plan.k):
        from .errors import OffGridTimeError
        raise OffGridTimeError(f"time {t} not on grid of resolution {plan.k}")
    return plan_marginal(space, plan, j)


def _check_optimality(space, plan_cells, mu, nu):
    cost = coupling_cost2(space, plan_cells)
    dist, _ = w2(space, mu, nu)
    gap = float(cost) - dist * dist
    return abs(gap) <= 1e-9 * max(1.0, dist * dist), gap


def make_plan(space: FiniteMetricMeasureSpace, chains, weights,
              verify: bool = True) -> DynamicalPlan:
    """Assemble a plan from chains and positive weights summing to one."""
    pairs = [(c, w) for c, w in zip(chains, weights) if w > 0]
    if not pairs:
        raise ZeroMassRestrictionError("plan has no positive-weight chain")
    merged = {}
    for c, w in pairs:
        merged[c.nodes] = (c, merged.get(c.nodes, (c, 0))[1] + w)
    chains = tuple(c for c, _ in merged.values())
    weights = tuple(w for _, w in merged.values())
    k = chains[0].k
    if any(c.k != k for c in chains):
        raise ValueError("all chains in a plan share one resolution")
    total = sum(weights)
    if abs(float(total) - 1.0) > PROB_TOL:
        raise ValueError(f"plan weights sum to {float(total)}")
    plan = DynamicalPlan(chains, weights, k, False, float("nan"))
    if verify:
        mu0 = plan_marginal(space, plan, 0)
        mu1 = plan_marginal(space, plan, k)
        flag, gap = _check_optimality(space, plan.endpoint_coupling_cells(),
                                      mu0, mu1)
        plan = DynamicalPlan(chains, weights, k, flag, gap)
    return plan


def optimal_dynamical_plan(space: FiniteMetricMeasureSpace, mu: ProbMeasure,
                           nu: ProbMeasure, k: int, eps_geo=None,
                           chain_select: str = "lex") -> DynamicalPlan:
    """Lift the lexicographically-minimal optimal coupling cell by cell to
    admissible chains.

    ``chain_select`` fixes the deterministic lift:

    * ``"lex"`` — the lexicographically first chain per cell;
    * ``"tight"`` — the deviation-greedy chain, so loose tolerances do not
      lift couplings along detours;
    * ``"spread"`` — cell weight split uniformly over all minimal-deviation
      chains; rounding ties then share mass symmetrically instead of
      stacking on one grid point, which is what realizes the sharp
      interpolant density bounds on lattice spaces.
    """
    _, coupling = w2(space, mu, nu)
    chains = []
    weights = []
    for i, j, wt in coupling.cells:
        if chain_select == "spread":
            for chain, share in _min_deviation_chains(space, i, j, k, eps_geo):
                chains.append(chain)
                weights.append(wt * share)
        else:
            cs = enumerate_chains(space, i, j, k, eps_geo, first_only=True,
                                  order=chain_select)
            chains.append(cs.chains[0])
            weights.append(wt)
    plan = make_plan(space, chains, weights, verify=False)
    # by construction the endpoint pushforward equals the optimal coupling
    return DynamicalPlan(plan.chains, plan.weights, plan.k, True, 0.0)


def _min_deviation_chains(space, i, j, k, eps_geo):
    """All chains achieving the minimal relative deviation, equal shares.

    Any nonempty enumeration at a smaller tolerance already contains every
    global minimizer, so the tolerance ladder keeps the search corridor
    (and the chain count) small without changing the answer.
    """
    from .geodesics import chain_deviation, default_eps_geo
    if eps_geo is None:
        eps_geo = default_eps_geo(k)
    cs = None
    for num, den in ((1, 16), (1, 8), (1, 4), (1, 2), (1, 1)):
        try:
            cs = enumerate_chains(space, i, j, k,
                                  eps_geo * Fraction(num, den))
            break
        except EmptyChainSetError:
            continue
    if cs is None:
        # surfaces the pair and the full tolerance in the error
        cs = enumerate_chains(space, i, j, k, eps_geo)
    devs = [chain_deviation(space, c.nodes) for c in cs.chains]
    best = min(devs)
    winners = [c for c, d in zip(cs.chains, devs) if d == best]
    share = (Fraction(1, len(winners)) if space.is_exact
             else 1.0 / len(winners))
    return [(c, share) for c in winners]


def restrict_plan(space: FiniteMetricMeasureSpace, plan: DynamicalPlan,
                  predicate) -> DynamicalPlan:
    """Renormalized restriction to the chains satisfying the predicate.

    Restrictions of optimal plans stay optimal; the flag is rechecked
    rather than assumed.
    """
    sel = [(c, w) for c, w in zip(plan.chains, plan.weights) if predicate(c)]
    total = sum(w for _, w in sel)
    if not total > 0:
        raise ZeroMassRestrictionError("predicate selects zero plan mass")
    chains = tuple(c for c, _ in sel)
    weights = tuple(w / total for _, w in sel)
    return make_plan(space, chains, weights, verify=True)


def slice_plan(space: FiniteMetricMeasureSpace, plan: DynamicalPlan,
               i0: int, i1: int) -> DynamicalPlan:
    """Time-window restriction to grid indices [i0, i1], reparametrized to
    [0, 1]; chains that coincide on the window merge."""
    subchains = [subchain(space, c, i0, i1) for c in plan.chains]
    return make_plan(space, subchains, plan.weights, verify=True)


# ---------------------------------------------------------------------------
# optimal-plan family enumeration
# ---------------------------------------------------------------------------

MIXTURE_GRID = (Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))


@dataclass
class OptimalPlanFamily:
    """Vertices of the optimal-coupling face, chain sets per supported cell,
    and a documented sampled family of plans built from them.

    ``complete`` means the vertex enumeration finished below its cap and
    every chain set is untruncated.  The mixture grid is a deliberate
    finite sample of the continuum of plans and is reported as such.
    """

    vertices: tuple
    vertices_complete: bool
    chain_sets: dict
    chains_complete: bool
    k: int
    eps_geo: object
    plans_truncated: bool = False

    @property
    def complete(self) -> bool:
        return (self.vertices_complete and self.chains_complete
                and not self.plans_truncated)


def _enumerate_face_vertices(cost, a, b, m, n, exact, cap):
    """All vertices of the optimal face by pivoting among optimal bases."""
    basis, flows, potentials = _simplex(cost, a, b, exact)
    face = _optimal_face(cost, basis, potentials, m, n, exact)
    zero = 0 if exact else MARGINAL_TOL * 1e-2

    def vertex_key(fl):
        if exact:
            return tuple(sorted((c, x) for c, x in fl.items() if x > 0))
        return tuple(sorted((c, round(float(x), 12))
                            for c, x in fl.items() if x > zero))

    start = frozenset(basis)
    seen_bases = {start}
    queue = [start]
    vertices = {}
    complete = True
    while queue:
        bs = queue.pop(0)
        fl = _solve_flows(bs, a, b, m, n)
        if any(x < -float(MARGINAL_TOL) for x in
               (float(v) for v in fl.values())):
            continue
        vertices.setdefault(vertex_key(fl), dict(fl))
        if len(seen_bases) >= cap:
            complete = False
            continue
        for e in sorted(face):
            if e in bs:
                continue
            path = _tree_path(bs, m, n, e[0], e[1])
            minus = []
            for t in range(len(path) - 1):
                na, nb = path[t], path[t + 1]
                cell = (na[1], nb[1]) if na[0] == "r" else (nb[1], na[1])
                if t % 2 == 0:
                    minus.append(cell)
            theta = min(fl[c] for c in minus)
            for leaving in minus:
                if fl[leaving] != theta and exact:
                    continue
                if not exact and abs(float(fl[leaving]) - float(theta)) > zero:
                    continue
                nb = frozenset(bs - {leaving} | {e})
                if nb not in seen_bases:
                    seen_bases.add(nb)
                    queue.append(nb)
    return list(vertices.values()), complete


def enumerate_optimal_plans(space: FiniteMetricMeasureSpace, mu: ProbMeasure,
                            nu: ProbMeasure, k: int, eps_geo=None,
                            cap: int = DEFAULT_CHAIN_CAP,
                            vertex_cap: int = 512,
                            max_plans: int = 256) -> tuple:
    """Vertices of the optimal-coupling face plus per-cell chain sets, and
    a sampled plan family.

    Returns ``(family, plans)`` where ``plans`` is a list of DynamicalPlan
    built per the documented strategy: canonical lex-first plan per vertex,
    single-cell chain swaps, single-cell chain mixtures on the grid
    {1/4, 1/2, 3/4}, and pairwise vertex mixtures (canonical chains).
    Truncation anywhere clears the ``complete`` flag; a cleared flag means
    verdicts drawn from the family are evidence, not certificates.
    """
    I = _support(mu)
    J = _support(nu)
    exact = space.is_exact and mu.is_exact() and nu.is_exact()
    a = [mu.weights[i] for i in I]
    b = [nu.weights[j] for j in J]
    if exact:
        cost = [[space.dist[i][j] ** 2 for j in J] for i in I]
    else:
        cost = [[float(space.dist[i][j]) ** 2 for j in J] for i in I]
        a = [float(x) for x in a]
        b = [float(x) for x in b]
    raw_vertices, v_complete = _enumerate_face_vertices(
        cost, a, b, len(I), len(J), exact, vertex_cap)

    vertices = []
    for fl in raw_vertices:
        cells = tuple(sorted((I[i], J[j], x) for (i, j), x in fl.items() if x > 0))
        vertices.append(Coupling(cells, mu, nu, coupling_cost2(space, cells)))
    vertices.sort(key=lambda cp: tuple((i, j, float(w)) for i, j, w in cp.cells))

    cell_keys = sorted({(i, j) for cp in vertices for i, j, _ in cp.cells})
    chain_sets = {}
    chains_complete = True
    for (i, j) in cell_keys:
        cs = enumerate_chains(space, i, j, k, eps_geo, cap=cap)
        chain_sets[(i, j)] = cs
        chains_complete &= not cs.truncated

    family = OptimalPlanFamily(tuple(vertices), v_complete, chain_sets,
                               chains_complete, k, eps_geo)

    plans = []

    def add_plan(chains, weights):
        if len(plans) < max_plans:
            plans.append(make_plan(space, chains, weights, verify=False))
        else:
            family.plans_truncated = True

    def canonical(coupling):
        chains = [chain_sets[(i, j)].chains[0] for i, j, _ in coupling.cells]
        weights = [w for _, _, w in coupling.cells]
        return chains, weights

    for cp in vertices:
        chains, weights = canonical(cp)
        add_plan(chains, weights)
        for idx, (i, j, wt) in enumerate(cp.cells):
            alts = chain_sets[(i, j)].chains
            for alt in alts[1:]:
                swapped = list(chains)
                swapped[idx] = alt
                add_plan(swapped, weights)
            if len(alts) >= 2:
                for lam in MIXTURE_GRID:
                    mixed = list(chains) + [alts[1]]
                    wts = list(weights)
                    wts[idx] = wt * (1 - lam)
                    wts.append(wt * lam)
                    add_plan(mixed, wts)
            if len(plans) >= max_plans:
                break
        if len(plans) >= max_plans:
            break

    for ai in range(len(vertices)):
        for bi in range(ai + 1, len(vertices)):
            for lam in MIXTURE_GRID:
                agg = {}
                for i, j, wv in vertices[ai].cells:
                    agg[(i, j)] = agg.get((i, j), 0) + wv * (1 - lam)
                for i, j, wv in vertices[bi].cells:
                    agg[(i, j)] = agg.get((i, j), 0) + wv * lam
                chains = [chain_sets[c].chains[0] for c in sorted(agg)]
                weights = [agg[c] for c in sorted(agg)]
                add_plan(chains, weights)
            if len(plans) >= max_plans:
                break
        if len(plans) >= max_plans:
            break

    # plans built from optimal couplings and shared chains are optimal by
    # construction; stamp the verified flag without n^2 re-solves
    plans = [DynamicalPlan(p.chains, p.weights, p.k, True, 0.0) for p in plans]
    return family, plans
