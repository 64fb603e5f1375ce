"""Discrete constant-speed geodesic chains and their enumeration.

A chain at resolution ``k`` between points ``x`` and ``y`` is a node list
``(p_0, ..., p_k)`` with ``p_0 = x``, ``p_k = y`` whose pairwise distances
track the constant-speed parametrization: for all ``i < j``

    | d(p_i, p_j) - (j - i)/k * span |  <=  eps_geo * span,

where ``span = d(x, y)``.  The tolerance is relative because the
discretization error of a length-L geodesic scales with L.  A zero-span
chain is constant.

Enumeration is depth-first with exact pairwise pruning (a partial chain is
extended only by nodes compatible with every placed node *and* with the
target endpoint), yields chains in lexicographic node order, and stops at
a cap with an explicit truncation flag.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import EmptyChainSetError, OffGridTimeError, ResolutionMismatchError
from .space import FiniteMetricMeasureSpace, is_exact_number

#: default relative tolerance factor: eps_geo = DEFAULT_EPS_FACTOR / k
DEFAULT_EPS_FACTOR = 1.5

#: default enumeration cap per endpoint pair
DEFAULT_CHAIN_CAP = 10_000


def default_eps_geo(k: int):
    return Fraction(3, 2) / k


@dataclass(frozen=True)
class GeodesicChain:
    """Equally-spaced node chain approximating a constant-speed geodesic."""

    nodes: tuple
    span: object
    eps_geo: object

    @property
    def k(self) -> int:
        return len(self.nodes) - 1

    @property
    def endpoints(self):
        return (self.nodes[0], self.nodes[-1])

    def reversed(self) -> "GeodesicChain":
        return GeodesicChain(tuple(reversed(self.nodes)), self.span, self.eps_geo)


@dataclass(frozen=True)
class ChainSet:
    """All admissible chains for one endpoint pair at one resolution."""

    x: int
    y: int
    k: int
    eps_geo: object
    chains: tuple
    truncated: bool

    def __len__(self):
        return len(self.chains)


def _float_guard(space: FiniteMetricMeasureSpace, span) -> float:
    # exact spaces compare exactly; float matrices get a rounding cushion
    if space.is_exact and is_exact_number(span):
        return 0
    return 1e-12 * max(float(span), 1.0)


def chain_deviation(space: FiniteMetricMeasureSpace, nodes) -> object:
    """Max deviation |d(p_i,p_j) - (j-i)/k * span| over all pairs, absolute."""
    k = len(nodes) - 1
    span = space.dist[nodes[0]][nodes[-1]]
    if span == 0:
        return 0 if all(p == nodes[0] for p in nodes) else space.diam
    worst = 0
    for i in range(k + 1):
        di = space.dist[nodes[i]]
        for j in range(i + 1, k + 1):
            ideal = Fraction(j - i, k) * span if is_exact_number(span) \
                else (j - i) / k * span
            dev = abs(di[nodes[j]] - ideal)
            if dev > worst:
                worst = dev
    return worst


def is_admissible(space: FiniteMetricMeasureSpace, nodes, eps_geo) -> bool:
    """Independent recheck of the chain property for a node list."""
    span = space.dist[nodes[0]][nodes[-1]]
    if span == 0:
        return all(p == nodes[0] for p in nodes)
    tol = eps_geo * span + _float_guard(space, span)
    return chain_deviation(space, nodes) <= tol


def enumerate_chains(space: FiniteMetricMeasureSpace, x: int, y: int, k: int,
                     eps_geo=None, cap: int = DEFAULT_CHAIN_CAP,
                     first_only: bool = False, order: str = "lex") -> ChainSet:
    """Enumerate every admissible chain from x to y, up to ``cap``.

    Deterministic: with ``order="lex"`` chains come out in lexicographic
    order of their node index tuples; ``order="tight"`` explores the
    lowest-deviation candidate first at every level (ties by index), so
    the first complete chain hugs the ideal parametrization.
    ``first_only`` stops at the first chain in the chosen order (used when
    lifting transport couplings).

    Raises EmptyChainSetError when no chain exists, which signals that the
    discretization is too coarse for this pair at this resolution.
    """
    if k < 1:
        raise ValueError("resolution k must be >= 1")
    if eps_geo is None:
        eps_geo = default_eps_geo(k)
    if eps_geo < 0:
        raise ValueError("eps_geo must be nonnegative")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if order not in ("lex", "tight"):
        raise ValueError("order must be 'lex' or 'tight'")

    span = space.dist[x][y]
    if span == 0:
        chain = GeodesicChain((x,) * (k + 1), span, eps_geo)
        return ChainSet(x, y, k, eps_geo, (chain,), False)

    exact = space.is_exact and is_exact_number(span) and is_exact_number(eps_geo)
    if exact:
        tol = eps_geo * span
        ideal = [Fraction(j, k) * span for j in range(k + 1)]
    else:
        span = float(span)
        tol = float(eps_geo) * span + _float_guard(space, span)
        ideal = [j / k * span for j in range(k + 1)]

    dist = space.dist
    n = space.n
    chains = []
    stop = False
    prefix = [x]

    def extend(pos):
        nonlocal stop
        if pos == k:
            chains.append(
                GeodesicChain(tuple(prefix) + (y,), space.dist[x][y], eps_geo))
            if first_only or len(chains) >= cap:
                stop = True
            return
        rem = k - pos
        candidates = []
        for p in range(n):
            dp = dist[p]
            dev = abs(dp[y] - ideal[rem])
            if dev > tol:
                continue
            ok = True
            for i, q in enumerate(prefix):
                d = abs(dp[q] - ideal[pos - i])
                if d > tol:
                    ok = False
                    break
                if d > dev:
                    dev = d
            if not ok:
                continue
            candidates.append((dev, p) if order == "tight" else p)
        if order == "tight":
            candidates = [p for _, p in sorted(candidates)]
        for p in candidates:
            prefix.append(p)
            extend(pos + 1)
            prefix.pop()
            if stop:
                return

    extend(1)
    if not chains:
        raise EmptyChainSetError(x, y, k, eps_geo)
    truncated = stop and not first_only
    return ChainSet(x, y, k, eps_geo, tuple(chains), truncated)


def evaluate(chain: GeodesicChain, t) -> int:
    """Node at grid time t in {0, 1/k, ..., 1}."""
    k = chain.k
    pos = t * k
    j = round(float(pos))
    if abs(float(pos) - j) > 1e-12 or not (0 <= j <= k):
        raise OffGridTimeError(f"time {t} is not on the grid of resolution {k}")
    return chain.nodes[j]


def chain_length(chain: GeodesicChain):
    """Constant-speed convention: length equals the endpoint distance."""
    return chain.span


def distinct(space: FiniteMetricMeasureSpace, chain_a: GeodesicChain,
             chain_b: GeodesicChain, delta_sep) -> bool:
    """True iff the chains separate by more than delta_sep at some grid time."""
    if chain_a.k != chain_b.k:
        raise ResolutionMismatchError(
            f"resolutions differ: {chain_a.k} vs {chain_b.k}")
    if chain_a.endpoints != chain_b.endpoints:
        raise ResolutionMismatchError(
            f"endpoints differ: {chain_a.endpoints} vs {chain_b.endpoints}")
    return any(space.dist[a][b] > delta_sep
               for a, b in zip(chain_a.nodes, chain_b.nodes))


def subchain(space: FiniteMetricMeasureSpace, chain: GeodesicChain,
             i0: int, i1: int) -> GeodesicChain:
    """Slice a chain to the node window [i0, i1] and recertify its tolerance.

    The slice of an admissible chain is admissible up to a rescaled
    tolerance; the returned chain carries its measured relative deviation.
    """
    if not (0 <= i0 < i1 <= chain.k):
        raise ValueError("invalid slice window")
    nodes = chain.nodes[i0:i1 + 1]
    span = space.dist[nodes[0]][nodes[-1]]
    dev = chain_deviation(space, nodes)
    if span == 0:
        if dev != 0:
            raise ResolutionMismatchError("zero-span slice of a moving chain")
        eps = 0
    else:
        eps = dev / span
    return GeodesicChain(nodes, span, eps)
