"""Bundled example spaces, all with exact rational metrics and weights.

Each generator notes the checks it is built to exercise:

* ``segment`` / ``grid2d`` — model flat spaces for the Poincare
  certificates, density bounds and doubling measurements;
* ``circle`` / ``tripod`` — uniqueness negatives (the antipode is the only
  multi-geodesic point on a circle; trees are uniquely geodesic);
* ``theta`` — the branching positive: two parallel arms between junctions
  plus a stem behind the far junction, so chains from stem targets to the
  near junction share an initial segment and then split;
* ``weighted_tree`` — seeded random tree metric for property tests.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import UnknownExampleError
from .space import FiniteMetricMeasureSpace


def _uniform_weights(n):
    return tuple(Fraction(1, n) for _ in range(n))


def segment(n: int = 65) -> FiniteMetricMeasureSpace:
    """n points on [0, 1] with the line metric and uniform weights."""
    if n < 2:
        raise ValueError("segment needs at least 2 points")
    pitch = Fraction(1, n - 1)
    pts = tuple(f"p{i}" for i in range(n))
    dist = tuple(tuple(abs(i - j) * pitch for j in range(n)) for i in range(n))
    return FiniteMetricMeasureSpace.create(pts, dist, _uniform_weights(n))


def grid2d(m: int = 17) -> FiniteMetricMeasureSpace:
    """m x m unit-square grid with the 4-neighbor path (Manhattan) metric."""
    if m < 2:
        raise ValueError("grid needs at least 2 points per side")
    pitch = Fraction(1, m - 1)
    coords = [(i, j) for i in range(m) for j in range(m)]
    pts = tuple(f"p{i}_{j}" for i, j in coords)
    dist = tuple(
        tuple((abs(a - c) + abs(b - d)) * pitch for (c, d) in coords)
        for (a, b) in coords)
    return FiniteMetricMeasureSpace.create(pts, dist, _uniform_weights(m * m))


def circle(n: int = 32) -> FiniteMetricMeasureSpace:
    """n points on a unit-circumference cycle with the arc metric."""
    if n < 3:
        raise ValueError("circle needs at least 3 points")
    pitch = Fraction(1, n)
    pts = tuple(f"c{i}" for i in range(n))
    dist = tuple(
        tuple(min(abs(i - j), n - abs(i - j)) * pitch for j in range(n))
        for i in range(n))
    return FiniteMetricMeasureSpace.create(pts, dist, _uniform_weights(n))


def tripod(arm_length=1, k: int = 8) -> FiniteMetricMeasureSpace:
    """Three arms of k edges glued at a center: a uniquely geodesic tree."""
    L = Fraction(arm_length)
    pitch = L / k
    pts = ["o"]
    pos = [("o", 0)]
    for arm in "abc":
        for i in range(1, k + 1):
            pts.append(f"{arm}{i}")
            pos.append((arm, i))
    n = len(pts)

    def d(p, q):
        (arm_p, i), (arm_q, j) = p, q
        if arm_p == arm_q:
            return abs(i - j) * pitch
        if arm_p == "o":
            return j * pitch
        if arm_q == "o":
            return i * pitch
        return (i + j) * pitch

    dist = tuple(tuple(d(pos[i], pos[j]) for j in range(n)) for i in range(n))
    return FiniteMetricMeasureSpace.create(tuple(pts), dist, _uniform_weights(n))


def theta(arm_length=1, arm_separation=Fraction(1, 2),
          k: int = 16) -> FiniteMetricMeasureSpace:
    """Two parallel arms between junctions, cross-linked at matched
    positions so the arms sit at the requested separation, plus a stem of
    the same length behind the far junction.

    The near junction is point 0.  Every point behind the far junction is
    reached from point 0 through either arm, so targets there have two
    distinct chains that agree along the stem and separate in the arms,
    which is exactly what the branching search needs.
    """
    L = Fraction(arm_length)
    s = Fraction(arm_separation)
    if not 0 < s <= 2 * L:
        raise ValueError("arm separation must lie in (0, 2L]")
    pitch = L / k
    names = ["j1"]
    names += [f"a{i}" for i in range(1, k)]
    names += ["j2"]
    names += [f"b{i}" for i in range(1, k)]
    names += [f"t{i}" for i in range(1, k)]
    names += ["z"]
    index = {nm: i for i, nm in enumerate(names)}
    n = len(names)

    edges = []
    a_nodes = ["j1"] + [f"a{i}" for i in range(1, k)] + ["j2"]
    b_nodes = ["j1"] + [f"b{i}" for i in range(1, k)] + ["j2"]
    stem = ["j2"] + [f"t{i}" for i in range(1, k)] + ["z"]
    for chain in (a_nodes, b_nodes, stem):
        for u, v in zip(chain, chain[1:]):
            edges.append((index[u], index[v], pitch))
    for i in range(1, k):
        edges.append((index[f"a{i}"], index[f"b{i}"], s))

    dist = _shortest_path_closure(n, edges)
    return FiniteMetricMeasureSpace.create(tuple(names), dist,
                                           _uniform_weights(n))


def weighted_tree(n: int = 12, seed: int = 0) -> FiniteMetricMeasureSpace:
    """Seeded random tree with rational edge weights; uniquely geodesic."""
    if n < 2:
        raise ValueError("tree needs at least 2 points")
    rng = np.random.default_rng(seed)
    edges = []
    for i in range(1, n):
        parent = int(rng.integers(0, i))
        w = Fraction(int(rng.integers(1, 9)), 8)
        edges.append((parent, i, w))
    weights = tuple(Fraction(int(rng.integers(1, 5)), 4 * n) for _ in range(n))
    dist = _shortest_path_closure(n, edges)
    pts = tuple(f"v{i}" for i in range(n))
    return FiniteMetricMeasureSpace.create(pts, dist, weights)


def _shortest_path_closure(n, edges):
    """All-pairs shortest paths (exact Dijkstra per source)."""
    import heapq
    adj = [[] for _ in range(n)]
    for u, v, w in edges:
        adj[u].append((v, w))
        adj[v].append((u, w))
    rows = []
    for src in range(n):
        dist = [None] * n
        dist[src] = Fraction(0)
        heap = [(Fraction(0), src)]
        while heap:
            d, u = heapq.heappop(heap)
            if dist[u] is not None and d > dist[u]:
                continue
            for v, w in adj[u]:
                nd = d + w
                if dist[v] is None or nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        if any(d is None for d in dist):
            from .errors import DisconnectedGraphError
            raise DisconnectedGraphError("graph input is not connected")
        rows.append(tuple(dist))
    return tuple(rows)


GENERATORS = {
    "segment": segment,
    "grid2d": grid2d,
    "circle": circle,
    "tripod": tripod,
    "theta": theta,
    "weighted_tree": weighted_tree,
}


def generate_example(name: str, **params) -> FiniteMetricMeasureSpace:
    if name not in GENERATORS:
        raise UnknownExampleError(
            f"unknown example {name!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[name](**params)
