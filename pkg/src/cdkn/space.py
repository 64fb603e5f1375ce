"""Finite metric measure spaces: validation, balls, diameters, doubling.

A space is a finite point set with a full symmetric distance matrix and a
strictly positive (unnormalized) measure weight per point.  Entries may be
exact rationals (``int``/``Fraction``) or floats; exact entries get exact
comparisons, float entries a relative tolerance.

Balls are open: ``B(x, r) = {p : d(x, p) < r}``.  Ties at exactly ``r``
are excluded, so sphere shells carry no ball mass by convention.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence, Union

import numpy as np

Number = Union[int, Fraction, float]

#: relative float tolerance for metric-axiom comparisons
METRIC_RTOL = 1e-12


def is_exact_number(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


@dataclass(frozen=True)
class FiniteMetricMeasureSpace:
    """Point identifiers, full distance matrix and positive measure weights."""

    points: tuple
    dist: tuple
    weights: tuple

    @staticmethod
    def create(points: Sequence, dist: Sequence[Sequence[Number]],
               weights: Sequence[Number]) -> "FiniteMetricMeasureSpace":
        pts = tuple(points)
        d = tuple(tuple(row) for row in dist)
        w = tuple(weights)
        if len(d) != len(pts) or any(len(row) != len(pts) for row in d):
            raise ValueError("distance matrix shape does not match point count")
        if len(w) != len(pts):
            raise ValueError("weight vector length does not match point count")
        if any(not (wi > 0) for wi in w):
            raise ValueError("measure weights must be strictly positive")
        return FiniteMetricMeasureSpace(pts, d, w)

    @property
    def n(self) -> int:
        return len(self.points)

    def d(self, i: int, j: int) -> Number:
        return self.dist[i][j]

    @cached_property
    def total_mass(self) -> Number:
        return sum(self.weights)

    @cached_property
    def is_exact(self) -> bool:
        return (all(is_exact_number(w) for w in self.weights)
                and all(is_exact_number(x) for row in self.dist for x in row))

    @cached_property
    def dist_f(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.dist])

    @cached_property
    def weights_f(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    @cached_property
    def diam(self) -> Number:
        return max(max(row) for row in self.dist)

    def mass_of(self, indices) -> Number:
        return sum(self.weights[i] for i in indices)

    def index_of(self, point_id) -> int:
        return self.points.index(point_id)


@dataclass(frozen=True)
class Ball:
    """Open metric ball: members are all points strictly within the radius."""

    center: int
    radius: Number
    members: frozenset
    mass: Number


@dataclass
class MetricViolation:
    kind: str            # "diagonal" | "symmetry" | "positivity" | "triangle"
    indices: tuple
    detail: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "metric ok"
        lines = [f"{v.kind} at {v.indices}: {v.detail}" for v in self.violations]
        return "; ".join(lines)


def _tol_for(space: FiniteMetricMeasureSpace) -> Number:
    if space.is_exact:
        return 0
    biggest = max(float(x) for row in space.dist for x in row)
    return METRIC_RTOL * max(biggest, 1.0)


def validate_metric(space: FiniteMetricMeasureSpace) -> ValidationReport:
    """Check all metric axioms, listing every violated triple.

    Exact inputs are compared exactly; float inputs with a relative
    tolerance.  The report is empty iff the space is a valid metric
    measure space.
    """
    report = ValidationReport()
    n = space.n
    tol = _tol_for(space)
    d = space.dist
    for i in range(n):
        if not (-tol <= d[i][i] <= tol):
            report.violations.append(
                MetricViolation("diagonal", (i,), f"d[{i}][{i}] = {d[i][i]} != 0"))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(d[i][j] - d[j][i]) > tol:
                report.violations.append(
                    MetricViolation("symmetry", (i, j),
                                    f"d[{i}][{j}] = {d[i][j]} != d[{j}][{i}] = {d[j][i]}"))
            if not (d[i][j] > tol if tol else d[i][j] > 0):
                report.violations.append(
                    MetricViolation("positivity", (i, j),
                                    f"d[{i}][{j}] = {d[i][j]} <= 0 for distinct points"))
    for i in range(n):
        for j in range(n):
            if j == i:
                continue
            dij = d[i][j]
            for kk in range(n):
                if kk == i or kk == j:
                    continue
                if d[i][kk] > dij + d[j][kk] + tol:
                    report.violations.append(
                        MetricViolation("triangle", (i, j, kk),
                                        f"d[{i}][{kk}] = {d[i][kk]} > "
                                        f"d[{i}][{j}] + d[{j}][{kk}] = {dij + d[j][kk]}"))
    for i, w in enumerate(space.weights):
        if not w > 0:
            report.violations.append(
                MetricViolation("positivity", (i,), f"weight[{i}] = {w} <= 0"))
    return report


def ball(space: FiniteMetricMeasureSpace, center: int, radius: Number) -> Ball:
    """Open ball around a point index; mass is the member weight sum."""
    if not radius > 0:
        raise ValueError("ball radius must be positive")
    row = space.dist[center]
    members = frozenset(i for i in range(space.n) if row[i] < radius)
    return Ball(center, radius, members, space.mass_of(members))


def diameter(space: FiniteMetricMeasureSpace, subset=None) -> Number:
    """Max pairwise distance within a subset (whole space by default)."""
    if subset is None:
        return space.diam
    idx = sorted(subset)
    if not idx:
        raise ValueError("diameter of an empty subset is undefined")
    if len(idx) == 1:
        return 0
    return max(space.dist[i][j] for a, i in enumerate(idx) for j in idx[a + 1:])


def doubling_constant(space: FiniteMetricMeasureSpace, radii) -> float:
    """sup over all centers and supplied radii of m(B(x, 2r)) / m(B(x, r))."""
    radii = list(radii)
    if not radii:
        raise ValueError("radius list must be nonempty")
    dmax = space.diam
    for r in radii:
        if not (0 < r < dmax) and space.n > 1:
            raise ValueError(f"radius {r} outside (0, diam) = (0, {dmax})")
    worst = 1.0
    for x in range(space.n):
        row = space.dist[x]
        for r in radii:
            inner = sum(space.weights[i] for i in range(space.n) if row[i] < r)
            outer = sum(space.weights[i] for i in range(space.n) if row[i] < 2 * r)
            ratio = float(outer) / float(inner)
            if ratio > worst:
                worst = ratio
    return worst


def default_radius_sweep(space: FiniteMetricMeasureSpace, step: float = 2 ** 0.5):
    """Geometric radius sweep in (0, diam), offset off the distance lattice.

    Every radius is a half-integer multiple of the smallest positive
    distance, so on lattice-like spaces both B(x, r) and B(x, 2r) cut
    between shells instead of on them; integer radii overshoot the
    asymptotic doubling ratio through shell-boundary effects.
    """
    dmax = float(space.diam)
    pitch = min(float(space.dist[i][j])
                for i in range(space.n) for j in range(space.n) if i != j)
    radii = []
    w = 2
    while (w + 0.5) * pitch < 0.5 * dmax:
        radii.append((w + 0.5) * pitch)
        w = max(w + 1, int(round(w * step)))
    if not radii:
        radii = [0.49 * dmax]
    return radii
