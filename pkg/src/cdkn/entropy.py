"""Entropy functionals, displacement-convexity classes and distortion
coefficients.

Three functional families are provided:

* ``renyi(N)``:  F(r) = -r^(1 - 1/N), the critical dimensional entropy;
* ``shannon()``: F(r) = r log r, the N = infinity critical entropy;
* ``power_test(p)``: F(r) = r^p, the test family used to squeeze density
  bounds out of the convexity inequality (p is capped at 64; the p -> inf
  limit is realized by reporting the supremum of the p-norm bounds).

Conventions: F(0) = 0 throughout (0 log 0 = 0), and infinity is a
first-class value — the positive-curvature branches of the distortion
coefficient return ``math.inf`` rather than overflowing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import UnsupportedCurvatureError
from .space import FiniteMetricMeasureSpace

POWER_TEST_MAX = 64


@dataclass(frozen=True)
class EntropySpec:
    """A functional family member: kind in {"renyi", "shannon", "power"}."""

    kind: str
    param: float = 0.0

    def label(self) -> str:
        if self.kind == "renyi":
            return f"E_{self.param:g}"
        if self.kind == "shannon":
            return "E_inf"
        return f"r^{self.param:g}"

    def F(self, r: float) -> float:
        if r < 0:
            raise ValueError("densities are nonnegative")
        if r == 0:
            return 0.0
        if self.kind == "renyi":
            return -r ** (1.0 - 1.0 / self.param)
        if self.kind == "shannon":
            return r * math.log(r)
        return r ** self.param

    def F_prime_inf(self) -> float:
        if self.kind == "renyi":
            return 0.0
        if self.kind == "shannon":
            return math.inf
        return math.inf if self.param > 1 else 1.0


def renyi(n_dim: float) -> EntropySpec:
    if not 1 <= n_dim < math.inf:
        raise ValueError("Renyi dimension parameter must be in [1, inf)")
    return EntropySpec("renyi", float(n_dim))


def shannon() -> EntropySpec:
    return EntropySpec("shannon")


def power_test(p: float) -> EntropySpec:
    if not 1 <= p <= POWER_TEST_MAX:
        raise ValueError(f"power-test exponent must be in [1, {POWER_TEST_MAX}]")
    return EntropySpec("power", float(p))


def critical_spec(n_dim) -> EntropySpec:
    """The critical functional for a dimension bound: Renyi below infinity,
    Shannon at infinity."""
    if n_dim == math.inf:
        return shannon()
    return renyi(n_dim)


@dataclass(frozen=True)
class DistortionParams:
    """Curvature lower bound K and dimension upper bound N (may be inf)."""

    K: float
    N: float

    def __post_init__(self):
        if not (self.N >= 1):
            raise ValueError("dimension bound N must be >= 1 (or inf)")


def evaluate_entropy(spec: EntropySpec, mu, space: FiniteMetricMeasureSpace) -> float:
    """sum_i F(rho_i) m_i with rho the density of mu against the ambient
    measure.  No singular part can occur on full-support finite spaces, so
    the derivative-at-infinity term is identically absent."""
    total = 0.0
    for w, m in zip(mu.weights, space.weights):
        if w == 0:
            continue
        rho = float(w) / float(m)
        total += spec.F(rho) * float(m)
    return total


def check_dc_membership(spec: EntropySpec, n_dim: float, grid) -> bool:
    """Convexity test for membership in the dimensional class.

    Checks F(0) = 0, convexity of F on the grid, and convexity of the
    dimensional transform lam -> lam^N F(lam^-N) (N finite) or
    lam -> e^lam F(e^-lam) (N infinite) on consecutive grid triples,
    within tolerance 1e-9.
    """
    grid = sorted(float(g) for g in grid)
    if len(grid) < 3:
        raise ValueError("membership grid needs at least 3 points")
    if any(g <= 0 for g in grid):
        raise ValueError("membership grid must be strictly positive")
    tol = 1e-9

    if abs(spec.F(0.0)) > tol:
        return False

    def convex_on(f, xs):
        for x0, x1, x2 in zip(xs, xs[1:], xs[2:]):
            chord = ((x2 - x1) * f(x0) + (x1 - x0) * f(x2)) / (x2 - x0)
            if f(x1) > chord + tol:
                return False
        return True

    if not convex_on(spec.F, grid):
        return False
    if n_dim == math.inf:
        return convex_on(lambda lam: math.exp(lam) * spec.F(math.exp(-lam)),
                         [math.log(g) for g in grid])
    return convex_on(lambda lam: lam ** n_dim * spec.F(lam ** -n_dim), grid)


def beta(t: float, x: int, y: int, params: DistortionParams,
         space: FiniteMetricMeasureSpace) -> float:
    """Distortion coefficient beta_t(x, y) for the convexity inequality."""
    return beta_of_distance(t, float(space.dist[x][y]), params)


def beta_of_distance(t: float, d: float, params: DistortionParams) -> float:
    if not 0 <= t <= 1:
        raise ValueError("time parameter must lie in [0, 1]")
    K, N = params.K, params.N
    if t == 1:
        return 1.0
    if N == math.inf:
        return math.exp(K * (1.0 - t * t) * d * d / 6.0)
    if N == 1:
        return math.inf if K > 0 else 1.0
    if K == 0 or d == 0:
        return 1.0
    alpha = math.sqrt(abs(K) / (N - 1)) * d
    if K > 0:
        if alpha > math.pi:
            return math.inf
        if alpha == math.pi:
            return math.inf  # limit of the sine ratio as alpha -> pi, t < 1
        if t == 0:
            return (alpha / math.sin(alpha)) ** (N - 1)
        return (math.sin(t * alpha) / (t * math.sin(alpha))) ** (N - 1)
    if t == 0:
        return (alpha / math.sinh(alpha)) ** (N - 1)
    return (math.sinh(t * alpha) / (t * math.sinh(alpha))) ** (N - 1)


def beta_lower_bound(params: DistortionParams, D: float) -> float:
    """Closed-form infimum of beta over t in [0,1] and distances up to D.

    Stated for nonpositive curvature: 1 when K = 0 or N = 1,
    exp(K D^2 / 6) when N = inf, exp(-sqrt((N-1)|K|) D) otherwise.
    """
    K, N = params.K, params.N
    if K > 0:
        raise UnsupportedCurvatureError(
            "distortion lower bounds are stated for K <= 0")
    if D < 0:
        raise ValueError("diameter bound must be nonnegative")
    if K == 0 or N == 1:
        return 1.0
    if N == math.inf:
        return math.exp(K * D * D / 6.0)
    return math.exp(-math.sqrt((N - 1) * abs(K)) * D)
