"""Exception types shared across the package.

Report-style operations (metric validation, CD checks, density checks)
return structured results instead of raising; exceptions are reserved for
broken preconditions, unusable inputs and truncation in contexts that
demand completeness.
"""
from __future__ import annotations


class CdknError(Exception):
    """Base class for all package errors."""


class MetricError(CdknError):
    """A distance matrix violates the metric axioms; carries the report."""

    def __init__(self, report):
        self.report = report
        super().__init__(str(report))


class ParseError(CdknError):
    """A space file could not be parsed; message carries the position."""


class DisconnectedGraphError(CdknError):
    """Graph-form space input is not connected."""


class UnknownExampleError(CdknError):
    """Requested example generator does not exist."""


class EmptyChainSetError(CdknError):
    """No admissible chain exists between the endpoints at this resolution.

    Signals that the discretization is too coarse for the pair.
    """

    def __init__(self, x, y, k, eps_geo):
        self.endpoints = (x, y)
        self.k = k
        self.eps_geo = eps_geo
        super().__init__(
            f"no chain between points {x} and {y} at resolution k={k}, "
            f"eps_geo={eps_geo}"
        )


class OffGridTimeError(CdknError):
    """Evaluation time does not lie on the chain grid {0, 1/k, ..., 1}."""


class ResolutionMismatchError(CdknError):
    """Two chains with different endpoints or resolutions were compared."""


class SolverFailureError(CdknError):
    """The transport solver failed to reach a verified optimum."""


class SizeLimitError(CdknError):
    """Instance is too large for an exhaustive oracle."""


class ZeroMassRestrictionError(CdknError):
    """Plan restriction selected zero total weight."""


class NotAnUpperGradientError(CdknError):
    """Candidate gradient fails the chain inequality; carries a witness."""

    def __init__(self, chain, lhs, rhs):
        self.chain = chain
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(
            f"upper-gradient inequality fails on a chain: |du|={lhs} > {rhs}"
        )


class InsideBallViolationError(CdknError):
    """A chain node left the ball it was required to stay in."""

    def __init__(self, chain, node, distance, radius):
        self.chain = chain
        self.node = node
        self.distance = distance
        self.radius = radius
        super().__init__(
            f"chain node {node} at distance {distance} exits ball of radius {radius}"
        )


class PreconditionError(CdknError):
    """An operation precondition does not hold for the supplied inputs."""


class UnsupportedCurvatureError(CdknError):
    """Closed-form distortion lower bounds are stated for K <= 0 only."""


class GridTooCoarseError(CdknError):
    """No grid time pair satisfies the branch-interval condition.

    Carries the minimal resolution that would admit one.
    """

    def __init__(self, k, n_dim, k_min):
        self.k = k
        self.n_dim = n_dim
        self.k_min = k_min
        super().__init__(
            f"k={k} admits no valid time interval for N={n_dim}; need k >= {k_min}"
        )
