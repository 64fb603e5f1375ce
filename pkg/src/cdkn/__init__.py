"""Curvature-dimension machinery on finite metric measure spaces.

Optimal transport plans and displacement interpolation, entropy convexity
and CD(K, N) checking, local Poincare certificates with explicit
constants, and geodesic-branching detection.
"""
from .space import (
    Ball,
    FiniteMetricMeasureSpace,
    ball,
    default_radius_sweep,
    diameter,
    doubling_constant,
    validate_metric,
)
from .geodesics import (
    ChainSet,
    GeodesicChain,
    chain_length,
    default_eps_geo,
    distinct,
    enumerate_chains,
    evaluate,
    subchain,
)
from .transport import (
    Coupling,
    DynamicalPlan,
    OptimalPlanFamily,
    ProbMeasure,
    enumerate_optimal_plans,
    interpolate,
    make_plan,
    optimal_dynamical_plan,
    plan_marginal,
    restrict_plan,
    slice_plan,
    w2,
    w2_brute_force,
)
from .entropy import (
    DistortionParams,
    EntropySpec,
    beta,
    beta_lower_bound,
    beta_of_distance,
    check_dc_membership,
    critical_spec,
    evaluate_entropy,
    power_test,
    renyi,
    shannon,
)
from .cd_verify import (
    CdReport,
    ConvexityViolation,
    FlowTrajectory,
    cd_rhs,
    cd_test_family,
    check_cd,
    check_density_bound_cd,
    check_density_bound_strong,
    check_strong_displacement_convexity,
    convexity_gap,
    evi_check,
    sample_measure_pairs,
)
from .poincare import (
    MedianSplit,
    PoincareCertificate,
    UpperGradient,
    certify_strong_poincare,
    certify_weak_poincare,
    default_function_suite,
    median_split,
    poincare_sweep,
    slope_gradient,
    verify_upper_gradient,
)
from .uniqueness import (
    BranchSearchResult,
    BranchSearchState,
    MultiplicityReport,
    branch_violation_search,
    interval_condition,
    multiplicity_report,
)
from .generators import generate_example
from .spacefile import RunReport, SpaceFile, load_space, save_space

__version__ = "0.1.0"
