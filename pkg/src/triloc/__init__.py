"""Riemannian 3D localization of a rigid transmitter triangle from range data."""

from .errors import (
    ConfigError,
    DegenerateGeometry,
    FrameOverflow,
    NearSingularGram,
    NoPeak,
    NotCoprime,
    OffManifold,
    RankDeficient,
    RetractionDomain,
    SingularFIM,
    SingularGeometry,
    SingularProjectedFIM,
    TrilocError,
)
from .manifold import (
    TrianglePoint,
    constraint_derivative,
    constraint_residual,
    random_point,
    random_tangent,
    retract,
    riemannian_gradient,
    riemannian_hessian,
    solve_normal_coeffs,
    tangent_project,
    vector_transport,
)
from .config import ExperimentConfig, default_config, load_config, parse_config
from .validate import CheckResult, render_table, run_checks
from .bounds import (
    FisherBundle,
    assemble_fim,
    ccrb,
    constraint_jacobian,
    crb,
    fim_blocks,
    fisher_bundle,
    link_weight,
    nullspace_basis,
    triangle_constraints,
)
from .objective import (
    BeaconSet,
    MeasurementSet,
    SmoothCost,
    localization_cost,
    projection_cost,
    true_ranges,
)
from .signal import (
    ReceivedFrame,
    SignalParams,
    ZcSequence,
    estimate_range,
    simulate_link,
    zadoff_chu,
)
from .sim import (
    INIT_MODES,
    SOLVER_IDS,
    Scenario,
    SummaryStats,
    TrialRecord,
    bound_curves,
    direct_sigma,
    measure_ranges,
    run_sweep,
    run_trial,
)
from .solvers import (
    SolverConfig,
    SolverReport,
    SolverStatus,
    gauss_newton_trilateration,
    improved_init,
    riemannian_newton,
    riemannian_steepest_descent,
    riemannian_trust_region,
    tangent_basis,
)

__version__ = "0.1.0"

__all__ = [
    "TrianglePoint",
    "constraint_derivative",
    "constraint_residual",
    "random_point",
    "random_tangent",
    "retract",
    "riemannian_gradient",
    "riemannian_hessian",
    "solve_normal_coeffs",
    "tangent_project",
    "vector_transport",
    "BeaconSet",
    "MeasurementSet",
    "SmoothCost",
    "localization_cost",
    "projection_cost",
    "true_ranges",
    "SolverConfig",
    "SolverReport",
    "SolverStatus",
    "gauss_newton_trilateration",
    "improved_init",
    "riemannian_newton",
    "riemannian_steepest_descent",
    "riemannian_trust_region",
    "tangent_basis",
    "SignalParams",
    "ZcSequence",
    "ReceivedFrame",
    "zadoff_chu",
    "simulate_link",
    "estimate_range",
    "FisherBundle",
    "link_weight",
    "fim_blocks",
    "assemble_fim",
    "crb",
    "triangle_constraints",
    "constraint_jacobian",
    "nullspace_basis",
    "ccrb",
    "fisher_bundle",
    "Scenario",
    "TrialRecord",
    "SummaryStats",
    "SOLVER_IDS",
    "INIT_MODES",
    "direct_sigma",
    "measure_ranges",
    "run_trial",
    "run_sweep",
    "bound_curves",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "default_config",
    "CheckResult",
    "run_checks",
    "render_table",
    "TrilocError",
    "OffManifold",
    "NearSingularGram",
    "RetractionDomain",
    "SingularGeometry",
    "DegenerateGeometry",
    "SingularFIM",
    "SingularProjectedFIM",
    "RankDeficient",
    "NotCoprime",
    "FrameOverflow",
    "NoPeak",
    "ConfigError",
    "__version__",
]
