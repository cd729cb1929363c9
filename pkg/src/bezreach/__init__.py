"""Bezier reachable polytopes for planner-tracker control stacks."""

from .bezier import (
    BezierCurve,
    basis_matrix,
    bernstein_basis,
    boundary_matrix,
    derivative_map,
    diff_matrix,
    elevation_matrix,
    solve_boundary,
    split_matrices,
    vectorization_maps,
)
from .constraints import (
    CertificatePolytope,
    InfeasibleCertificateError,
    LiftedLinearConstraints,
    MixedConstraintRow,
    control_point_polytope,
    input_bound_row,
    lift_rows,
    refined_polytope,
    sigma_box,
    state_bound_rows,
)
from .lp import (
    LPResult,
    Polytope,
    bounding_box,
    feasible,
    maximize,
    polygon_vertices,
    reduce_2d,
)
from .models import (
    ConstraintSet,
    PlanningModel,
    SingularActuationError,
    TrackingCertificate,
    flat_input,
    integrator_chain,
    pendulum_energy_controller,
    pendulum_model,
    validate_lipschitz,
)
from .planner import (
    PlannedTrajectory,
    ReachGraph,
    UnreachableGoalError,
    build_graph,
    controlled_waypoints,
    extract_trajectory,
    sample_vertices,
    search,
)
from .reachability import ReachSpec, sample_cloud, volume_estimate
from .sim import DivergenceError, MarginReport, RolloutResult, monitor, rollout

__all__ = [
    "BezierCurve",
    "CertificatePolytope",
    "ConstraintSet",
    "DivergenceError",
    "InfeasibleCertificateError",
    "LPResult",
    "LiftedLinearConstraints",
    "MarginReport",
    "MixedConstraintRow",
    "PlannedTrajectory",
    "PlanningModel",
    "Polytope",
    "ReachGraph",
    "ReachSpec",
    "RolloutResult",
    "SingularActuationError",
    "TrackingCertificate",
    "UnreachableGoalError",
    "basis_matrix",
    "bernstein_basis",
    "boundary_matrix",
    "bounding_box",
    "build_graph",
    "control_point_polytope",
    "controlled_waypoints",
    "derivative_map",
    "diff_matrix",
    "elevation_matrix",
    "extract_trajectory",
    "feasible",
    "flat_input",
    "input_bound_row",
    "integrator_chain",
    "lift_rows",
    "maximize",
    "monitor",
    "pendulum_energy_controller",
    "pendulum_model",
    "polygon_vertices",
    "reduce_2d",
    "refined_polytope",
    "rollout",
    "sample_cloud",
    "sample_vertices",
    "search",
    "sigma_box",
    "solve_boundary",
    "split_matrices",
    "state_bound_rows",
    "validate_lipschitz",
    "vectorization_maps",
    "volume_estimate",
]
