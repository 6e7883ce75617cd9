"""Joint least-squares refinement of poses, planes, rooms and the floor."""

from .build import FactorConfig, build_problem, write_back
from .costs import (
    classify_wall_pairs,
    floor_cost,
    marker_residual,
    parallel_cost,
    perpendicular_cost,
    plane_observation_residual,
    room_centroid_cost,
    room_total_cost,
)
from .factors import (
    FACTOR_KINDS,
    Factor,
    FloorCentroidFactor,
    MarkerFactor,
    OdometryFactor,
    ParallelFactor,
    PerpendicularFactor,
    PlaneObservationFactor,
    RoomCentroidFactor,
    Variable,
    numeric_jacobian,
)
from .problem import Problem, ProblemError, SolveResult, SolverConfig, dump_problem, load_problem, solve

__all__ = [
    "FACTOR_KINDS",
    "Factor",
    "FactorConfig",
    "FloorCentroidFactor",
    "MarkerFactor",
    "OdometryFactor",
    "ParallelFactor",
    "PerpendicularFactor",
    "PlaneObservationFactor",
    "RoomCentroidFactor",
    "Problem",
    "ProblemError",
    "SolveResult",
    "SolverConfig",
    "Variable",
    "build_problem",
    "classify_wall_pairs",
    "dump_problem",
    "floor_cost",
    "load_problem",
    "marker_residual",
    "numeric_jacobian",
    "parallel_cost",
    "perpendicular_cost",
    "plane_observation_residual",
    "room_centroid_cost",
    "room_total_cost",
    "solve",
    "write_back",
]
