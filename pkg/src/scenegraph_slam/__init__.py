"""Hierarchical scene graphs from labeled point-cloud keyframes, with joint plane/pose refinement."""

from .geometry import (
    Plane,
    PoseSE3,
    SemanticClass,
    StructuralClass,
    angle_between,
    compose,
    inverse_compose,
    point_plane_distance,
    transform_plane,
)

__version__ = "0.1.0"

__all__ = [
    "Plane",
    "PoseSE3",
    "SemanticClass",
    "StructuralClass",
    "angle_between",
    "compose",
    "inverse_compose",
    "point_plane_distance",
    "transform_plane",
]
