"""Scene graph <-> optimization problem."""

from __future__ import annotations

from dataclasses import dataclass
from math import radians

import numpy as np

from ..atlas import SceneGraph
from ..entities import Marker
from ..geometry import Plane, PoseSE3
from .costs import classify_wall_pairs
from .factors import (
    PLANE,
    POINT,
    POSE,
    FloorCentroidFactor,
    MarkerFactor,
    OdometryFactor,
    ParallelFactor,
    PerpendicularFactor,
    PlaneObservationFactor,
    RoomCentroidFactor,
)
from .problem import Problem, SolverConfig


@dataclass(frozen=True)
class FactorConfig:
    plane_normal_sigma: float = 0.01
    plane_offset_sigma: float = 0.01
    huber_delta: float = 0.1
    pair_angle_tol: float = radians(10.0)
    room_weight: float = 1.0
    floor_weight: float = 1.0

    def __post_init__(self):
        for name in ("plane_normal_sigma", "plane_offset_sigma", "huber_delta", "pair_angle_tol", "room_weight", "floor_weight"):
            if not getattr(self, name) > 0:
                raise ValueError(f"factors.{name} must be positive")


def pose_key(k: int) -> str:
    return f"x{k}"


def plane_key(c: int) -> str:
    return f"p{c}"


def room_key(r: int) -> str:
    return f"r{r}"


def floor_key(f: int) -> str:
    return f"f{f}"


def marker_key(m: int) -> str:
    return f"m{m}"


def build_problem(
    g: SceneGraph,
    odometry=(),
    cfg: FactorConfig | None = None,
    solver: SolverConfig | None = None,
) -> Problem:
    """Odometry, plane-observation, room, floor and marker factors over the graph.

    ``odometry`` holds ``(i, j, Z_ij, information)`` tuples; the first
    keyframe pose is held fixed.
    """
    cfg = cfg or FactorConfig()
    prob = Problem(config=solver or SolverConfig())
    kf_ids = sorted(g.keyframes)
    for n, k in enumerate(kf_ids):
        prob.add_variable(POSE, pose_key(k), g.keyframes[k].pose, fixed=(n == 0))
    for i, j, z, info in odometry:
        if i in g.keyframes and j in g.keyframes:
            prob.add_factor(OdometryFactor(pose_key(i), pose_key(j), z, info))

    obs_info = np.diag([1 / cfg.plane_normal_sigma**2] * 2 + [1 / cfg.plane_offset_sigma**2])
    for cid, comp in sorted(g.components.items()):
        prob.add_variable(PLANE, plane_key(cid), comp.plane)
        for kf, local in comp.observations:
            if kf not in g.keyframes:
                continue
            f = PlaneObservationFactor(pose_key(kf), plane_key(cid), local, obs_info, ("huber", cfg.huber_delta))
            f.align(g.keyframes[kf].pose, comp.plane)
            prob.add_factor(f)

    for rid, room in sorted(g.rooms.items()):
        prob.add_variable(POINT, room_key(rid), room.centroid)
        walls = [plane_key(w) for w in room.walls]
        anchors = [g.components[w].plane.centroid for w in room.walls]
        prob.add_factor(RoomCentroidFactor(room_key(rid), walls, anchors, cfg.room_weight * np.eye(3)))
        par, perp = classify_wall_pairs(room, g, cfg.pair_angle_tol)
        for i, j in par:
            prob.add_factor(ParallelFactor(plane_key(i), plane_key(j), cfg.room_weight / len(par)))
        for i, j in perp:
            prob.add_factor(PerpendicularFactor(plane_key(i), plane_key(j), cfg.room_weight / len(perp)))

    if g.floor is not None and g.floor.rooms:
        prob.add_variable(POINT, floor_key(g.floor.id), g.floor.centroid)
        prob.add_factor(
            FloorCentroidFactor(floor_key(g.floor.id), [room_key(r) for r in g.floor.rooms], cfg.floor_weight * np.eye(3))
        )

    for mid, marker in sorted(g.markers.items()):
        prob.add_variable(POSE, marker_key(mid), marker.pose)
    for k in kf_ids:
        for obs in g.keyframes[k].markers:
            if obs.marker_id in g.markers:
                prob.add_factor(MarkerFactor(pose_key(k), marker_key(obs.marker_id), obs.local_pose, obs.information))
    return prob


def _project(c, plane: Plane) -> np.ndarray:
    return c - (float(plane.normal @ c) + plane.offset) * plane.normal


def write_back(g: SceneGraph, values: dict) -> SceneGraph:
    """Copy solved values into the graph; plane centroids and extents follow their planes."""
    with g.writer():
        for k, kf in g.keyframes.items():
            if pose_key(k) in values:
                kf.pose = values[pose_key(k)]
        for cid, comp in g.components.items():
            p = values.get(plane_key(cid))
            if p is None or (np.array_equal(p.normal, comp.plane.normal) and p.offset == comp.plane.offset):
                continue
            centroid = _project(comp.plane.centroid, p)
            shift = centroid - comp.plane.centroid
            extent = None if comp.plane.extent is None else comp.plane.extent + shift
            comp.plane = Plane(p.normal, p.offset, p.cls, centroid, p.inlier_count, extent)
        for rid, room in g.rooms.items():
            if room_key(rid) in values:
                room.centroid = np.asarray(values[room_key(rid)], dtype=float)
        if g.floor is not None and floor_key(g.floor.id) in values:
            g.floor.centroid = np.asarray(values[floor_key(g.floor.id)], dtype=float)
        for mid in list(g.markers):
            if marker_key(mid) in values:
                g.markers[mid] = Marker(mid, values[marker_key(mid)])
    return g
