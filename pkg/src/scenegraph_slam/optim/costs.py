"""Scalar structural costs and the raw residuals behind the factors."""

from __future__ import annotations

from math import pi

import numpy as np

from ..geometry import Plane, PoseSE3, axis_angle_unsigned, compose, inverse_compose, pose_log, tangent_basis, transform_plane


def parallel_cost(n_i, n_j) -> float:
    """``1 - |n_i . n_j|``: zero for parallel normals, one for orthogonal ones."""
    return 1.0 - abs(float(np.dot(n_i, n_j)))


def perpendicular_cost(n_i, n_j) -> float:
    """``|n_i . n_j|``: zero for orthogonal normals, one for parallel ones."""
    return abs(float(np.dot(n_i, n_j)))


def room_centroid_cost(room_centroid, wall_centroids) -> float:
    c = np.asarray(wall_centroids, dtype=float).reshape(-1, 3)
    if c.shape[0] == 0:
        raise ValueError("room centroid cost needs at least one wall centroid")
    diff = np.asarray(room_centroid, dtype=float) - c.sum(axis=0) / c.shape[0]
    return float(diff @ diff)


def floor_cost(floor_centroid, room_centroids, information=None) -> float:
    """Squared Mahalanobis distance of the floor centroid from the mean room centroid."""
    c = np.asarray(room_centroids, dtype=float).reshape(-1, 3)
    if c.shape[0] == 0:
        raise ValueError("floor cost needs at least one room centroid")
    info = np.eye(3) if information is None else np.asarray(information, dtype=float).reshape(3, 3)
    diff = np.asarray(floor_centroid, dtype=float) - c.sum(axis=0) / c.shape[0]
    return float(diff @ info @ diff)


def classify_wall_pairs(room, g, angle_tol: float):
    """Split a room's wall pairs into parallel and perpendicular lists.

    Parallel pairs must also face each other across the free space, which
    with room-oriented normals means the oriented normals are opposed.
    """
    walls = list(room.walls)
    signs = list(room.wall_signs) if room.wall_signs else [1] * len(walls)
    parallel, perpendicular = [], []
    for a in range(len(walls)):
        for b in range(a + 1, len(walls)):
            ni = g.components[walls[a]].plane.normal
            nj = g.components[walls[b]].plane.normal
            ang = axis_angle_unsigned(ni, nj)
            if ang <= angle_tol:
                if signs[a] * signs[b] * float(ni @ nj) < 0.0:
                    parallel.append((walls[a], walls[b]))
            elif abs(ang - pi / 2) <= angle_tol:
                perpendicular.append((walls[a], walls[b]))
    return parallel, perpendicular


def room_total_cost(room, g, angle_tol: float) -> float:
    """Normalized pair costs plus the centroid term; empty pair sums contribute nothing."""
    par, perp = classify_wall_pairs(room, g, angle_tol)
    n = {w: g.components[w].plane.normal for w in room.walls}
    total = 0.0
    if par:
        total += sum(parallel_cost(n[i], n[j]) for i, j in par) / len(par)
    if perp:
        total += sum(perpendicular_cost(n[i], n[j]) for i, j in perp) / len(perp)
    total += room_centroid_cost(room.centroid, [g.components[w].plane.centroid for w in room.walls])
    return total


def marker_residual(kf_pose: PoseSE3, marker_global: PoseSE3, local_obs: PoseSE3) -> np.ndarray:
    """Log of the gap between the predicted and the mapped marker pose, ``[t, rot]``."""
    return pose_log(inverse_compose(compose(local_obs, kf_pose), marker_global))


def plane_observation_residual(kf_pose: PoseSE3, map_plane: Plane, local_plane: Plane) -> np.ndarray:
    """Tangent-plane normal deviation (2) and offset difference (1).

    The observed normal is taken on the map plane's side before comparing.
    Offsets are compared as signed distances from the keyframe origin, which
    equals the plain offset difference when the normals agree and keeps the
    residual independent of the world frame.
    """
    obs = transform_plane(kf_pose, local_plane)
    n_g, d_g = obs.normal, obs.offset
    if float(n_g @ map_plane.normal) < 0.0:
        n_g, d_g = -n_g, -d_g
    B = tangent_basis(map_plane.normal)
    dn = n_g - map_plane.normal
    t = kf_pose.translation
    dd = (d_g + float(n_g @ t)) - (map_plane.offset + float(map_plane.normal @ t))
    return np.array([B[:, 0] @ dn, B[:, 1] @ dn, dd])
