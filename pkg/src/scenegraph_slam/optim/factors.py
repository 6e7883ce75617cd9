"""Variables and factors with analytic Jacobians on the local parameterizations.

Local updates: poses take ``[dt, dphi]`` (``t + dt``, ``R Exp(dphi)``);
planes take ``[d1, d2, dd]`` (normal moved along its tangent basis and
re-normalized, offset shifted); points take a plain 3-vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import (
    Plane,
    PoseSE3,
    pose_log,
    retract_normal,
    skew,
    so3_log,
    so3_right_jacobian_inv,
    tangent_basis,
    tangent_basis_derivatives,
)

POSE, PLANE, POINT = "pose", "plane", "point3"
DIMS = {POSE: 6, PLANE: 3, POINT: 3}


@dataclass
class Variable:
    kind: str
    id: str
    value: object
    fixed: bool = False

    def __post_init__(self):
        if self.kind not in DIMS:
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.kind == POINT:
            self.value = np.asarray(self.value, dtype=float).reshape(3)

    @property
    def dim(self) -> int:
        return DIMS[self.kind]


def retract(kind: str, value, delta):
    delta = np.asarray(delta, dtype=float)
    if kind == POSE:
        return value.retract(delta)
    if kind == PLANE:
        return value.with_params(retract_normal(value.normal, delta[:2]), value.offset + delta[2])
    return value + delta


class Factor:
    """Base factor; ``residual`` and ``jacobians`` take the values of ``keys`` in order."""

    kind = "factor"

    def __init__(self, keys, information, robust=None):
        self.keys = tuple(keys)
        self.information = np.atleast_2d(np.asarray(information, dtype=float))
        info = self.information
        if info.shape[0] != info.shape[1] or not np.allclose(info, info.T, atol=1e-9 * max(1.0, np.abs(info).max())):
            raise ValueError(f"{self.kind}: information matrix must be square and symmetric")
        if np.linalg.eigvalsh(info).min() < -1e-9 * max(1.0, np.abs(info).max()):
            raise ValueError(f"{self.kind}: information matrix must be positive semidefinite")
        self.robust = robust  # None or ("huber", delta)

    @property
    def dim(self) -> int:
        return self.information.shape[0]

    def residual(self, *vals) -> np.ndarray:
        raise NotImplementedError

    def jacobians(self, *vals) -> list[np.ndarray]:
        raise NotImplementedError

    def robust_weights(self, r: np.ndarray) -> tuple[float, float]:
        """(IRLS weight, cost scale) for residual ``r``; Huber acts on the raw norm."""
        if self.robust is None:
            return 1.0, 1.0
        delta = float(self.robust[1])
        s = float(np.linalg.norm(r))
        if s <= delta:
            return 1.0, 1.0
        return delta / s, 2.0 * delta / s - (delta / s) ** 2

    def cost(self, *vals) -> float:
        r = self.residual(*vals)
        _, scale = self.robust_weights(r)
        return scale * float(r @ self.information @ r)

    # measurement serialization for the text dump
    def measurement_tokens(self) -> list[float]:
        return []


def _pose_tokens(p: PoseSE3) -> list[float]:
    return [*p.rotation.reshape(-1), *p.translation]


def _pose_from(tokens) -> PoseSE3:
    t = np.asarray(tokens, dtype=float)
    R = t[:9].reshape(3, 3)
    # keep already-orthonormal input verbatim so text round trips are exact
    if np.abs(R.T @ R - np.eye(3)).max() > 1e-12 or np.linalg.det(R) <= 0:
        u, _, vt = np.linalg.svd(R)
        R = u @ vt
    return PoseSE3(R, t[9:12])


class OdometryFactor(Factor):
    """Relative motion ``Z`` between poses ``i`` and ``j``; residual ``log(Z^-1 T_i^-1 T_j)``."""

    kind = "odometry"

    def __init__(self, key_i, key_j, measurement: PoseSE3, information):
        super().__init__((key_i, key_j), information)
        self.measurement = measurement

    def residual(self, Ti: PoseSE3, Tj: PoseSE3) -> np.ndarray:
        return pose_log(self.measurement.inverse() @ Ti.inverse() @ Tj)

    def jacobians(self, Ti: PoseSE3, Tj: PoseSE3):
        Z = self.measurement
        Ri, Rj, Rz = Ti.rotation, Tj.rotation, Z.rotation
        v = Ri.T @ (Tj.translation - Ti.translation)
        RE = Rz.T @ Ri.T @ Rj
        Jr_inv = so3_right_jacobian_inv(so3_log(RE))
        Ji = np.zeros((6, 6))
        Jj = np.zeros((6, 6))
        Ji[:3, :3] = -Rz.T @ Ri.T
        Ji[:3, 3:] = Rz.T @ skew(v)
        Ji[3:, 3:] = -Jr_inv @ Rj.T @ Ri
        Jj[:3, :3] = Rz.T @ Ri.T
        Jj[3:, 3:] = Jr_inv
        return [Ji, Jj]

    def measurement_tokens(self):
        return _pose_tokens(self.measurement)


class MarkerFactor(Factor):
    """Marker seen at ``L`` from keyframe ``K``; residual ``log(M^-1 K L)``."""

    kind = "marker_pose"

    def __init__(self, key_kf, key_marker, measurement: PoseSE3, information):
        super().__init__((key_kf, key_marker), information)
        self.measurement = measurement

    def residual(self, K: PoseSE3, M: PoseSE3) -> np.ndarray:
        return pose_log(M.inverse() @ K @ self.measurement)

    def jacobians(self, K: PoseSE3, M: PoseSE3):
        L = self.measurement
        E = M.inverse() @ K @ L
        RM, RK = M.rotation, K.rotation
        Jr_inv = so3_right_jacobian_inv(so3_log(E.rotation))
        JK = np.zeros((6, 6))
        JM = np.zeros((6, 6))
        JK[:3, :3] = RM.T
        JK[:3, 3:] = -RM.T @ RK @ skew(L.translation)
        JK[3:, 3:] = Jr_inv @ L.rotation.T
        JM[:3, :3] = -RM.T
        JM[:3, 3:] = skew(E.translation)
        JM[3:, 3:] = -Jr_inv @ E.rotation.T
        return [JK, JM]

    def measurement_tokens(self):
        return _pose_tokens(self.measurement)


class PlaneObservationFactor(Factor):
    """A keyframe's sensor-frame detection of a map plane."""

    kind = "plane_observation"

    def __init__(self, key_pose, key_plane, local: Plane, information, robust=("huber", 0.1)):
        super().__init__((key_pose, key_plane), information, robust)
        self.local = local

    def align(self, T: PoseSE3, plane: Plane) -> None:
        """Flip the stored detection so its world normal agrees with the map plane."""
        if float((T.rotation @ self.local.normal) @ plane.normal) < 0.0:
            self.local = self.local.flipped()

    def _predict(self, T: PoseSE3):
        n_g = T.rotation @ self.local.normal
        return n_g, self.local.offset - float(n_g @ T.translation)

    def residual(self, T: PoseSE3, plane: Plane) -> np.ndarray:
        n_g = T.rotation @ self.local.normal
        B = tangent_basis(plane.normal)
        dn = n_g - plane.normal
        # offsets compared as signed distances from the sensor origin
        dd = self.local.offset - float(plane.normal @ T.translation) - plane.offset
        return np.array([B[:, 0] @ dn, B[:, 1] @ dn, dd])

    def jacobians(self, T: PoseSE3, plane: Plane):
        n_g, _ = self._predict(T)
        n_m = plane.normal
        b1, b2, db1, db2 = tangent_basis_derivatives(n_m)
        B = np.column_stack([b1, b2])
        dn_dphi = -T.rotation @ skew(self.local.normal)
        Jx = np.zeros((3, 6))
        Jx[0, 3:] = b1 @ dn_dphi
        Jx[1, 3:] = b2 @ dn_dphi
        Jx[2, :3] = -n_m
        v = n_g - n_m
        Jp = np.zeros((3, 3))
        Jp[0, :2] = v @ db1 @ B - np.array([1.0, 0.0])
        Jp[1, :2] = v @ db2 @ B - np.array([0.0, 1.0])
        Jp[2, :2] = -T.translation @ B
        Jp[2, 2] = -1.0
        return [Jx, Jp]

    def measurement_tokens(self):
        return [*self.local.normal, self.local.offset]


class ParallelFactor(Factor):
    """Residual ``sqrt(1 - |n_i . n_j|)``; its square is the parallelism cost."""

    kind = "room_parallel"

    def __init__(self, key_i, key_j, weight: float = 1.0):
        super().__init__((key_i, key_j), [[weight]])

    def residual(self, pi: Plane, pj: Plane) -> np.ndarray:
        c = abs(float(pi.normal @ pj.normal))
        return np.array([np.sqrt(max(1.0 - c, 0.0))])

    def jacobians(self, pi: Plane, pj: Plane):
        dot = float(pi.normal @ pj.normal)
        r = np.sqrt(max(1.0 - abs(dot), 0.0))
        if r < 1e-12:
            return [np.zeros((1, 3)), np.zeros((1, 3))]
        k = -np.sign(dot) / (2.0 * r)
        Ji = np.zeros((1, 3))
        Jj = np.zeros((1, 3))
        Ji[0, :2] = k * (pj.normal @ tangent_basis(pi.normal))
        Jj[0, :2] = k * (pi.normal @ tangent_basis(pj.normal))
        return [Ji, Jj]


class PerpendicularFactor(Factor):
    """Residual ``n_i . n_j``: smooth at the optimum, square of the perpendicularity cost."""

    kind = "room_perpendicular"

    def __init__(self, key_i, key_j, weight: float = 1.0):
        super().__init__((key_i, key_j), [[weight]])

    def residual(self, pi: Plane, pj: Plane) -> np.ndarray:
        return np.array([float(pi.normal @ pj.normal)])

    def jacobians(self, pi: Plane, pj: Plane):
        Ji = np.zeros((1, 3))
        Jj = np.zeros((1, 3))
        Ji[0, :2] = pj.normal @ tangent_basis(pi.normal)
        Jj[0, :2] = pi.normal @ tangent_basis(pj.normal)
        return [Ji, Jj]


def _project_onto(c: np.ndarray, plane: Plane) -> np.ndarray:
    return c - (float(plane.normal @ c) + plane.offset) * plane.normal


class RoomCentroidFactor(Factor):
    """Room centroid versus the mean of its wall centroids (each kept on its wall plane).

    Keys: the room point followed by the wall planes; ``anchors`` are the wall
    centroids, re-projected onto the current plane estimates.
    """

    kind = "room_centroid"

    def __init__(self, key_room, wall_keys, anchors, information=None):
        super().__init__((key_room, *wall_keys), np.eye(3) if information is None else information)
        self.anchors = np.asarray(anchors, dtype=float).reshape(-1, 3)
        if self.anchors.shape[0] != len(wall_keys) or not wall_keys:
            raise ValueError("room_centroid: need one anchor per wall and at least one wall")

    def residual(self, room, *walls) -> np.ndarray:
        proj = [_project_onto(c, w) for c, w in zip(self.anchors, walls)]
        return np.asarray(room) - np.mean(proj, axis=0)

    def jacobians(self, room, *walls):
        k = len(walls)
        out = [np.eye(3)]
        for c, w in zip(self.anchors, walls):
            n = w.normal
            dist = float(n @ c) + w.offset
            dc_dn = -np.outer(n, c) - dist * np.eye(3)
            J = np.zeros((3, 3))
            J[:, :2] = -(dc_dn @ tangent_basis(n)) / k
            J[:, 2] = n / k
            out.append(J)
        return out

    def measurement_tokens(self):
        return list(self.anchors.reshape(-1))


class FloorCentroidFactor(Factor):
    """Floor centroid versus the mean of its room centroids."""

    kind = "floor_centroid"

    def __init__(self, key_floor, room_keys, information=None):
        if not room_keys:
            raise ValueError("floor_centroid: need at least one room")
        super().__init__((key_floor, *room_keys), np.eye(3) if information is None else information)

    def residual(self, floor, *rooms) -> np.ndarray:
        return np.asarray(floor) - np.mean(np.asarray(rooms), axis=0)

    def jacobians(self, floor, *rooms):
        k = len(rooms)
        return [np.eye(3)] + [-np.eye(3) / k for _ in rooms]


FACTOR_KINDS = {
    cls.kind: cls
    for cls in (
        OdometryFactor,
        MarkerFactor,
        PlaneObservationFactor,
        ParallelFactor,
        PerpendicularFactor,
        RoomCentroidFactor,
        FloorCentroidFactor,
    )
}


def numeric_jacobian(fun, values, kinds, h: float = 1e-6) -> list[np.ndarray]:
    """Central differences of ``fun(*values)`` along each value's local parameterization."""
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    values = list(values)
    out = []
    for k, (val, kind) in enumerate(zip(values, kinds)):
        cols = []
        for a in range(DIMS[kind]):
            e = np.zeros(DIMS[kind])
            e[a] = h
            plus = values.copy()
            minus = values.copy()
            plus[k] = retract(kind, val, e)
            minus[k] = retract(kind, val, -e)
            cols.append((np.asarray(fun(*plus)) - np.asarray(fun(*minus))) / (2 * h))
        out.append(np.column_stack(cols))
    return out
