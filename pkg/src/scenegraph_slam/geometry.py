"""Geometric primitives shared by every stage of the pipeline.

Points and directions are plain ``(3,)`` float arrays.  Poses and planes are
small immutable value objects.  Planes follow the ``n . p + d = 0``
convention throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.spatial.transform import Rotation

WORLD_UP = np.array([0.0, 0.0, 1.0])


class SemanticClass(str, Enum):
    """Building-component classes (walls and ground surfaces)."""

    WALL = "wall"
    GROUND = "ground"


class StructuralClass(str, Enum):
    """Structural-element classes inferred from building components."""

    ROOM = "room"
    FLOOR = "floor"


BUILDING_CLASSES = (SemanticClass.WALL, SemanticClass.GROUND)
STRUCTURAL_CLASSES = (StructuralClass.ROOM, StructuralClass.FLOOR)


def _frozen(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(shape)
    arr.setflags(write=False)
    return arr


def vec3(x, y=None, z=None) -> np.ndarray:
    if y is None:
        v = np.asarray(x, dtype=float).reshape(3)
    else:
        v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"non-finite vector {v}")
    return v


# --------------------------------------------------------------------------
# SO(3) helpers
# --------------------------------------------------------------------------


def skew(v) -> np.ndarray:
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def so3_exp(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < 1e-8:
        return np.eye(3) + K + 0.5 * K @ K
    a = np.sin(theta) / theta
    b = (1.0 - np.cos(theta)) / (theta * theta)
    return np.eye(3) + a * K + b * K @ K


def so3_log(R) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    cos_t = np.clip((np.trace(R) - 1.0) * 0.5, -1.0, 1.0)
    theta = np.arccos(cos_t)
    w = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    if theta < 1e-6:
        return 0.5 * w * (1.0 + theta * theta / 6.0)
    if theta < np.pi - 1e-3:
        return w * (theta / (2.0 * np.sin(theta)))
    # near pi the antisymmetric part vanishes; go through a quaternion
    return Rotation.from_matrix(R).as_rotvec()


def so3_right_jacobian_inv(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    K = skew(phi)
    if theta < 1e-6:
        return np.eye(3) + 0.5 * K + (K @ K) / 12.0
    c = 1.0 / (theta * theta) - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) + 0.5 * K + c * (K @ K)


# --------------------------------------------------------------------------
# SE(3)
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform ``p -> R p + t`` (child frame to parent frame)."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = _frozen(self.rotation, (3, 3))
        t = _frozen(self.translation, (3,))
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("pose contains non-finite values")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "PoseSE3":
        return cls()

    @classmethod
    def from_matrix(cls, T) -> "PoseSE3":
        T = np.asarray(T, dtype=float).reshape(4, 4)
        return cls(T[:3, :3], T[:3, 3])

    @classmethod
    def from_translation(cls, x, y=0.0, z=0.0) -> "PoseSE3":
        if np.ndim(x):
            return cls(np.eye(3), np.asarray(x, dtype=float))
        return cls(np.eye(3), np.array([x, y, z], dtype=float))

    @classmethod
    def from_rotvec(cls, rotvec, translation=(0.0, 0.0, 0.0)) -> "PoseSE3":
        return cls(so3_exp(rotvec), translation)

    @classmethod
    def from_yaw(cls, yaw: float, translation=(0.0, 0.0, 0.0)) -> "PoseSE3":
        return cls(so3_exp([0.0, 0.0, yaw]), translation)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self) -> "PoseSE3":
        Rt = self.rotation.T
        return PoseSE3(Rt, -Rt @ self.translation)

    def __matmul__(self, other: "PoseSE3") -> "PoseSE3":
        return PoseSE3(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points) -> np.ndarray:
        """Transform a point ``(3,)`` or a batch ``(N, 3)``."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def retract(self, delta) -> "PoseSE3":
        """Local update ``[dt, dphi]``: ``t + dt`` and ``R Exp(dphi)``."""
        delta = np.asarray(delta, dtype=float)
        return PoseSE3(self.rotation @ so3_exp(delta[3:]), self.translation + delta[:3])

    def orthonormality_error(self) -> float:
        return float(np.linalg.norm(self.rotation.T @ self.rotation - np.eye(3)))

    def allclose(self, other: "PoseSE3", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, atol=atol)
            and np.allclose(self.translation, other.translation, atol=atol)
        )

    def __repr__(self) -> str:
        rv = so3_log(self.rotation)
        return f"PoseSE3(rotvec={np.round(rv, 6).tolist()}, t={np.round(self.translation, 6).tolist()})"


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """Box-plus ``a [+] b``: pose ``a``, given in frame ``b``, lifted into b's parent.

    Equivalent to the matrix product ``b @ a``.
    """
    return b @ a


def inverse_compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """Box-minus ``a [-] b``: pose ``a`` expressed relative to ``b``.

    Satisfies ``compose(inverse_compose(a, b), b) == a``.
    """
    return b.inverse() @ a


def pose_log(pose: PoseSE3) -> np.ndarray:
    """Minimal 6-vector ``[t, Log(R)]`` (translation first)."""
    return np.concatenate([pose.translation, so3_log(pose.rotation)])


# --------------------------------------------------------------------------
# Planes
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Plane:
    """Oriented plane ``n . p + d = 0`` carrying its support statistics.

    ``extent`` is the axis-aligned bounding box ``[[min], [max]]`` of the
    inliers when known; ``None`` means the plane is summarised by its
    centroid alone.
    """

    normal: np.ndarray
    offset: float
    cls: SemanticClass
    centroid: np.ndarray
    inlier_count: int = 0
    extent: np.ndarray | None = None

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float).reshape(3)
        norm = np.linalg.norm(n)
        if not np.isfinite(norm) or norm == 0.0:
            raise ValueError("plane normal must be a finite nonzero vector")
        object.__setattr__(self, "normal", _frozen(n / norm, (3,)))
        object.__setattr__(self, "offset", float(self.offset) / norm)
        object.__setattr__(self, "cls", SemanticClass(self.cls))
        object.__setattr__(self, "centroid", _frozen(self.centroid, (3,)))
        object.__setattr__(self, "inlier_count", int(self.inlier_count))
        if self.inlier_count < 0:
            raise ValueError("inlier_count must be nonnegative")
        if self.extent is not None:
            object.__setattr__(self, "extent", _frozen(self.extent, (2, 3)))

    def signed_distance(self, points) -> np.ndarray | float:
        return point_plane_distance(points, self)

    def flipped(self) -> "Plane":
        return replace(self, normal=-self.normal, offset=-self.offset)

    def oriented_like(self, direction) -> "Plane":
        """Return this plane with its normal on the same side as ``direction``."""
        if float(np.dot(self.normal, direction)) < 0.0:
            return self.flipped()
        return self

    def bounds(self) -> np.ndarray:
        """Extent if known, otherwise the degenerate box at the centroid."""
        if self.extent is not None:
            return self.extent
        return np.vstack([self.centroid, self.centroid])

    def with_params(self, normal, offset) -> "Plane":
        return replace(self, normal=normal, offset=offset)

    def __repr__(self) -> str:
        n = np.round(self.normal, 5).tolist()
        return f"Plane({self.cls.value}, n={n}, d={self.offset:.5f}, inliers={self.inlier_count})"


def point_plane_distance(p, plane: Plane):
    """Signed distance ``n . p + d``; accepts a single point or an ``(N, 3)`` batch."""
    p = np.asarray(p, dtype=float)
    n = plane.normal
    if p.ndim == 1:
        return float(n[0] * p[0] + n[1] * p[1] + n[2] * p[2] + plane.offset)
    return p[:, 0] * n[0] + p[:, 1] * n[1] + p[:, 2] * n[2] + plane.offset


def aabb(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return np.vstack([pts.min(axis=0), pts.max(axis=0)])


def aabb_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean gap between two axis-aligned boxes (0 when they touch or overlap)."""
    sep = np.maximum(0.0, np.maximum(a[0] - b[1], b[0] - a[1]))
    return float(np.linalg.norm(sep))


def transform_plane(pose: PoseSE3, local: Plane) -> Plane:
    """Express a plane given in the pose's child frame in the parent frame.

    For every point ``p`` in the child frame, the returned plane satisfies
    ``n_g . (pose p) + d_g == n_l . p + d_l``.
    """
    n_g = pose.rotation @ local.normal
    d_g = local.offset - float(n_g @ pose.translation)
    extent = None
    if local.extent is not None:
        lo, hi = local.extent
        corners = np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )
        extent = aabb(pose.apply(corners))
    return Plane(
        normal=n_g,
        offset=d_g,
        cls=local.cls,
        centroid=pose.apply(local.centroid),
        inlier_count=local.inlier_count,
        extent=extent,
    )


def angle_between(n1, n2) -> float:
    """Angle in ``[0, pi]`` between two nonzero vectors."""
    n1 = np.asarray(n1, dtype=float)
    n2 = np.asarray(n2, dtype=float)
    l1 = np.linalg.norm(n1)
    l2 = np.linalg.norm(n2)
    if l1 == 0.0 or l2 == 0.0:
        raise ValueError("angle_between is undefined for zero-length vectors")
    c = float(n1 @ n2) / (l1 * l2)
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def axis_angle_unsigned(n1, n2) -> float:
    """Angle between the lines spanned by two vectors, in ``[0, pi/2]``."""
    a = angle_between(n1, n2)
    return min(a, np.pi - a)


def tangent_basis(n) -> np.ndarray:
    """Orthonormal ``(3, 2)`` basis of the plane orthogonal to unit vector ``n``."""
    b1, b2, _, _ = _tangent_basis_parts(n)
    return np.column_stack([b1, b2])


def _tangent_basis_parts(n):
    n = np.asarray(n, dtype=float)
    k = int(np.argmin(np.abs(n)))
    a = np.zeros(3)
    a[k] = 1.0
    u = np.cross(a, n)
    un = np.linalg.norm(u)
    b1 = u / un
    b2 = np.cross(n, b1)
    return b1, b2, a, un


def tangent_basis_derivatives(n):
    """Basis vectors and their derivatives with respect to ``n``.

    Returns ``(b1, b2, db1/dn, db2/dn)``; the helper axis selection is held
    fixed, which is exact everywhere except on the switching boundary.
    """
    n = np.asarray(n, dtype=float)
    b1, b2, a, un = _tangent_basis_parts(n)
    db1 = (np.eye(3) - np.outer(b1, b1)) @ skew(a) / un
    db2 = -skew(b1) + skew(n) @ db1
    return b1, b2, db1, db2


def retract_normal(n, delta2) -> np.ndarray:
    B = tangent_basis(n)
    m = np.asarray(n, dtype=float) + B @ np.asarray(delta2, dtype=float)
    return m / np.linalg.norm(m)
