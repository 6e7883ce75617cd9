"""Per-keyframe building-component recognition.

Labeled cloud -> semantic filter -> voxel downsample -> range filter ->
sequential RANSAC per class -> structural validation -> world frame.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import radians

import numpy as np
from scipy import ndimage

from . import kernels
from .entities import DEFAULT_CLASS_IDS, KeyFrame, LabeledCloud
from .geometry import (
    BUILDING_CLASSES,
    WORLD_UP,
    Plane,
    SemanticClass,
    aabb,
    angle_between,
    tangent_basis,
    transform_plane,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RecognitionConfig:
    min_confidence: float = 0.5
    voxel_leaf: float = 0.05
    depth_min: float = 0.3
    depth_max: float = 5.0
    ransac_inlier_tol: float = 0.02
    ransac_iterations: int = 400
    min_inliers: int = 100
    max_planes_per_class: int = 6
    verticality_tol: float = radians(10.0)
    horizontality_tol: float = radians(10.0)
    cluster_gap: float = 0.5

    def __post_init__(self):
        for name in (
            "min_confidence",
            "voxel_leaf",
            "depth_max",
            "ransac_inlier_tol",
            "ransac_iterations",
            "min_inliers",
            "max_planes_per_class",
            "verticality_tol",
            "horizontality_tol",
            "cluster_gap",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"recognition.{name} must be positive")
        if not 0.0 <= self.depth_min < self.depth_max:
            raise ValueError("recognition.depth_min must satisfy 0 <= depth_min < depth_max")


def _class_lookup(class_ids) -> dict[str, int]:
    table = DEFAULT_CLASS_IDS if class_ids is None else class_ids
    return {str(name): int(k) for k, name in table.items()}


def semantic_filter(
    cloud: LabeledCloud,
    classes=BUILDING_CLASSES,
    min_confidence: float = 0.5,
    class_ids: dict[int, str] | None = None,
) -> dict[SemanticClass, np.ndarray]:
    """Split the cloud into per-class point sets, dropping low-confidence points.

    Every requested class gets an entry; classes with no surviving points map
    to an empty ``(0, 3)`` array.
    """
    lookup = _class_lookup(class_ids)
    keep_conf = cloud.confidences >= min_confidence
    out = {}
    for cls in classes:
        cls = SemanticClass(cls)
        label = lookup.get(cls.value)
        if label is None:
            out[cls] = np.zeros((0, 3))
            continue
        mask = keep_conf & (cloud.labels == label)
        out[cls] = cloud.positions[mask]
    return out


def voxel_downsample(points, leaf: float) -> np.ndarray:
    """Replace the points of each occupied voxel by their centroid."""
    if leaf <= 0:
        raise ValueError("voxel leaf must be positive")
    return kernels.voxel_centroids(points, leaf)


def range_filter(points, depth_min: float, depth_max: float) -> np.ndarray:
    """Keep points whose distance from the sensor lies in ``[depth_min, depth_max]``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    r = np.linalg.norm(pts, axis=1)
    return pts[(r >= depth_min) & (r <= depth_max)]


def fit_plane_lstsq(points) -> tuple[np.ndarray, float, np.ndarray]:
    """Total-least-squares plane: centroid plus smallest-eigenvalue direction."""
    pts = np.asarray(points, dtype=float)
    c = pts.mean(axis=0)
    q = pts - c
    _, vecs = np.linalg.eigh(q.T @ q)
    n = vecs[:, 0]
    return n, -float(n @ c), c


def largest_planar_cluster(points, normal, gap: float) -> np.ndarray:
    """Indices of the biggest in-plane connected piece; gaps up to ``gap`` are bridged."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    cell = gap / 2.5
    uv = pts @ tangent_basis(normal)
    ij = np.floor((uv - uv.min(axis=0)) / cell).astype(np.int64) + 1
    grid = np.zeros(tuple(ij.max(axis=0) + 2), dtype=bool)
    grid[ij[:, 0], ij[:, 1]] = True
    grown = ndimage.binary_dilation(grid, structure=np.ones((3, 3), dtype=bool))
    labels, n = ndimage.label(grown, structure=np.ones((3, 3), dtype=bool))
    if n <= 1:
        return np.arange(pts.shape[0])
    lab = labels[ij[:, 0], ij[:, 1]]
    counts = np.bincount(lab, minlength=n + 1)
    counts[0] = 0
    return np.flatnonzero(lab == int(np.argmax(counts)))


def fit_planes_ransac(
    points,
    cfg: RecognitionConfig,
    rng_seed=0,
    cls: SemanticClass = SemanticClass.WALL,
) -> list[tuple[Plane, np.ndarray]]:
    """Sequential multi-plane RANSAC with least-squares refinement.

    Each consensus set is cut down to its largest connected piece on the
    plane, so coplanar strips of other surfaces do not join it. Returns
    ``(plane, inlier_indices)`` pairs; indices refer to ``points``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    rng = np.random.default_rng(rng_seed)
    remaining = np.arange(pts.shape[0])
    found = []
    attempts = 0
    while len(found) < cfg.max_planes_per_class and remaining.shape[0] >= 3 and attempts < 4 * cfg.max_planes_per_class:
        attempts += 1
        sub = pts[remaining]
        samples = rng.integers(0, sub.shape[0], size=(cfg.ransac_iterations, 3))
        best, count = kernels.ransac_best_hypothesis(sub, samples, cfg.ransac_inlier_tol)
        if best < 0 or count < cfg.min_inliers:
            break
        i, j, k = samples[best]
        n = np.cross(sub[j] - sub[i], sub[k] - sub[i])
        n /= np.linalg.norm(n)
        d = -float(n @ sub[i])
        consensus = np.flatnonzero(np.abs(sub @ n + d) <= cfg.ransac_inlier_tol)
        inl = consensus[largest_planar_cluster(sub[consensus], n, cfg.cluster_gap)]
        if inl.shape[0] < cfg.min_inliers:
            # a scattered consensus: drop it from the pool and keep searching
            remaining = np.delete(remaining, consensus)
            continue
        n_ref, d_ref, c = fit_plane_lstsq(sub[inl])
        if float(n_ref @ n) < 0.0:
            n_ref, d_ref = -n_ref, -d_ref
        plane = Plane(n_ref, d_ref, cls, c, inl.shape[0], extent=aabb(sub[inl]))
        found.append((plane, remaining[inl]))
        remaining = np.delete(remaining, inl)
    return found


def validate_components(planes, cfg: RecognitionConfig, up=WORLD_UP) -> list[Plane]:
    """Keep vertical walls and horizontal grounds (ground normals turned toward ``up``)."""
    kept = []
    for plane in planes:
        if plane.cls is SemanticClass.WALL:
            if abs(angle_between(plane.normal, up) - np.pi / 2) <= cfg.verticality_tol:
                kept.append(plane)
        elif plane.cls is SemanticClass.GROUND:
            g = plane.oriented_like(up)
            if angle_between(g.normal, up) <= cfg.horizontality_tol:
                kept.append(g)
    return kept


def recognize(
    kf: KeyFrame,
    cfg: RecognitionConfig,
    rng_seed: int = 0,
    class_ids: dict[int, str] | None = None,
) -> list[Plane]:
    """Detect validated wall/ground planes in a keyframe and express them in the world frame.

    Results are stored on ``kf`` (``components``, ``local_components`` and
    the world-frame inlier points in ``component_points``).
    """
    kf.components, kf.local_components, kf.component_points = [], [], []
    if kf.cloud is None or len(kf.cloud) == 0:
        return []
    up_local = kf.pose.rotation.T @ WORLD_UP
    per_class = semantic_filter(kf.cloud, BUILDING_CLASSES, cfg.min_confidence, class_ids)
    for k, cls in enumerate(BUILDING_CLASSES):
        pts = per_class[cls]
        if pts.shape[0] == 0:
            continue
        pts = voxel_downsample(pts, cfg.voxel_leaf)
        pts = range_filter(pts, cfg.depth_min, cfg.depth_max)
        if pts.shape[0] < 3:
            continue
        for plane, idx in fit_planes_ransac(pts, cfg, [int(rng_seed), k], cls):
            # walls face away from the sensor: it sits in the free space they bound
            if cls is SemanticClass.WALL and plane.offset > 0.0:
                plane = plane.flipped()
            valid = validate_components([plane], cfg, up_local)
            if not valid:
                continue
            local = valid[0]
            world_pts = kf.pose.apply(pts[idx])
            world = transform_plane(kf.pose, local)
            world = Plane(
                world.normal, world.offset, cls, world.centroid, world.inlier_count, aabb(world_pts)
            )
            kf.local_components.append(local)
            kf.components.append(world)
            kf.component_points.append(world_pts)
    log.debug("keyframe %d: %d components", kf.id, len(kf.components))
    return list(kf.components)
