"""Room, floor and marker-label inference over the fused map."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from math import radians, sin

import numpy as np
from scipy import ndimage

from . import kernels
from .atlas import SceneGraph
from .entities import Floor, FreeSpaceCluster, MapComponent, Room
from .geometry import Plane, SemanticClass

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StructuralConfig:
    grid_resolution: float = 0.1
    wall_clearance: float = 0.5
    ground_angle_tol: float = radians(10.0)
    min_cluster_cells: int = 40
    marker_proximity: float = 3.0
    run_period: float = 2.0
    min_wall_contact_cells: int = 3

    def __post_init__(self):
        for name in (
            "grid_resolution",
            "wall_clearance",
            "ground_angle_tol",
            "min_cluster_cells",
            "marker_proximity",
            "run_period",
            "min_wall_contact_cells",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"structural.{name} must be positive")


def _plane(x) -> Plane:
    return x.plane if isinstance(x, MapComponent) else x


def _points(x) -> np.ndarray:
    if isinstance(x, MapComponent) and x.points.shape[0]:
        return x.points
    p = _plane(x)
    if p.extent is not None:
        lo, hi = p.extent
        return np.array([[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])])
    return p.centroid[None, :]


def wall_segment(wall) -> np.ndarray:
    """Footprint of a wall on the ground plane as ``[x0, y0, x1, y1]``."""
    p = _plane(wall)
    nxy = p.normal[:2] / np.linalg.norm(p.normal[:2])
    u = np.array([-nxy[1], nxy[0]])
    c = p.centroid[:2]
    # foot of the centroid on the wall line
    d_line = (float(p.normal[:2] @ c) + p.offset + p.normal[2] * p.centroid[2]) / np.linalg.norm(p.normal[:2])
    foot = c - d_line * nxy
    s = (_points(wall)[:, :2] - foot) @ u
    a, b = foot + s.min() * u, foot + s.max() * u
    return np.array([a[0], a[1], b[0], b[1]])


def _ground_height(ground: Plane, xy: np.ndarray) -> np.ndarray:
    n = ground.normal
    return -(n[0] * xy[:, 0] + n[1] * xy[:, 1] + ground.offset) / n[2]


def cluster_free_space(g: SceneGraph, cfg: StructuralConfig) -> list[FreeSpaceCluster]:
    """Connected free ground cells, away from every wall footprint."""
    grounds = g.components_of(SemanticClass.GROUND)
    if not grounds:
        return []
    res = cfg.grid_resolution
    gpts = np.vstack([_points(c) for c in grounds])[:, :2]
    origin = np.floor(gpts.min(axis=0) / res) * res - res
    idx = np.floor((gpts - origin) / res).astype(np.int64)
    shape = tuple(idx.max(axis=0) + 2)
    occ = np.zeros(shape, dtype=bool)
    occ[idx[:, 0], idx[:, 1]] = True
    footprint = occ | ndimage.binary_closing(occ)

    ii, jj = np.nonzero(footprint)
    centers = origin + (np.column_stack([ii, jj]) + 0.5) * res
    walls = g.components_of(SemanticClass.WALL)
    free = footprint.copy()
    if walls:
        segs = np.array([wall_segment(w) for w in walls])
        clearance = kernels.segment_clearance(centers, segs)
        blocked = clearance <= cfg.wall_clearance / 2
        free[ii[blocked], jj[blocked]] = False

    labels, n = ndimage.label(free)
    ref = max(grounds, key=lambda c: (c.plane.inlier_count, -c.id)).plane
    clusters = []
    for k in range(1, n + 1):
        ci, cj = np.nonzero(labels == k)
        if ci.shape[0] < cfg.min_cluster_cells:
            continue
        xy = origin + (np.column_stack([ci, cj]) + 0.5) * res
        cells = np.column_stack([xy, _ground_height(ref, xy)])
        clusters.append(FreeSpaceCluster(cells))
    return clusters


def wall_proximity_ok(wall, c: FreeSpaceCluster, omega: float) -> bool:
    """Some cluster cell lies within ``omega`` of the wall plane."""
    p = _plane(wall)
    r = c.cells @ p.normal + p.offset
    return bool(np.any(np.abs(r) <= omega))


def wall_directionality_ok(wall, c: FreeSpaceCluster, sign: int = 1) -> bool:
    """The wall normal (times ``sign``) points away from the cluster centroid, strictly."""
    p = _plane(wall)
    return bool(sign * float(p.normal @ (c.centroid - p.centroid)) < 0.0)


def wall_contact_cells(wall, c: FreeSpaceCluster, omega: float, margin: float = 0.0) -> int:
    """Cluster cells within ``omega`` of the wall that sit alongside it.

    A cell counts when its foot on the wall footprint lies at least
    ``margin`` inside both ends, so walls merely ending near the cluster
    (a partition meeting a corridor) do not count as bounding it.
    """
    seg = wall_segment(wall)
    a, b = seg[:2], seg[2:]
    e = b - a
    length = float(np.linalg.norm(e))
    xy = c.cells[:, :2]
    if length == 0.0:
        return 0
    s = (xy - a) @ e / length
    p = _plane(wall)
    near = np.abs(c.cells @ p.normal + p.offset) <= omega
    return int(np.count_nonzero(near & (s >= margin) & (s <= length - margin)))


def ground_association_ok(ground, walls, theta: float, signs=None) -> bool:
    """Ground roughly orthogonal to every wall and lying between them.

    Along each (room-oriented) wall normal, the ground's centroid, or its
    bounding box when known, must reach into the interval spanned by the
    wall centroids.
    """
    gp = _plane(ground)
    planes = [_plane(w) for w in walls]
    if not planes:
        return False
    signs = [1] * len(planes) if signs is None else list(signs)
    limit = sin(theta)
    for p in planes:
        if abs(float(gp.normal @ p.normal)) > limit:
            return False
    centroids = np.array([p.centroid for p in planes])
    if gp.extent is not None:
        lo, hi = gp.extent
        probe = np.array([[a, b, c] for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])])
    else:
        probe = gp.centroid[None, :]
    for p, s in zip(planes, signs):
        m = s * p.normal
        w = centroids @ m
        gproj = probe @ m
        if gproj.max() < w.min() or gproj.min() > w.max():
            return False
    return True


def room_predicates_hold(g: SceneGraph, room: Room, cfg: StructuralConfig) -> bool:
    """Re-evaluate the wall and ground admission tests on a stored room."""
    walls = [g.components[w] for w in room.walls]
    if len(walls) < 2:
        return False
    for w, s in zip(walls, room.wall_signs):
        if w.plane.cls is not SemanticClass.WALL:
            return False
        if not wall_proximity_ok(w, room.cluster, cfg.wall_clearance):
            return False
        if not wall_directionality_ok(w, room.cluster, s):
            return False
    return ground_association_ok(g.components[room.ground], walls, cfg.ground_angle_tol, room.wall_signs)


def detect_rooms(g: SceneGraph, cfg: StructuralConfig, clusters=None) -> list[Room]:
    """Rooms from free-space clusters; replaces ``g.rooms`` (ids kept for re-found rooms)."""
    if clusters is None:
        clusters = cluster_free_space(g, cfg)
    walls = g.components_of(SemanticClass.WALL)
    grounds = g.components_of(SemanticClass.GROUND)
    previous = dict(g.rooms)
    rooms: dict[int, Room] = {}
    for cluster in clusters:
        chosen, signs = [], []
        for w in walls:
            if not wall_proximity_ok(w, cluster, cfg.wall_clearance):
                continue
            if wall_contact_cells(w, cluster, cfg.wall_clearance, cfg.wall_clearance) < cfg.min_wall_contact_cells:
                continue
            dot = float(w.plane.normal @ (cluster.centroid - w.plane.centroid))
            if dot == 0.0:
                continue
            # orient the wall for this room so that it faces away from the free space
            s = 1 if dot < 0.0 else -1
            if not wall_directionality_ok(w, cluster, s):
                continue
            chosen.append(w)
            signs.append(s)
        if len(chosen) < 2:
            continue
        ok = [gc for gc in grounds if ground_association_ok(gc, chosen, cfg.ground_angle_tol, signs)]
        if not ok:
            continue
        ground = max(ok, key=lambda c: (c.plane.inlier_count, -c.id))
        centroid = np.mean([w.plane.centroid for w in chosen], axis=0)
        rid = None
        for old_id, old in sorted(previous.items()):
            if old_id in rooms:
                continue
            if np.linalg.norm(old.cluster.centroid - cluster.centroid) < 2 * cfg.grid_resolution:
                rid = old_id
                break
        if rid is None:
            rid = g.next_room_id
            g.next_room_id += 1
            label, marker = None, None
        else:
            label, marker = previous[rid].label, previous[rid].marker
        rooms[rid] = Room(rid, [w.id for w in chosen], ground.id, centroid, cluster, signs, label, marker)
    g.rooms = rooms
    return [rooms[k] for k in sorted(rooms)]


def floor_centroid(room_centroids) -> np.ndarray:
    c = np.asarray(room_centroids, dtype=float).reshape(-1, 3)
    if c.shape[0] == 0:
        raise ValueError("floor centroid needs at least one room")
    return c.sum(axis=0) / c.shape[0]


def detect_floor(g: SceneGraph) -> Floor | None:
    """Single floor holding every room; its centroid is the mean room centroid."""
    if not g.rooms:
        g.floor = None
        return None
    ids = sorted(g.rooms)
    if g.floor is not None:
        fid = g.floor.id
    else:
        fid = g.next_floor_id
        g.next_floor_id += 1
    grounds = sorted({g.rooms[r].ground for r in ids})
    plane = max(grounds, key=lambda c: (g.components[c].plane.inlier_count, -c))
    g.floor = Floor(fid, ids, floor_centroid([g.rooms[r].centroid for r in ids]), plane)
    return g.floor


def marker_enclosed(g: SceneGraph, room: Room, center) -> bool:
    """The point lies on the inner side of every (room-oriented) wall of the room."""
    for w, s in zip(room.walls, room.wall_signs):
        p = g.components[w].plane
        if s * (float(p.normal @ center) + p.offset) > 0.0:
            return False
    return True


def marker_binds(g: SceneGraph, room: Room, center, eps_s: float) -> bool:
    """Enclosed by the room's walls and within ``eps_s`` of its free-space centre.

    The free-space centre stands in for the wall-centroid mean, which long
    walls shared with other rooms pull away from the room itself.
    """
    near = float(np.linalg.norm(center - room.cluster.centroid)) <= eps_s
    return near and marker_enclosed(g, room, center)


def associate_markers(g: SceneGraph, db: dict | None, eps_s: float) -> list[Room]:
    """Attach database labels to the rooms enclosing each marker."""
    for room in g.rooms.values():
        room.label, room.marker = None, None
    if not db or not g.markers:
        return []
    bound = []
    for mid, marker in sorted(g.markers.items()):
        label = db.get(str(mid), db.get(mid))
        if label is None:
            msg = f"marker {mid} not in marker database; left unbound"
            if msg not in g.warnings:
                g.warnings.append(msg)
            log.warning(msg)
            continue
        c = marker.center
        candidates = [r for _, r in sorted(g.rooms.items()) if r.marker is None and marker_binds(g, r, c, eps_s)]
        if not candidates:
            continue
        room = min(candidates, key=lambda r: (float(np.linalg.norm(c - r.cluster.centroid)), r.id))
        room.label, room.marker = str(label), mid
        bound.append(room)
    return bound


def run_structural_pass(g: SceneGraph, cfg: StructuralConfig, db: dict | None = None) -> SceneGraph:
    """Clusters -> rooms -> floor -> marker labels, under the map's writer lock."""
    with g.writer():
        if not g.components:
            return g
        detect_rooms(g, cfg)
        detect_floor(g)
        associate_markers(g, db, cfg.marker_proximity)
    return g
