"""Active map store: keyframes, fused building components and structural elements."""

from __future__ import annotations

import copy
import json
import logging
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from math import radians

import numpy as np

from . import kernels
from .entities import (
    Floor,
    FreeSpaceCluster,
    KeyFrame,
    MapComponent,
    Marker,
    MarkerObservation,
    Room,
)
from .geometry import (
    Plane,
    PoseSE3,
    SemanticClass,
    aabb_gap,
    axis_angle_unsigned,
    point_plane_distance,
)

log = logging.getLogger(__name__)

FORMAT_TAG = "scenegraph-slam/1"


class DuplicateKeyFrameError(ValueError):
    pass


class GraphFormatError(ValueError):
    """Malformed scene-graph document; ``path`` names the offending element."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class AssociationConfig:
    rho: float = 0.5
    eta: float = radians(10.0)
    point_leaf: float = 0.1

    def __post_init__(self):
        for name in ("rho", "eta", "point_leaf"):
            if not getattr(self, name) > 0:
                raise ValueError(f"association.{name} must be positive")


@dataclass
class SceneGraph:
    keyframes: dict[int, KeyFrame] = field(default_factory=dict)
    components: dict[int, MapComponent] = field(default_factory=dict)
    rooms: dict[int, Room] = field(default_factory=dict)
    floor: Floor | None = None
    markers: dict[int, Marker] = field(default_factory=dict)
    tombstones: dict[int, int] = field(default_factory=dict)
    sequence_id: str = ""
    next_component_id: int = 0
    next_room_id: int = 0
    next_floor_id: int = 0
    warnings: list[str] = field(default_factory=list)
    lock: threading.RLock = field(default_factory=threading.RLock, repr=False, compare=False)

    @contextmanager
    def writer(self):
        """Exclusive access for mutating operations."""
        with self.lock:
            yield self

    def snapshot(self) -> "SceneGraph":
        with self.lock:
            memo = {id(self.lock): threading.RLock()}
            return copy.deepcopy(self, memo)

    def resolve(self, component_id: int) -> int:
        seen = set()
        while component_id in self.tombstones:
            if component_id in seen:
                raise RuntimeError("tombstone cycle")
            seen.add(component_id)
            component_id = self.tombstones[component_id]
        return component_id

    def components_of(self, cls: SemanticClass) -> list[MapComponent]:
        cls = SemanticClass(cls)
        return [c for _, c in sorted(self.components.items()) if c.plane.cls is cls]

    def edges(self) -> list[tuple[str, int, int]]:
        """Typed parent/child links of the layered hierarchy."""
        out = []
        if self.floor is not None:
            out += [("floor_room", self.floor.id, r) for r in self.floor.rooms]
        for rid, room in sorted(self.rooms.items()):
            out += [("room_wall", rid, w) for w in room.walls]
            out.append(("room_ground", rid, room.ground))
            if room.marker is not None:
                out.append(("room_marker", rid, room.marker))
        for cid, comp in sorted(self.components.items()):
            for kf in sorted({k for k, _ in comp.observations}):
                out.append(("component_keyframe", cid, kf))
        return out


# --------------------------------------------------------------------------
# association and fusion
# --------------------------------------------------------------------------


def proximity(a: Plane, b: Plane) -> float:
    """Spatial separation used by association.

    The gap between the inlier bounding boxes, or between the centroids
    when a plane carries no extent, bounded below by each centroid's
    distance to the other plane.
    """
    gap = aabb_gap(a.bounds(), b.bounds())
    da = abs(point_plane_distance(b.centroid, a))
    db = abs(point_plane_distance(a.centroid, b))
    return max(gap, da, db)


def associate(a: Plane, b: Plane, rho: float, eta: float) -> bool:
    """Same class, within ``rho`` of each other, normals within ``eta`` (up to sign)."""
    if a.cls is not b.cls:
        return False
    return proximity(a, b) <= rho and axis_angle_unsigned(a.normal, b.normal) <= eta


def fuse_planes(a: Plane, b: Plane) -> Plane:
    """Inlier-weighted mean of two plane equations, with ``b`` sign-aligned to ``a``."""
    wa, wb = float(a.inlier_count), float(b.inlier_count)
    if wa + wb == 0.0:
        wa = wb = 1.0
    s = -1.0 if float(a.normal @ b.normal) < 0.0 else 1.0
    W = wa + wb
    n = (wa * a.normal + wb * s * b.normal) / W
    d = (wa * a.offset + wb * s * b.offset) / W
    c = (wa * a.centroid + wb * b.centroid) / W
    extent = None
    if a.extent is not None or b.extent is not None:
        boxes = np.vstack([a.bounds(), b.bounds()])
        extent = np.vstack([boxes.min(axis=0), boxes.max(axis=0)])
    # Plane() rescales (n, d) jointly to a unit normal
    return Plane(n, d, a.cls, c, a.inlier_count + b.inlier_count, extent)


def _merge_points(p: np.ndarray, q: np.ndarray, leaf: float) -> np.ndarray:
    pts = np.vstack([p.reshape(-1, 3), np.asarray(q, dtype=float).reshape(-1, 3)])
    if pts.shape[0] == 0:
        return pts
    return kernels.voxel_centroids(pts, leaf)


def merge_components(
    target: MapComponent,
    obs: Plane,
    keyframe_id: int | None = None,
    local: Plane | None = None,
    points=None,
    leaf: float = 0.1,
) -> MapComponent:
    """Fold one detection into a component; returns a new component."""
    observations = list(target.observations)
    if keyframe_id is not None:
        observations.append((keyframe_id, local if local is not None else obs))
    new_points = target.points
    if points is not None:
        new_points = _merge_points(target.points, points, leaf)
    return MapComponent(
        id=target.id,
        plane=fuse_planes(target.plane, obs),
        observations=observations,
        merged_from=list(target.merged_from),
        points=new_points,
    )


def _absorb(g: SceneGraph, survivor_id: int, victim_id: int, leaf: float) -> None:
    s = g.components[survivor_id]
    v = g.components.pop(victim_id)
    g.components[survivor_id] = MapComponent(
        id=s.id,
        plane=fuse_planes(s.plane, v.plane),
        observations=sorted(s.observations + v.observations, key=lambda o: o[0]),
        merged_from=s.merged_from + [v.id] + v.merged_from,
        points=_merge_points(s.points, v.points, leaf),
    )
    g.tombstones[victim_id] = survivor_id
    for room in g.rooms.values():
        _rebind_room(g, room)
    if g.floor is not None and g.floor.plane is not None:
        g.floor.plane = g.resolve(g.floor.plane)


def _rebind_room(g: SceneGraph, room: Room) -> None:
    walls, signs = [], []
    for w, s in zip(room.walls, room.wall_signs):
        w = g.resolve(w)
        if w not in walls:
            walls.append(w)
            signs.append(s)
    room.walls, room.wall_signs = walls, signs
    room.ground = g.resolve(room.ground)


def _best_match(g: SceneGraph, plane: Plane, rho: float, eta: float, exclude=None):
    best, best_dist = None, np.inf
    for cid, comp in sorted(g.components.items()):
        if cid == exclude or not associate(comp.plane, plane, rho, eta):
            continue
        dist = float(np.linalg.norm(comp.plane.centroid - plane.centroid))
        if dist < best_dist:
            best, best_dist = cid, dist
    return best


def _saturate(g: SceneGraph, cid: int, cfg: AssociationConfig) -> int:
    while True:
        other = _best_match(g, g.components[cid].plane, cfg.rho, cfg.eta, exclude=cid)
        if other is None:
            return cid
        survivor, victim = min(cid, other), max(cid, other)
        _absorb(g, survivor, victim, cfg.point_leaf)
        cid = survivor


def associate_or_insert(
    g: SceneGraph,
    kf_id: int,
    detected: list[Plane],
    rho: float | None = None,
    eta: float | None = None,
    local: list[Plane] | None = None,
    points: list[np.ndarray] | None = None,
    cfg: AssociationConfig | None = None,
) -> list[int]:
    """Merge each world-frame detection into its nearest associate or add it as new."""
    cfg = cfg or AssociationConfig()
    if rho is not None or eta is not None:
        cfg = AssociationConfig(
            rho if rho is not None else cfg.rho, eta if eta is not None else cfg.eta, cfg.point_leaf
        )
    touched = []
    with g.writer():
        for k, plane in enumerate(detected):
            loc = local[k] if local is not None else plane
            pts = points[k] if points is not None else None
            cid = _best_match(g, plane, cfg.rho, cfg.eta)
            if cid is None:
                cid = g.next_component_id
                g.next_component_id += 1
                init = np.zeros((0, 3)) if pts is None else _merge_points(np.zeros((0, 3)), pts, cfg.point_leaf)
                g.components[cid] = MapComponent(cid, plane, [(kf_id, loc)], [], init)
            else:
                g.components[cid] = merge_components(
                    g.components[cid], plane, kf_id, loc, pts, cfg.point_leaf
                )
                cid = _saturate(g, cid, cfg)
            touched.append(cid)
        return sorted({g.resolve(c) for c in touched})


def insert_keyframe(g: SceneGraph, kf: KeyFrame, cfg: AssociationConfig | None = None) -> int:
    cfg = cfg or AssociationConfig()
    with g.writer():
        if kf.id in g.keyframes:
            raise DuplicateKeyFrameError(f"keyframe {kf.id} already in map")
        g.keyframes[kf.id] = kf
        if kf.components:
            associate_or_insert(
                g,
                kf.id,
                kf.components,
                local=kf.local_components or None,
                points=kf.component_points or None,
                cfg=cfg,
            )
        for obs in kf.markers:
            if obs.marker_id not in g.markers:
                g.markers[obs.marker_id] = Marker(obs.marker_id, kf.pose @ obs.local_pose)
    return kf.id


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _pose_doc(p: PoseSE3) -> list[float]:
    return [float(x) for x in p.matrix().reshape(-1)]


def _plane_doc(p: Plane) -> dict:
    doc = {
        "n": [float(x) for x in p.normal],
        "d": float(p.offset),
        "class": p.cls.value,
        "centroid": [float(x) for x in p.centroid],
        "inliers": int(p.inlier_count),
    }
    if p.extent is not None:
        doc["extent"] = [[float(x) for x in row] for row in p.extent]
    return doc


def serialize(g: SceneGraph) -> dict:
    """Scene-graph document (plain JSON types)."""
    with g.lock:
        doc = {
            "format": FORMAT_TAG,
            "sequence_id": g.sequence_id,
            "keyframes": [
                {
                    "id": kf.id,
                    "timestamp": float(kf.timestamp),
                    "pose": _pose_doc(kf.pose),
                    "markers": [
                        {
                            "id": int(m.marker_id),
                            "pose": _pose_doc(m.local_pose),
                            "information": [float(x) for x in m.information.reshape(-1)],
                        }
                        for m in kf.markers
                    ],
                }
                for _, kf in sorted(g.keyframes.items())
            ],
            "components": [
                {
                    "id": c.id,
                    "plane": _plane_doc(c.plane),
                    "observations": [{"keyframe": k, "plane": _plane_doc(p)} for k, p in c.observations],
                    "merged_from": list(c.merged_from),
                    "points": [[float(x) for x in row] for row in c.points],
                }
                for _, c in sorted(g.components.items())
            ],
            "rooms": [
                {
                    "id": r.id,
                    "walls": list(r.walls),
                    "wall_signs": [int(s) for s in r.wall_signs],
                    "ground": r.ground,
                    "centroid": [float(x) for x in r.centroid],
                    "cluster": {
                        "cells": [[float(x) for x in row] for row in r.cluster.cells],
                        "centroid": [float(x) for x in r.cluster.centroid],
                    },
                    "label": r.label,
                    "marker": r.marker,
                }
                for _, r in sorted(g.rooms.items())
            ],
            "floor": None
            if g.floor is None
            else {
                "id": g.floor.id,
                "rooms": list(g.floor.rooms),
                "centroid": [float(x) for x in g.floor.centroid],
                "plane": g.floor.plane,
            },
            "markers": [{"id": m.id, "pose": _pose_doc(m.pose)} for _, m in sorted(g.markers.items())],
            "tombstones": {str(k): v for k, v in sorted(g.tombstones.items())},
            "edges": [{"type": t, "parent": p, "child": c} for t, p, c in g.edges()],
            "next_ids": {
                "component": g.next_component_id,
                "room": g.next_room_id,
                "floor": g.next_floor_id,
            },
        }
    return doc


def dumps(g: SceneGraph) -> str:
    return json.dumps(serialize(g), indent=1, sort_keys=True)


def _req(doc, key, path):
    if not isinstance(doc, dict):
        raise GraphFormatError(path, "expected an object")
    if key not in doc:
        raise GraphFormatError(f"{path}.{key}" if path else key, "missing")
    return doc[key]


def _list(doc, key, path):
    val = _req(doc, key, path)
    if not isinstance(val, list):
        raise GraphFormatError(f"{path}.{key}" if path else key, "expected a list")
    return val


def _vec(val, n, path):
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError) as exc:
        raise GraphFormatError(path, f"expected {n} numbers") from exc
    if arr.size != n or not np.all(np.isfinite(arr)):
        raise GraphFormatError(path, f"expected {n} finite numbers")
    return arr


def _pose(val, path) -> PoseSE3:
    T = _vec(val, 16, path).reshape(4, 4)
    R = T[:3, :3]
    if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-6 or np.linalg.det(R) < 0:
        raise GraphFormatError(path, "rotation block is not a proper rotation")
    return PoseSE3(R, T[:3, 3])


def _plane(doc, path) -> Plane:
    try:
        cls = SemanticClass(_req(doc, "class", path))
    except ValueError as exc:
        raise GraphFormatError(f"{path}.class", "unknown semantic class") from exc
    n = _vec(_req(doc, "n", path), 3, f"{path}.n")
    if abs(np.linalg.norm(n) - 1.0) > 1e-6:
        raise GraphFormatError(f"{path}.n", "normal must be unit length")
    extent = None
    if doc.get("extent") is not None:
        extent = _vec(doc["extent"], 6, f"{path}.extent").reshape(2, 3)
    p = Plane(
        n,
        float(_req(doc, "d", path)),
        cls,
        _vec(_req(doc, "centroid", path), 3, f"{path}.centroid"),
        int(_req(doc, "inliers", path)),
        extent,
    )
    # keep the stored numbers verbatim (Plane() renormalises)
    object.__setattr__(p, "normal", _frozen_copy(n))
    object.__setattr__(p, "offset", float(doc["d"]))
    return p


def _frozen_copy(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def deserialize(doc: dict) -> SceneGraph:
    """Inverse of :func:`serialize`; raises :class:`GraphFormatError` on bad input."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise GraphFormatError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphFormatError("$", "expected an object")
    g = SceneGraph(sequence_id=str(doc.get("sequence_id", "")))

    for i, kd in enumerate(_list(doc, "keyframes", "")):
        path = f"keyframes[{i}]"
        kid = int(_req(kd, "id", path))
        markers = []
        for j, md in enumerate(kd.get("markers", [])):
            mp = f"{path}.markers[{j}]"
            markers.append(
                MarkerObservation(
                    int(_req(md, "id", mp)),
                    kid,
                    _pose(_req(md, "pose", mp), f"{mp}.pose"),
                    _vec(_req(md, "information", mp), 36, f"{mp}.information").reshape(6, 6),
                )
            )
        if kid in g.keyframes:
            raise GraphFormatError(f"{path}.id", f"duplicate keyframe id {kid}")
        g.keyframes[kid] = KeyFrame(
            kid, _pose(_req(kd, "pose", path), f"{path}.pose"), None, float(kd.get("timestamp", 0.0)), markers=markers
        )

    for i, cd in enumerate(_list(doc, "components", "")):
        path = f"components[{i}]"
        cid = int(_req(cd, "id", path))
        obs = []
        for j, od in enumerate(_list(cd, "observations", path)):
            op = f"{path}.observations[{j}]"
            k = int(_req(od, "keyframe", op))
            if k not in g.keyframes:
                raise GraphFormatError(f"{op}.keyframe", f"unknown keyframe {k}")
            obs.append((k, _plane(_req(od, "plane", op), f"{op}.plane")))
        if not obs:
            raise GraphFormatError(f"{path}.observations", "component needs at least one observation")
        pts = np.asarray(cd.get("points", []), dtype=float).reshape(-1, 3)
        g.components[cid] = MapComponent(
            cid, _plane(_req(cd, "plane", path), f"{path}.plane"), obs, [int(x) for x in cd.get("merged_from", [])], pts
        )

    for i, rd in enumerate(_list(doc, "rooms", "")):
        path = f"rooms[{i}]"
        walls = [int(w) for w in _list(rd, "walls", path)]
        for j, w in enumerate(walls):
            comp = g.components.get(w)
            if comp is None:
                raise GraphFormatError(f"{path}.walls[{j}]", f"unknown component {w}")
            if comp.plane.cls is not SemanticClass.WALL:
                raise GraphFormatError(f"{path}.walls[{j}]", f"component {w} is not a wall")
        ground = int(_req(rd, "ground", path))
        if ground not in g.components:
            raise GraphFormatError(f"{path}.ground", f"unknown component {ground}")
        cl = _req(rd, "cluster", path)
        cells = np.asarray(_list(cl, "cells", f"{path}.cluster"), dtype=float).reshape(-1, 3)
        if cells.shape[0] == 0:
            raise GraphFormatError(f"{path}.cluster.cells", "cluster has no cells")
        cluster = FreeSpaceCluster(cells, _vec(_req(cl, "centroid", f"{path}.cluster"), 3, f"{path}.cluster.centroid"))
        rid = int(_req(rd, "id", path))
        g.rooms[rid] = Room(
            rid,
            walls,
            ground,
            _vec(_req(rd, "centroid", path), 3, f"{path}.centroid"),
            cluster,
            [int(s) for s in rd.get("wall_signs", [1] * len(walls))],
            rd.get("label"),
            rd.get("marker"),
        )

    fd = doc.get("floor")
    if fd is not None:
        rooms = [int(r) for r in _list(fd, "rooms", "floor")]
        for j, r in enumerate(rooms):
            if r not in g.rooms:
                raise GraphFormatError(f"floor.rooms[{j}]", f"unknown room {r}")
        g.floor = Floor(
            int(_req(fd, "id", "floor")), rooms, _vec(_req(fd, "centroid", "floor"), 3, "floor.centroid"), fd.get("plane")
        )

    for i, md in enumerate(doc.get("markers", [])):
        path = f"markers[{i}]"
        mid = int(_req(md, "id", path))
        g.markers[mid] = Marker(mid, _pose(_req(md, "pose", path), f"{path}.pose"))
    for rid, room in g.rooms.items():
        if room.marker is not None and room.marker not in g.markers:
            raise GraphFormatError(f"rooms[id={rid}].marker", f"unknown marker {room.marker}")

    g.tombstones = {int(k): int(v) for k, v in doc.get("tombstones", {}).items()}
    nxt = doc.get("next_ids", {})
    g.next_component_id = int(nxt.get("component", max(g.components, default=-1) + 1))
    g.next_room_id = int(nxt.get("room", max(g.rooms, default=-1) + 1))
    g.next_floor_id = int(nxt.get("floor", 0 if g.floor is None else g.floor.id + 1))

    if "edges" in doc:
        stored = [(e.get("type"), e.get("parent"), e.get("child")) for e in doc["edges"]]
        derived = g.edges()
        if sorted(map(str, stored)) != sorted(map(str, derived)):
            missing = sorted(set(map(str, stored)) ^ set(map(str, derived)))
            raise GraphFormatError("edges", f"edge list inconsistent with entities: {missing[:3]}")
    return g


def loads(text: str) -> SceneGraph:
    return deserialize(text)


def graphs_equal(a: SceneGraph, b: SceneGraph, atol: float = 1e-12) -> bool:
    """Structural equality of two graphs with numeric tolerance."""
    return _doc_equal(serialize(a), serialize(b), atol)


def _doc_equal(x, y, atol) -> bool:
    if isinstance(x, dict):
        return isinstance(y, dict) and x.keys() == y.keys() and all(_doc_equal(x[k], y[k], atol) for k in x)
    if isinstance(x, list):
        return isinstance(y, list) and len(x) == len(y) and all(_doc_equal(a, b, atol) for a, b in zip(x, y))
    if isinstance(x, float) or isinstance(y, float):
        try:
            return abs(float(x) - float(y)) <= atol
        except (TypeError, ValueError):
            return False
    return x == y
