"""Deterministic synthetic indoor worlds, trajectories and noisy labeled keyframes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import radians

import numpy as np
from shapely.geometry import Polygon

from . import kernels
from .entities import DEFAULT_CLASS_IDS, KeyFrame, LabeledCloud, MarkerObservation
from .geometry import Plane, PoseSE3, SemanticClass, so3_exp

log = logging.getLogger(__name__)

WALL_LABEL = 1
GROUND_LABEL = 2
_EPS = 1e-9


class WorldSpecError(ValueError):
    pass


@dataclass
class RoomSpec:
    name: str
    polygon: np.ndarray


@dataclass
class DoorSpec:
    center: np.ndarray
    width: float = 0.4


@dataclass
class MarkerSpec:
    id: int
    label: str
    room: str
    position: np.ndarray
    yaw_deg: float = 0.0


@dataclass
class TrajectorySpec:
    """Waypoints ``[x, y, yaw_deg]`` visited at constant speed and turn rate."""

    waypoints: np.ndarray
    speed: float = 0.5
    yaw_rate_deg: float = 60.0
    keyframe_interval: float = 0.5
    camera_height: float = 1.2
    pitch_down_deg: float = 20.0


@dataclass
class WorldSpec:
    rooms: list[RoomSpec]
    wall_height: float = 2.5
    doors: list[DoorSpec] = field(default_factory=list)
    markers: list[MarkerSpec] = field(default_factory=list)
    trajectory: TrajectorySpec | None = None
    seed: int = 0
    name: str = "world"

    @classmethod
    def from_dict(cls, doc: dict) -> "WorldSpec":
        try:
            rooms = [RoomSpec(str(r["name"]), np.asarray(r["polygon"], dtype=float)) for r in doc["rooms"]]
            doors = [DoorSpec(np.asarray(d["center"], dtype=float), float(d.get("width", 0.4))) for d in doc.get("doors", [])]
            markers = [
                MarkerSpec(
                    int(m["id"]),
                    str(m["label"]),
                    str(m["room"]),
                    np.asarray(m["position"], dtype=float),
                    float(m.get("yaw_deg", 0.0)),
                )
                for m in doc.get("markers", [])
            ]
            traj = None
            if doc.get("trajectory") is not None:
                t = dict(doc["trajectory"])
                traj = TrajectorySpec(np.asarray(t.pop("waypoints"), dtype=float), **t)
            spec = cls(
                rooms,
                float(doc.get("wall_height", 2.5)),
                doors,
                markers,
                traj,
                int(doc.get("seed", 0)),
                str(doc.get("name", "world")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise WorldSpecError(f"malformed world spec: {exc!r}") from exc
        return spec

    def to_dict(self) -> dict:
        doc = {
            "name": self.name,
            "seed": self.seed,
            "wall_height": self.wall_height,
            "rooms": [{"name": r.name, "polygon": np.asarray(r.polygon).tolist()} for r in self.rooms],
            "doors": [{"center": np.asarray(d.center).tolist(), "width": d.width} for d in self.doors],
            "markers": [
                {"id": m.id, "label": m.label, "room": m.room, "position": np.asarray(m.position).tolist(), "yaw_deg": m.yaw_deg}
                for m in self.markers
            ],
        }
        if self.trajectory is not None:
            t = self.trajectory
            doc["trajectory"] = {
                "waypoints": np.asarray(t.waypoints).tolist(),
                "speed": t.speed,
                "yaw_rate_deg": t.yaw_rate_deg,
                "keyframe_interval": t.keyframe_interval,
                "camera_height": t.camera_height,
                "pitch_down_deg": t.pitch_down_deg,
            }
        return doc


@dataclass
class NoiseModel:
    point_sigma: float = 0.01
    label_flip_rate: float = 0.02
    confidence_range: tuple[float, float] = (0.6, 1.0)
    flipped_confidence_range: tuple[float, float] = (0.1, 0.7)
    odom_rot_sigma_deg: float = 0.1
    odom_trans_sigma: float = 0.005
    marker_trans_sigma: float = 0.01
    marker_rot_sigma_deg: float = 0.5

    def __post_init__(self):
        vals = [self.point_sigma, self.label_flip_rate, self.odom_rot_sigma_deg, self.odom_trans_sigma,
                self.marker_trans_sigma, self.marker_rot_sigma_deg, *self.confidence_range,
                *self.flipped_confidence_range]
        if min(vals) < 0:
            raise ValueError("noise parameters must be nonnegative")
        if self.label_flip_rate > 1 or max(self.confidence_range + self.flipped_confidence_range) > 1:
            raise ValueError("probabilities and confidences must not exceed 1")


@dataclass
class CameraConfig:
    hfov_deg: float = 90.0
    vfov_deg: float = 70.0
    range_min: float = 0.2
    range_max: float = 6.0
    density: float = 500.0


@dataclass
class TruthWall:
    id: int
    segment: np.ndarray  # [x0, y0, x1, y1]
    plane: Plane


@dataclass
class TruthRoom:
    name: str
    polygon: np.ndarray
    centroid: np.ndarray
    walls: list[int]


@dataclass
class GroundTruth:
    spec: WorldSpec
    walls: list[TruthWall]
    ground: Plane
    rooms: list[TruthRoom]
    floor_centroid: np.ndarray
    panels: np.ndarray  # [x0, y0, x1, y1, z_lo, z_hi] wall pieces left after door cuts
    panel_wall: np.ndarray
    markers: dict[int, tuple[PoseSE3, str, str]]
    trajectory: list[tuple[float, PoseSE3]] = field(default_factory=list)

    @property
    def counts(self) -> dict[str, int]:
        return {
            "walls": len(self.walls),
            "grounds": 1,
            "rooms": len(self.rooms),
            "floors": 1 if self.rooms else 0,
            "markers": len(self.markers),
        }

    @property
    def marker_db(self) -> dict[str, str]:
        return {str(k): v[1] for k, v in sorted(self.markers.items())}


# --------------------------------------------------------------------------
# world construction
# --------------------------------------------------------------------------


def _ccw(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
    if abs(area2) < _EPS:
        raise WorldSpecError("degenerate room polygon")
    return poly if area2 > 0 else poly[::-1].copy()


def _check_convex(name: str, poly: np.ndarray) -> None:
    n = poly.shape[0]
    for i in range(n):
        a, b, c = poly[i], poly[(i + 1) % n], poly[(i + 2) % n]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross <= _EPS:
            raise WorldSpecError(f"room {name!r} polygon is not strictly convex")


def _on_segment(p, a, b, tol=1e-6):
    e = b - a
    ll = float(e @ e)
    t = float((p - a) @ e) / ll
    if t < -tol or t > 1 + tol:
        return None
    foot = a + t * e
    return t if np.linalg.norm(p - foot) <= tol else None


def validate_spec(spec: WorldSpec) -> list[RoomSpec]:
    if not spec.rooms:
        raise WorldSpecError("world spec has no rooms")
    if spec.wall_height <= 0:
        raise WorldSpecError("wall_height must be positive")
    rooms = []
    names = set()
    for r in spec.rooms:
        poly = np.asarray(r.polygon, dtype=float)
        if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3 or not np.all(np.isfinite(poly)):
            raise WorldSpecError(f"room {r.name!r} needs >= 3 finite 2D vertices")
        if r.name in names:
            raise WorldSpecError(f"duplicate room name {r.name!r}")
        names.add(r.name)
        poly = _ccw(poly)
        _check_convex(r.name, poly)
        rooms.append(RoomSpec(r.name, poly))
    shapes = [Polygon(r.polygon) for r in rooms]
    for i in range(len(shapes)):
        for j in range(i + 1, len(shapes)):
            if shapes[i].intersection(shapes[j]).area > 1e-9:
                raise WorldSpecError(f"rooms {rooms[i].name!r} and {rooms[j].name!r} overlap")
    return rooms


def _elementary_segments(rooms: list[RoomSpec]) -> list[np.ndarray]:
    verts = np.vstack([r.polygon for r in rooms])
    segs = {}
    for r in rooms:
        poly = r.polygon
        for i in range(poly.shape[0]):
            a, b = poly[i], poly[(i + 1) % poly.shape[0]]
            ts = [0.0, 1.0]
            for v in verts:
                t = _on_segment(v, a, b, 1e-9)
                if t is not None and 1e-9 < t < 1 - 1e-9:
                    ts.append(t)
            ts = sorted(set(ts))
            for t0, t1 in zip(ts[:-1], ts[1:]):
                p, q = a + t0 * (b - a), a + t1 * (b - a)
                key = tuple(sorted([tuple(np.round(p, 9)), tuple(np.round(q, 9))]))
                segs.setdefault(key, np.array([*key[0], *key[1]]))
    return [segs[k] for k in sorted(segs)]


def _line_key(seg):
    a, b = seg[:2], seg[2:]
    e = (b - a) / np.linalg.norm(b - a)
    if e[0] < -_EPS or (abs(e[0]) <= _EPS and e[1] < 0):
        e = -e
    n = np.array([e[1], -e[0]])
    return e, n, float(-(n @ a))


def _merge_runs(segs: list[np.ndarray]):
    """Group collinear segments and merge touching intervals into maximal runs."""
    groups: list[tuple[np.ndarray, np.ndarray, float, list]] = []
    for s in segs:
        e, n, d = _line_key(s)
        for ge, gn, gd, members in groups:
            if abs(abs(float(ge @ e)) - 1.0) < 1e-9 and abs(float(gn @ (s[:2])) + gd) < 1e-7:
                members.append(s)
                break
        else:
            groups.append((e, n, d, [s]))
    runs = []
    for e, n, d, members in groups:
        ivals = sorted(
            tuple(sorted((float(m[:2] @ e), float(m[2:] @ e)))) for m in members
        )
        cur = list(ivals[0])
        for lo, hi in ivals[1:]:
            if lo <= cur[1] + 1e-9:
                cur[1] = max(cur[1], hi)
            else:
                runs.append((e, n, d, tuple(cur)))
                cur = [lo, hi]
        runs.append((e, n, d, tuple(cur)))
    return runs


def generate_world(spec: WorldSpec) -> GroundTruth:
    """Ground-truth planes, rooms, floor and render panels for a world spec."""
    rooms = validate_spec(spec)
    h = spec.wall_height
    segs = _elementary_segments(rooms)
    runs = _merge_runs(segs)
    walls = []
    for k, (e, n, d, (lo, hi)) in enumerate(runs):
        foot = -d * n
        p0, p1 = foot + lo * e, foot + hi * e
        mid = 0.5 * (p0 + p1)
        plane = Plane(
            [n[0], n[1], 0.0],
            d,
            SemanticClass.WALL,
            [mid[0], mid[1], h / 2],
            0,
            extent=[[min(p0[0], p1[0]), min(p0[1], p1[1]), 0.0], [max(p0[0], p1[0]), max(p0[1], p1[1]), h]],
        )
        walls.append(TruthWall(k, np.array([p0[0], p0[1], p1[0], p1[1]]), plane))

    def wall_of(seg):
        mid = 0.5 * (seg[:2] + seg[2:])
        for w in walls:
            if _on_segment(mid, w.segment[:2], w.segment[2:], 1e-7) is not None:
                return w.id
        raise AssertionError("segment without wall")

    for door in spec.doors:
        if door.width <= 0:
            raise WorldSpecError("door width must be positive")
        if not any(_on_segment(np.asarray(door.center), s[:2], s[2:]) is not None for s in segs):
            raise WorldSpecError(f"door at {np.asarray(door.center).tolist()} is not on a wall")

    panels, panel_wall = [], []
    for s in segs:
        a, b = s[:2], s[2:]
        length = float(np.linalg.norm(b - a))
        cuts = []
        for door in spec.doors:
            t = _on_segment(np.asarray(door.center, dtype=float), a, b)
            if t is not None:
                half = door.width / 2 / length
                cuts.append((t - half, t + half))
        pieces = [(0.0, 1.0)]
        for c0, c1 in cuts:
            nxt = []
            for p0, p1 in pieces:
                if c1 <= p0 or c0 >= p1:
                    nxt.append((p0, p1))
                    continue
                if c0 > p0:
                    nxt.append((p0, c0))
                if c1 < p1:
                    nxt.append((c1, p1))
            pieces = nxt
        for p0, p1 in pieces:
            if (p1 - p0) * length < 1e-6:
                continue
            q0, q1 = a + p0 * (b - a), a + p1 * (b - a)
            panels.append([q0[0], q0[1], q1[0], q1[1], 0.0, h])
            panel_wall.append(wall_of(s))

    truth_rooms = []
    total_area = 0.0
    weighted = np.zeros(2)
    for r in rooms:
        poly = Polygon(r.polygon)
        c = np.array([poly.centroid.x, poly.centroid.y])
        total_area += poly.area
        weighted += poly.area * c
        ids = []
        n = r.polygon.shape[0]
        for i in range(n):
            edge = np.concatenate([r.polygon[i], r.polygon[(i + 1) % n]])
            wid = wall_of(edge)
            if wid not in ids:
                ids.append(wid)
        truth_rooms.append(TruthRoom(r.name, r.polygon, np.array([c[0], c[1], 0.0]), sorted(ids)))

    allv = np.vstack([r.polygon for r in rooms])
    gc = weighted / total_area
    ground = Plane(
        [0.0, 0.0, 1.0], 0.0, SemanticClass.GROUND, [gc[0], gc[1], 0.0], 0,
        extent=[[*allv.min(axis=0), 0.0], [*allv.max(axis=0), 0.0]],
    )
    names = {r.name for r in rooms}
    markers = {}
    for m in spec.markers:
        if m.room not in names:
            raise WorldSpecError(f"marker {m.id} references unknown room {m.room!r}")
        markers[m.id] = (PoseSE3.from_yaw(radians(m.yaw_deg), m.position), m.label, m.room)
    floor_c = np.mean([r.centroid for r in truth_rooms], axis=0)
    gt = GroundTruth(
        spec, walls, ground, truth_rooms, floor_c, np.array(panels).reshape(-1, 6), np.array(panel_wall, dtype=np.int64),
        markers,
    )
    if spec.trajectory is not None:
        gt.trajectory = make_trajectory(spec.trajectory)
    return gt


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------


def camera_pose(x: float, y: float, yaw: float, height: float, pitch_down: float) -> PoseSE3:
    """Body frame: x forward, y left, z up; pitched down by ``pitch_down`` radians."""
    R = so3_exp([0.0, 0.0, yaw]) @ so3_exp([0.0, pitch_down, 0.0])
    return PoseSE3(R, [x, y, height])


def make_trajectory(t: TrajectorySpec) -> list[tuple[float, PoseSE3]]:
    wp = np.asarray(t.waypoints, dtype=float).reshape(-1, 3)
    if wp.shape[0] == 0:
        raise WorldSpecError("trajectory needs at least one waypoint")
    times = [0.0]
    for a, b in zip(wp[:-1], wp[1:]):
        dist = float(np.linalg.norm(b[:2] - a[:2]))
        dyaw = abs((b[2] - a[2] + 180.0) % 360.0 - 180.0)
        times.append(times[-1] + max(dist / t.speed, dyaw / t.yaw_rate_deg, 1e-9))
    times = np.array(times)
    total = times[-1]
    n = int(np.floor(total / t.keyframe_interval + 1e-9)) + 1
    out = []
    for k in range(n):
        ts = k * t.keyframe_interval
        i = min(int(np.searchsorted(times, ts, side="right")) - 1, wp.shape[0] - 2) if wp.shape[0] > 1 else 0
        if wp.shape[0] == 1:
            x, y, yaw = wp[0]
        else:
            a, b = wp[i], wp[i + 1]
            f = np.clip((ts - times[i]) / (times[i + 1] - times[i]), 0.0, 1.0)
            x, y = a[:2] + f * (b[:2] - a[:2])
            dyaw = (b[2] - a[2] + 180.0) % 360.0 - 180.0
            yaw = a[2] + f * dyaw
        out.append((ts, camera_pose(x, y, radians(yaw), t.camera_height, radians(t.pitch_down_deg))))
    return out


# --------------------------------------------------------------------------
# rendering
# --------------------------------------------------------------------------


@dataclass
class RenderedSequence:
    keyframes: list[KeyFrame]
    true_poses: list[PoseSE3]
    odometry: list[tuple[int, int, PoseSE3, np.ndarray]]
    class_ids: dict[int, str]


def _sample_triangle_fan(poly, count, rng):
    tris = [(poly[0], poly[i], poly[i + 1]) for i in range(1, poly.shape[0] - 1)]
    areas = np.array([0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])) for a, b, c in tris])
    which = rng.choice(len(tris), size=count, p=areas / areas.sum())
    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    A = np.array([t[0] for t in tris])[which]
    B = np.array([t[1] for t in tris])[which]
    C = np.array([t[2] for t in tris])[which]
    return (1 - r1)[:, None] * A + (r1 * (1 - r2))[:, None] * B + (r1 * r2)[:, None] * C


def _in_view(local: np.ndarray, cam: CameraConfig) -> np.ndarray:
    x, y, z = local[:, 0], local[:, 1], local[:, 2]
    r = np.linalg.norm(local, axis=1)
    return (
        (x > 0)
        & (np.abs(np.arctan2(y, x)) <= radians(cam.hfov_deg) / 2)
        & (np.abs(np.arctan2(z, x)) <= radians(cam.vfov_deg) / 2)
        & (r >= cam.range_min)
        & (r <= cam.range_max)
    )


def _visible_surface_points(world: GroundTruth, pose: PoseSE3, cam: CameraConfig, rng):
    """Uniform surface samples inside the frustum with a clear line of sight."""
    c = pose.translation
    reach = cam.range_max
    pts, owner, label = [], [], []
    for k, pnl in enumerate(world.panels):
        a, b = pnl[:2], pnl[2:4]
        e = b - a
        length = float(np.linalg.norm(e))
        t = np.clip(float((c[:2] - a) @ e) / (length * length), 0.0, 1.0)
        if np.linalg.norm(a + t * e - c[:2]) > reach:
            continue
        count = int(rng.poisson(cam.density * length * (pnl[5] - pnl[4])))
        u = rng.random(count)
        z = pnl[4] + rng.random(count) * (pnl[5] - pnl[4])
        xy = a + u[:, None] * e
        pts.append(np.column_stack([xy, z]))
        owner.append(np.full(count, k))
        label.append(np.full(count, WALL_LABEL))
    for r in world.rooms:
        poly = Polygon(r.polygon)
        if poly.distance(_Point(c[0], c[1])) > reach:
            continue
        count = int(rng.poisson(cam.density * poly.area))
        xy = _sample_triangle_fan(r.polygon, count, rng)
        pts.append(np.column_stack([xy, np.zeros(count)]))
        owner.append(np.full(count, -1))
        label.append(np.full(count, GROUND_LABEL))
    if not pts:
        return np.zeros((0, 3)), np.zeros(0, dtype=np.int64)
    pts = np.vstack(pts)
    owner = np.concatenate(owner)
    label = np.concatenate(label)
    local = pose.inverse().apply(pts)
    keep = _in_view(local, cam)
    pts, owner, label = pts[keep], owner[keep], label[keep]
    vis = ~kernels.occluded(pts, owner, c, world.panels)
    return pts[vis], label[vis]


def _Point(x, y):
    from shapely.geometry import Point

    return Point(x, y)


def _perturb(rng, rot_sigma: float, trans_sigma: float) -> PoseSE3:
    return PoseSE3(so3_exp(rng.normal(0.0, rot_sigma, 3)), rng.normal(0.0, trans_sigma, 3))


def _info(trans_sigma: float, rot_sigma: float) -> np.ndarray:
    ts = max(trans_sigma, 1e-4)
    rs = max(rot_sigma, 1e-4)
    return np.diag([1 / ts**2] * 3 + [1 / rs**2] * 3)


def render_keyframes(
    world: GroundTruth,
    trajectory: list[tuple[float, PoseSE3]] | None = None,
    noise: NoiseModel | None = None,
    camera: CameraConfig | None = None,
    seed: int | None = None,
    class_ids: dict[int, str] | None = None,
) -> RenderedSequence:
    """Sample noisy labeled clouds along a trajectory plus drifted odometry.

    Keyframe poses are the true poses; the odometry list carries the
    measured relative motions ``(i, j, Z_ij, information)``.
    """
    noise = noise or NoiseModel()
    camera = camera or CameraConfig()
    trajectory = world.trajectory if trajectory is None else trajectory
    seed = world.spec.seed if seed is None else seed
    class_ids = dict(DEFAULT_CLASS_IDS if class_ids is None else class_ids)
    label_pool = np.array(sorted(class_ids), dtype=np.int64)
    allv = np.vstack([r.polygon for r in world.rooms])
    lo, hi = allv.min(axis=0), allv.max(axis=0)

    keyframes, poses = [], []
    for k, (ts, pose) in enumerate(trajectory):
        x, y = pose.translation[:2]
        if x < lo[0] or y < lo[1] or x > hi[0] or y > hi[1]:
            log.warning("trajectory pose %d at (%.2f, %.2f) is outside the world; skipped", k, x, y)
            continue
        rng = np.random.default_rng([seed, k])
        pts, labels = _visible_surface_points(world, pose, camera, rng)
        n = pts.shape[0]
        if noise.point_sigma > 0:
            # truncated at 3 sigma so every clean point stays near its surface
            s = noise.point_sigma
            pts = pts + np.clip(rng.normal(0.0, s, (n, 3)), -3 * s, 3 * s)
        flip = rng.random(n) < noise.label_flip_rate
        conf = rng.uniform(*noise.confidence_range, n)
        if flip.any():
            new = labels.copy()
            for i in np.flatnonzero(flip):
                others = label_pool[label_pool != labels[i]]
                new[i] = others[rng.integers(0, others.shape[0])]
            labels = new
            conf[flip] = rng.uniform(*noise.flipped_confidence_range, int(flip.sum()))
        local = pose.inverse().apply(pts)
        kf_id = len(keyframes)
        cloud = LabeledCloud(local, labels, conf, frame_id=f"kf_{kf_id:04d}")
        markers = []
        for mid, (mpose, _, _) in sorted(world.markers.items()):
            center = mpose.translation
            lc = pose.inverse().apply(center)
            if not _in_view(lc[None, :], camera)[0]:
                continue
            if kernels.occluded(center[None, :], np.array([-1]), pose.translation, world.panels)[0]:
                continue
            rel = pose.inverse() @ mpose
            meas = rel @ _perturb(rng, radians(noise.marker_rot_sigma_deg), noise.marker_trans_sigma)
            markers.append(
                MarkerObservation(mid, kf_id, meas, _info(noise.marker_trans_sigma, radians(noise.marker_rot_sigma_deg)))
            )
        keyframes.append(KeyFrame(kf_id, pose, cloud, float(ts), markers=markers))
        poses.append(pose)

    odo_rng = np.random.default_rng([seed, 1_000_003])
    rs = radians(noise.odom_rot_sigma_deg)
    odometry = []
    for i in range(len(poses) - 1):
        z_true = poses[i].inverse() @ poses[i + 1]
        z = z_true @ _perturb(odo_rng, rs, noise.odom_trans_sigma)
        odometry.append((i, i + 1, z, _info(noise.odom_trans_sigma, rs)))
    return RenderedSequence(keyframes, poses, odometry, class_ids)


def integrate_odometry(start: PoseSE3, odometry) -> list[PoseSE3]:
    poses = [start]
    for _, _, z, _ in odometry:
        poses.append(poses[-1] @ z)
    return poses


def _plane_truth(p: Plane) -> dict:
    return {
        "n": [float(x) for x in p.normal],
        "d": float(p.offset),
        "centroid": [float(x) for x in p.centroid],
        "extent": [[float(x) for x in row] for row in p.extent],
    }


def truth_document(world: GroundTruth, rendered: RenderedSequence, sequence_id: str) -> dict:
    """JSON-ready ground truth: geometry, entity counts and per-keyframe true poses."""
    return {
        "sequence_id": sequence_id,
        "counts": world.counts,
        "walls": [{"id": w.id, "segment": [float(x) for x in w.segment], **_plane_truth(w.plane)} for w in world.walls],
        "ground": _plane_truth(world.ground),
        "rooms": [
            {
                "name": r.name,
                "polygon": np.asarray(r.polygon).tolist(),
                "centroid": [float(x) for x in r.centroid],
                "walls": list(r.walls),
            }
            for r in world.rooms
        ],
        "floor_centroid": [float(x) for x in world.floor_centroid],
        "markers": [
            {"id": mid, "label": label, "room": room, "pose": [float(x) for x in pose.matrix().reshape(-1)]}
            for mid, (pose, label, room) in sorted(world.markers.items())
        ],
        "trajectory": {
            str(kf.id): [float(x) for x in kf.pose.matrix().reshape(-1)] for kf in rendered.keyframes
        },
    }
