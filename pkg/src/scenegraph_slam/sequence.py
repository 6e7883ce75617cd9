"""Sequence directories: labeled PLY keyframes, ``manifest.json`` and ``ground_truth.json``."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .entities import KeyFrame, MarkerObservation
from .geometry import PoseSE3
from .plyio import read_labeled_ply, write_labeled_ply
from .synthetic import GroundTruth, RenderedSequence, truth_document

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "scenegraph-slam-sequence/1"


class SequenceError(ValueError):
    pass


def _pose_list(p: PoseSE3) -> list[float]:
    return [float(x) for x in p.matrix().reshape(-1)]


def pose_from_list(vals, where: str) -> PoseSE3:
    try:
        T = np.asarray(vals, dtype=float).reshape(4, 4)
    except (TypeError, ValueError) as exc:
        raise SequenceError(f"{where}: expected 16 numbers") from exc
    R = T[:3, :3]
    if np.linalg.norm(R.T @ R - np.eye(3)) > 1e-6 or np.linalg.det(R) <= 0:
        raise SequenceError(f"{where}: rotation is not orthonormal")
    u, _, vt = np.linalg.svd(R)
    return PoseSE3(u @ vt, T[:3, 3])


def write_sequence(out_dir, world: GroundTruth, rendered: RenderedSequence, sequence_id: str, seed: int) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    kfs = []
    for kf in rendered.keyframes:
        name = f"kf_{kf.id:04d}.ply"
        write_labeled_ply(out / name, kf.cloud)
        kfs.append(
            {
                "id": kf.id,
                "timestamp": float(kf.timestamp),
                "cloud": name,
                "true_pose": _pose_list(kf.pose),
                "markers": [
                    {
                        "id": int(m.marker_id),
                        "pose": _pose_list(m.local_pose),
                        "information": [float(x) for x in m.information.reshape(-1)],
                    }
                    for m in kf.markers
                ],
            }
        )
    manifest = {
        "format": MANIFEST_FORMAT,
        "sequence_id": sequence_id,
        "seed": int(seed),
        "class_ids": {str(k): v for k, v in sorted(rendered.class_ids.items())},
        "start_pose": _pose_list(rendered.true_poses[0]) if rendered.true_poses else _pose_list(PoseSE3()),
        "keyframes": kfs,
        "odometry": [
            {"from": i, "to": j, "pose": _pose_list(z), "information": [float(x) for x in info.reshape(-1)]}
            for i, j, z, info in rendered.odometry
        ],
        "marker_db": world.marker_db,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    truth = truth_document(world, rendered, sequence_id)
    (out / "ground_truth.json").write_text(json.dumps(truth, indent=1, sort_keys=True) + "\n")
    (out / "world.json").write_text(json.dumps(world.spec.to_dict(), indent=1, sort_keys=True) + "\n")
    return out


@dataclass
class Sequence:
    sequence_id: str
    seed: int
    keyframes: list[KeyFrame]
    odometry: list[tuple[int, int, PoseSE3, np.ndarray]]
    start_pose: PoseSE3
    class_ids: dict[int, str]
    marker_db: dict[str, str]
    true_poses: dict[int, PoseSE3]


def manifest_path(path) -> Path:
    p = Path(path)
    return p / "manifest.json" if p.is_dir() else p


def load_manifest(path) -> dict:
    p = manifest_path(path)
    if not p.exists():
        raise FileNotFoundError(f"manifest not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise SequenceError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if doc.get("format") != MANIFEST_FORMAT:
        raise SequenceError(f"{p}: unsupported manifest format {doc.get('format')!r}")
    return doc


def parse_odometry(doc: dict) -> list[tuple[int, int, PoseSE3, np.ndarray]]:
    out = []
    for k, o in enumerate(doc.get("odometry", [])):
        where = f"odometry[{k}]"
        try:
            info = np.asarray(o["information"], dtype=float).reshape(6, 6)
            out.append((int(o["from"]), int(o["to"]), pose_from_list(o["pose"], where + ".pose"), info))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SequenceError):
                raise
            raise SequenceError(f"{where}: {exc}") from exc
    return out


def read_sequence(path, load_clouds: bool = True) -> Sequence:
    """Load a sequence directory; unreadable keyframe clouds are skipped with a warning."""
    mpath = manifest_path(path)
    doc = load_manifest(mpath)
    root = mpath.parent
    kfs, true_poses = [], {}
    for k, entry in enumerate(doc.get("keyframes", [])):
        where = f"keyframes[{k}]"
        try:
            kid = int(entry["id"])
            markers = [
                MarkerObservation(int(m["id"]), kid, pose_from_list(m["pose"], f"{where}.markers.pose"), m["information"])
                for m in entry.get("markers", [])
            ]
            true_poses[kid] = pose_from_list(entry["true_pose"], f"{where}.true_pose")
            ts = float(entry["timestamp"])
            cloud_name = entry["cloud"]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SequenceError):
                raise
            raise SequenceError(f"{where}: {exc}") from exc
        cloud = None
        if load_clouds:
            try:
                cloud = read_labeled_ply(root / cloud_name, frame_id=f"kf_{kid:04d}")
            except (OSError, ValueError) as exc:
                log.warning("skipping keyframe %d: unreadable cloud %s (%s)", kid, cloud_name, exc)
                continue
        kfs.append(KeyFrame(kid, PoseSE3(), cloud, ts, markers=markers))
    class_ids = {int(k): str(v) for k, v in doc.get("class_ids", {}).items()}
    return Sequence(
        str(doc.get("sequence_id", "")),
        int(doc.get("seed", 0)),
        kfs,
        parse_odometry(doc),
        pose_from_list(doc.get("start_pose", _pose_list(PoseSE3())), "start_pose"),
        class_ids,
        {str(k): str(v) for k, v in doc.get("marker_db", {}).items()},
        true_poses,
    )
