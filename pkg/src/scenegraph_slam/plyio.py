"""Binary PLY files for labeled clouds and colored component exports."""

from __future__ import annotations

import numpy as np
from plyfile import PlyData, PlyElement

from .entities import LabeledCloud

_CLOUD_DTYPE = [("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("label", "u1"), ("confidence", "<f4")]
_COLOR_DTYPE = [
    ("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
    ("red", "u1"), ("green", "u1"), ("blue", "u1"),
    ("component", "<i4"),
]


def write_labeled_ply(path, cloud: LabeledCloud) -> None:
    if len(cloud) and (cloud.labels.min() < 0 or cloud.labels.max() > 255):
        raise ValueError("labels must fit in an unsigned byte")
    v = np.empty(len(cloud), dtype=_CLOUD_DTYPE)
    v["x"], v["y"], v["z"] = cloud.positions.T
    v["label"] = cloud.labels
    v["confidence"] = cloud.confidences
    PlyData([PlyElement.describe(v, "vertex")], text=False, byte_order="<").write(str(path))


def read_labeled_ply(path, frame_id: str = "") -> LabeledCloud:
    ply = PlyData.read(str(path))
    v = ply["vertex"].data
    names = v.dtype.names
    for need in ("x", "y", "z", "label", "confidence"):
        if need not in names:
            raise ValueError(f"{path}: vertex property {need!r} missing")
    pos = np.column_stack([v["x"], v["y"], v["z"]]).astype(float)
    conf = np.clip(np.asarray(v["confidence"], dtype=float), 0.0, 1.0)
    return LabeledCloud(pos, np.asarray(v["label"], dtype=np.int64), conf, frame_id)


def write_colored_ply(path, points, colors, component_ids) -> None:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    v = np.empty(pts.shape[0], dtype=_COLOR_DTYPE)
    v["x"], v["y"], v["z"] = pts.T
    col = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
    v["red"], v["green"], v["blue"] = col.T
    v["component"] = np.asarray(component_ids, dtype=np.int32)
    PlyData([PlyElement.describe(v, "vertex")], text=False, byte_order="<").write(str(path))
