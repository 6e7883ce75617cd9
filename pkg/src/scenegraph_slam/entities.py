"""Domain records stored in the scene graph."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Plane, PoseSE3

DEFAULT_CLASS_IDS: dict[int, str] = {
    0: "unknown",
    1: "wall",
    2: "ground",
    3: "chair",
    4: "table",
}


@dataclass
class LabeledCloud:
    """Points in the sensor frame with a semantic label and a confidence each."""

    positions: np.ndarray
    labels: np.ndarray
    confidences: np.ndarray
    frame_id: str = ""

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        self.confidences = np.asarray(self.confidences, dtype=float).reshape(-1)
        n = self.positions.shape[0]
        if self.labels.shape[0] != n or self.confidences.shape[0] != n:
            raise ValueError("positions, labels and confidences must have equal length")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("cloud contains non-finite positions")
        if n and (self.confidences.min() < 0.0 or self.confidences.max() > 1.0):
            raise ValueError("confidences must lie in [0, 1]")

    def __len__(self) -> int:
        return self.positions.shape[0]


@dataclass
class MarkerObservation:
    """A fiducial marker seen from a keyframe (pose of the marker in the sensor frame)."""

    marker_id: int
    keyframe_id: int
    local_pose: PoseSE3
    information: np.ndarray = field(default_factory=lambda: np.eye(6))

    def __post_init__(self):
        info = np.asarray(self.information, dtype=float).reshape(6, 6)
        if not np.allclose(info, info.T, atol=1e-12):
            raise ValueError("marker information matrix must be symmetric")
        if np.linalg.eigvalsh(info).min() < -1e-9:
            raise ValueError("marker information matrix must be positive semidefinite")
        self.information = info


@dataclass
class KeyFrame:
    id: int
    pose: PoseSE3
    cloud: LabeledCloud | None = None
    timestamp: float = 0.0
    components: list[Plane] = field(default_factory=list)
    local_components: list[Plane] = field(default_factory=list)
    component_points: list[np.ndarray] = field(default_factory=list)
    markers: list[MarkerObservation] = field(default_factory=list)


@dataclass
class MapComponent:
    """A building component fused from one or more keyframe detections."""

    id: int
    plane: Plane
    observations: list[tuple[int, Plane]] = field(default_factory=list)
    merged_from: list[int] = field(default_factory=list)
    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))

    @property
    def cls(self):
        return self.plane.cls


@dataclass
class FreeSpaceCluster:
    cells: np.ndarray
    centroid: np.ndarray = None

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=float).reshape(-1, 3)
        if self.cells.shape[0] == 0:
            raise ValueError("free-space cluster needs at least one cell")
        if self.centroid is None:
            self.centroid = self.cells.mean(axis=0)
        self.centroid = np.asarray(self.centroid, dtype=float).reshape(3)


@dataclass
class Room:
    """Walls bounding a free-space cluster plus the ground beneath it.

    ``wall_signs[k]`` orients wall ``walls[k]`` for this room so its normal
    points away from the enclosed free space (a wall shared by two rooms is
    seen from opposite sides).
    """

    id: int
    walls: list[int]
    ground: int
    centroid: np.ndarray
    cluster: FreeSpaceCluster
    wall_signs: list[int] = field(default_factory=list)
    label: str | None = None
    marker: int | None = None

    def __post_init__(self):
        self.centroid = np.asarray(self.centroid, dtype=float).reshape(3)
        if not self.wall_signs:
            self.wall_signs = [1] * len(self.walls)
        if len(self.wall_signs) != len(self.walls):
            raise ValueError("wall_signs must match walls")


@dataclass
class Floor:
    id: int
    rooms: list[int]
    centroid: np.ndarray
    plane: int | None = None

    def __post_init__(self):
        self.centroid = np.asarray(self.centroid, dtype=float).reshape(3)


@dataclass
class Marker:
    id: int
    pose: PoseSE3

    @property
    def center(self) -> np.ndarray:
        return np.array(self.pose.translation)
