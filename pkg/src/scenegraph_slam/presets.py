"""Ready-made world specs: one rectangular room, and corridors with rooms along them."""

from __future__ import annotations

import numpy as np

from .synthetic import DoorSpec, MarkerSpec, RoomSpec, TrajectorySpec, WorldSpec


def single_room(seed: int = 0) -> WorldSpec:
    """A 4 m x 3 m room walked through and looked around in."""
    wp = [[1.0, 1.5, 0.0], [3.0, 1.5, 0.0], [3.0, 1.5, 180.0], [1.0, 1.5, 180.0], [1.0, 1.5, 360.0]]
    return WorldSpec(
        rooms=[RoomSpec("room", np.array([[0, 0], [4, 0], [4, 3], [0, 3]], dtype=float))],
        markers=[MarkerSpec(1, "office", "room", np.array([2.0, 2.6, 1.2]), -90.0)],
        trajectory=TrajectorySpec(np.array(wp)),
        seed=seed,
        name="single-room",
    )


def corridor_rooms(n_rooms: int = 3, room_width: float = 4.0, depth: float = 3.5, seed: int = 0,
                   corridor_width: float = 1.5) -> WorldSpec:
    """A corridor along x with ``n_rooms`` rooms side by side on its +y side.

    The camera walks the corridor, steps into every room through its door,
    looks around and comes back out.
    """
    if n_rooms < 1:
        raise ValueError("need at least one room")
    length = n_rooms * room_width
    cw = corridor_width
    rooms = [RoomSpec("corridor", np.array([[0, 0], [length, 0], [length, cw], [0, cw]], dtype=float))]
    doors, markers = [], []
    y_mid = cw / 2
    y_in = cw + depth / 2
    wp = [[0.6, y_mid, 0.0]]
    yaw = 0.0
    for k in range(n_rooms):
        x0 = k * room_width
        name = f"room{k + 1}"
        rooms.append(
            RoomSpec(name, np.array([[x0, cw], [x0 + room_width, cw], [x0 + room_width, cw + depth], [x0, cw + depth]], dtype=float))
        )
        xd = x0 + room_width / 2
        doors.append(DoorSpec(np.array([xd, cw]), 0.4))
        markers.append(MarkerSpec(10 + k, f"{name}-label", name, np.array([xd, cw + depth - 0.4, 1.2]), -90.0))
        wp.append([xd, y_mid, yaw])
        wp.append([xd, y_mid, 90.0])
        wp.append([xd, y_in, 90.0])
        wp.append([xd, y_in, 450.0])
        wp.append([xd, y_in, 270.0])
        wp.append([xd, y_mid, 270.0])
        wp.append([xd, y_mid, 360.0])
        yaw = 0.0
    wp.append([length - 0.6, y_mid, 0.0])
    markers.append(MarkerSpec(5, "corridor-A", "corridor", np.array([length / 2 + 0.5, 0.4, 1.2]), 90.0))
    return WorldSpec(
        rooms=rooms,
        doors=doors,
        markers=markers,
        trajectory=TrajectorySpec(np.array(wp)),
        seed=seed,
        name=f"corridor-{n_rooms}-rooms",
    )


def two_rooms_tour(seed: int = 0) -> WorldSpec:
    """Corridor with two 3 m x 3 m rooms; a brisk 50-keyframe visit of both."""
    spec = corridor_rooms(2, room_width=3.0, depth=3.0, seed=seed)
    wp = [
        [0.75, 0.75, 0.0], [1.5, 0.75, 0.0], [1.5, 0.75, 90.0], [1.5, 3.0, 90.0], [1.5, 3.0, 450.0],
        [1.5, 3.0, 270.0], [1.5, 0.75, 270.0], [1.5, 0.75, 360.0], [4.5, 0.75, 0.0], [4.5, 0.75, 90.0],
        [4.5, 3.0, 90.0], [4.5, 3.0, 450.0],
    ]
    spec.trajectory = TrajectorySpec(np.array(wp), yaw_rate_deg=120.0)
    spec.name = "two-rooms-tour"
    return spec


def pentagon_room(seed: int = 0) -> WorldSpec:
    """Regular pentagon: no parallel and no perpendicular wall pairs."""
    ang = np.radians(90 + 72 * np.arange(5))
    poly = np.column_stack([2.5 * np.cos(ang), 2.5 * np.sin(ang)])
    wp = [[0.0, 0.0, 0.0], [0.0, 0.0, 360.0]]
    return WorldSpec(
        rooms=[RoomSpec("pentagon", poly)],
        trajectory=TrajectorySpec(np.array(wp)),
        seed=seed,
        name="pentagon",
    )


PRESETS = {
    "single-room": single_room,
    "corridor-3": lambda seed=0: corridor_rooms(3, seed=seed),
    "corridor-5": lambda seed=0: corridor_rooms(5, seed=seed),
    "two-rooms-tour": two_rooms_tour,
    "pentagon": pentagon_room,
}
