import filecmp
import math

import numpy as np
import pytest

from scenegraph_slam.presets import PRESETS, corridor_rooms, single_room
from scenegraph_slam.sequence import read_sequence, write_sequence
from scenegraph_slam.synthetic import (
    GROUND_LABEL,
    WALL_LABEL,
    CameraConfig,
    DoorSpec,
    NoiseModel,
    RoomSpec,
    WorldSpec,
    WorldSpecError,
    camera_pose,
    generate_world,
    integrate_odometry,
    render_keyframes,
)

CLEAN = NoiseModel(point_sigma=0.0, label_flip_rate=0.0, odom_rot_sigma_deg=0.0, odom_trans_sigma=0.0)


def _line_count(spec):
    # one wall per distinct supporting line; presets never leave a gap along a line
    lines = set()
    for r in spec.rooms:
        p = np.asarray(r.polygon, float)
        for a, b in zip(p, np.roll(p, -1, axis=0)):
            e = (b - a) / np.linalg.norm(b - a)
            n = np.array([e[1], -e[0]])
            d = -n @ a
            if n[0] < -1e-9 or (abs(n[0]) <= 1e-9 and n[1] < 0):
                n, d = -n, -d
            lines.add((round(n[0], 6), round(n[1], 6), round(d, 6)))
    return len(lines)


def _world_points(seq):
    out = []
    for kf in seq.keyframes:
        out.append((kf.pose.apply(kf.cloud.positions), kf.cloud.labels))
    return out


def _wall_distance(world, pts):
    """Distance from each point to the nearest wall panel rectangle."""
    best = np.full(pts.shape[0], np.inf)
    for x0, y0, x1, y1, zlo, zhi in world.panels:
        a, b = np.array([x0, y0]), np.array([x1, y1])
        e = b - a
        t = np.clip(((pts[:, :2] - a) @ e) / (e @ e), 0, 1)
        q = a + t[:, None] * e
        dz = np.maximum(0, np.maximum(zlo - pts[:, 2], pts[:, 2] - zhi))
        best = np.minimum(best, np.hypot(np.linalg.norm(pts[:, :2] - q, axis=1), dz))
    return best


class TestWorld:
    def test_single_room_counts(self):
        world = generate_world(single_room())
        assert world.counts == {"walls": 4, "grounds": 1, "rooms": 1, "floors": 1, "markers": 1}

    @pytest.mark.parametrize("n", [1, 3, 5])
    def test_corridor_counts(self, n):
        spec = corridor_rooms(n)
        c = generate_world(spec).counts
        assert c["walls"] == _line_count(spec) == n + 4
        assert (c["grounds"], c["rooms"], c["floors"]) == (1, n + 1, 1)

    def test_wall_planes_through_segments(self):
        world = generate_world(corridor_rooms(3))
        for w in world.walls:
            for p in (w.segment[:2], w.segment[2:]):
                assert abs(w.plane.signed_distance([p[0], p[1], 1.0])) <= 1e-12

    def test_empty_spec(self):
        with pytest.raises(WorldSpecError):
            generate_world(WorldSpec(rooms=[]))

    def test_non_convex_rejected(self):
        poly = np.array([[0, 0], [4, 0], [4, 4], [2, 1], [0, 4]], float)
        with pytest.raises(WorldSpecError):
            generate_world(WorldSpec(rooms=[RoomSpec("L", poly)]))

    def test_overlap_rejected(self):
        sq = np.array([[0, 0], [2, 0], [2, 2], [0, 2]], float)
        with pytest.raises(WorldSpecError, match="overlap"):
            generate_world(WorldSpec(rooms=[RoomSpec("a", sq), RoomSpec("b", sq + 1)]))

    def test_door_off_wall_rejected(self):
        spec = single_room()
        spec.doors = [DoorSpec(np.array([2.0, 1.0]))]
        with pytest.raises(WorldSpecError, match="not on a wall"):
            generate_world(spec)

    def test_dict_round_trip(self):
        spec = corridor_rooms(3, seed=7)
        back = WorldSpec.from_dict(spec.to_dict())
        assert back.to_dict() == spec.to_dict()

    def test_malformed_dict(self):
        with pytest.raises(WorldSpecError):
            WorldSpec.from_dict({"rooms": [{"polygon": [[0, 0]]}]})

    def test_noise_validation(self):
        with pytest.raises(ValueError):
            NoiseModel(point_sigma=-1)
        with pytest.raises(ValueError):
            NoiseModel(label_flip_rate=1.5)


class TestRender:
    def test_noiseless_points_on_surfaces(self):
        world = generate_world(single_room())
        seq = render_keyframes(world, noise=CLEAN, seed=3)
        for pts, labels in _world_points(seq):
            wall = labels == WALL_LABEL
            assert np.all(_wall_distance(world, pts[wall]) <= 1e-9)
            assert np.all(np.abs(pts[labels == GROUND_LABEL, 2]) <= 1e-9)

    def test_point_noise_statistics(self):
        sigma = 0.01
        world = generate_world(single_room())
        noise = NoiseModel(point_sigma=sigma, label_flip_rate=0.0)
        seq = render_keyframes(world, noise=noise, seed=4)
        z = np.concatenate([p[l == GROUND_LABEL, 2] for p, l in _world_points(seq)])
        rms = float(np.sqrt(np.mean(z**2)))
        assert 0.8 * sigma <= rms <= 1.2 * sigma

    def test_clean_labels_within_three_sigma(self):
        sigma = 0.01
        world = generate_world(single_room())
        seq = render_keyframes(world, noise=NoiseModel(point_sigma=sigma, label_flip_rate=0.0), seed=5)
        for pts, labels in _world_points(seq):
            w = pts[labels == WALL_LABEL]
            best = np.full(w.shape[0], np.inf)
            for wall in world.walls:
                lo, hi = wall.plane.bounds() - 3 * sigma - 1e-9, wall.plane.bounds() + 3 * sigma + 1e-9
                inside = np.all((w >= lo[0]) & (w <= hi[1]), axis=1)
                dist = np.abs(wall.plane.signed_distance(w))
                best = np.where(inside, np.minimum(best, dist), best)
            assert np.all(best <= 3 * sigma + 1e-12)
            assert np.all(np.abs(pts[labels == GROUND_LABEL, 2]) <= 3 * sigma + 1e-12)

    def test_label_flip_rate(self):
        world = generate_world(single_room())
        clean = render_keyframes(world, noise=NoiseModel(point_sigma=0.0, label_flip_rate=0.0), seed=6)
        noisy = render_keyframes(world, noise=NoiseModel(point_sigma=0.0, label_flip_rate=0.1), seed=6)
        a = np.concatenate([k.cloud.labels for k in clean.keyframes])
        b = np.concatenate([k.cloud.labels for k in noisy.keyframes])
        assert a.shape == b.shape
        assert 0.08 <= np.mean(a != b) <= 0.12

    def test_zero_drift_reproduces_trajectory(self):
        world = generate_world(corridor_rooms(2))
        seq = render_keyframes(world, noise=CLEAN, seed=1)
        est = integrate_odometry(seq.true_poses[0], seq.odometry)
        for a, b in zip(est, seq.true_poses):
            np.testing.assert_allclose(a.matrix(), b.matrix(), atol=1e-9)

    def test_keyframe_poses_are_true(self):
        world = generate_world(single_room())
        seq = render_keyframes(world, seed=2)
        assert [k.pose for k in seq.keyframes] == seq.true_poses

    def test_pose_outside_world_skipped(self, caplog):
        world = generate_world(single_room())
        traj = [(0.0, camera_pose(1, 1, 0, 1.2, 0.3)), (0.5, camera_pose(10, 10, 0, 1.2, 0.3))]
        seq = render_keyframes(world, trajectory=traj, seed=0)
        assert len(seq.keyframes) == 1
        assert "outside" in caplog.text

    def test_frustum_respected(self):
        world = generate_world(single_room())
        cam = CameraConfig()
        seq = render_keyframes(world, noise=CLEAN, camera=cam, seed=0)
        for kf in seq.keyframes:
            p = kf.cloud.positions
            r = np.linalg.norm(p, axis=1)
            assert np.all((r >= cam.range_min) & (r <= cam.range_max))
            assert np.all(np.abs(np.arctan2(p[:, 1], p[:, 0])) <= math.radians(cam.hfov_deg) / 2 + 1e-12)

    def test_deterministic(self):
        world = generate_world(corridor_rooms(2))
        a = render_keyframes(world, seed=9)
        b = render_keyframes(world, seed=9)
        for ka, kb in zip(a.keyframes, b.keyframes):
            assert np.array_equal(ka.cloud.positions, kb.cloud.positions)
            assert np.array_equal(ka.cloud.labels, kb.cloud.labels)
        assert all(np.array_equal(x[2].matrix(), y[2].matrix()) for x, y in zip(a.odometry, b.odometry))


class TestSequenceFiles:
    def test_byte_identical_directories(self, tmp_path):
        world = generate_world(PRESETS["single-room"](0))
        dirs = []
        for name in ("a", "b"):
            rendered = render_keyframes(world, seed=0)
            dirs.append(write_sequence(tmp_path / name, world, rendered, "sr", 0))
        cmp = filecmp.dircmp(dirs[0], dirs[1])
        assert sorted(cmp.common_files) == sorted(p.name for p in dirs[0].iterdir())
        _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], cmp.common_files, shallow=False)
        assert not mismatch and not errors

    def test_read_back(self, tmp_path):
        world = generate_world(PRESETS["single-room"](0))
        rendered = render_keyframes(world, seed=0)
        path = write_sequence(tmp_path / "s", world, rendered, "sr", 0)
        seq = read_sequence(path)
        assert len(seq.keyframes) == len(rendered.keyframes)
        for a, b in zip(seq.keyframes, rendered.keyframes):
            np.testing.assert_allclose(a.cloud.positions, b.cloud.positions, atol=1e-6)
            assert np.array_equal(a.cloud.labels, b.cloud.labels)
