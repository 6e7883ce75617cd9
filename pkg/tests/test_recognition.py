import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenegraph_slam.entities import KeyFrame, LabeledCloud
from scenegraph_slam.geometry import Plane, PoseSE3, SemanticClass, angle_between, so3_exp
from scenegraph_slam.recognition import (
    RecognitionConfig,
    fit_plane_lstsq,
    fit_planes_ransac,
    range_filter,
    recognize,
    semantic_filter,
    validate_components,
    voxel_downsample,
)

WALL, GROUND, CHAIR = 1, 2, 7
CLASS_IDS = {0: "unknown", 1: "wall", 2: "ground", 7: "chair"}


def _cloud(pts, labels, conf):
    return LabeledCloud(np.asarray(pts, float), np.asarray(labels), np.asarray(conf, float))


def _wall_and_ground(rng, sigma=0.005, spacing=0.04):
    ys, zs = np.meshgrid(np.arange(-1.5, 1.5, spacing), np.arange(-1.0, 1.0, spacing))
    wall = np.column_stack([np.full(ys.size, 2.0), ys.ravel(), zs.ravel()])
    xs, ys2 = np.meshgrid(np.arange(0.6, 1.9, spacing), np.arange(-1.5, 1.5, spacing))
    ground = np.column_stack([xs.ravel(), ys2.ravel(), np.full(xs.size, -1.2)])
    wall += rng.normal(0, sigma, wall.shape)
    ground += rng.normal(0, sigma, ground.shape)
    pts = np.vstack([wall, ground])
    labels = np.r_[np.full(len(wall), WALL), np.full(len(ground), GROUND)]
    return _cloud(pts, labels, np.full(len(pts), 0.9))


class TestSemanticFilter:
    def test_no_wall_points(self):
        c = _cloud(np.ones((4, 3)), [GROUND] * 4, [0.9] * 4)
        out = semantic_filter(c, min_confidence=0.5, class_ids=CLASS_IDS)
        assert out[SemanticClass.WALL].shape == (0, 3)
        assert out[SemanticClass.GROUND].shape == (4, 3)

    def test_walls_and_furniture(self):
        c = _cloud(np.arange(45.0).reshape(15, 3), [WALL] * 10 + [CHAIR] * 5, [0.9] * 15)
        out = semantic_filter(c, min_confidence=0.5, class_ids=CLASS_IDS)
        assert out[SemanticClass.WALL].shape[0] == 10
        assert out[SemanticClass.GROUND].shape[0] == 0

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_matches_scan_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = 200
        c = _cloud(rng.normal(size=(n, 3)), rng.choice([0, WALL, GROUND, CHAIR], n), rng.uniform(0, 1, n))
        out = semantic_filter(c, min_confidence=0.5, class_ids=CLASS_IDS)
        for cls, lab in ((SemanticClass.WALL, WALL), (SemanticClass.GROUND, GROUND)):
            want = [c.positions[i] for i in range(n) if c.labels[i] == lab and c.confidences[i] >= 0.5]
            np.testing.assert_array_equal(out[cls], np.array(want).reshape(-1, 3))


class TestVoxelDownsample:
    def test_single_point(self):
        np.testing.assert_array_equal(voxel_downsample([[0.3, 0.2, 0.1]], 0.05), [[0.3, 0.2, 0.1]])

    def test_midpoint(self):
        pts = np.array([[0.011, 0.011, 0.011], [0.012, 0.011, 0.011]])
        np.testing.assert_allclose(voxel_downsample(pts, 0.05), [pts.mean(axis=0)])

    def test_grid_count_matches_hash_oracle(self):
        g = np.arange(10) * 0.1 + 0.05
        pts = np.array(np.meshgrid(g, g, g)).reshape(3, -1).T
        out = voxel_downsample(pts, 0.2)
        assert out.shape[0] == len({tuple(np.floor(p / 0.2).astype(int)) for p in pts}) == 125

    @given(st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_output_inside_input_box(self, seed):
        pts = np.random.default_rng(seed).uniform(-3, 3, size=(100, 3))
        out = voxel_downsample(pts, 0.5)
        assert np.all(out >= pts.min(axis=0) - 1e-12) and np.all(out <= pts.max(axis=0) + 1e-12)

    def test_rejects_nonpositive_leaf(self):
        with pytest.raises(ValueError):
            voxel_downsample(np.zeros((1, 3)), 0.0)


class TestRangeFilter:
    def test_all_inside(self):
        pts = np.array([[1.0, 0, 0], [0, 2.0, 0]])
        np.testing.assert_array_equal(range_filter(pts, 0.3, 5.0), pts)

    def test_closed_upper_bound(self):
        assert range_filter([[5.0, 0, 0]], 0.3, 5.0).shape[0] == 1
        assert range_filter([[0.3, 0, 0]], 0.3, 5.0).shape[0] == 1

    def test_matches_scan_oracle(self, rng):
        pts = rng.uniform(-6, 6, size=(500, 3))
        want = np.array([p for p in pts if 0.3 <= math.sqrt(p @ p) <= 5.0])
        np.testing.assert_array_equal(range_filter(pts, 0.3, 5.0), want)


class TestRansac:
    def test_exact_plane(self, rng):
        pts = np.column_stack([rng.uniform(-2, 2, 500), rng.uniform(-2, 2, 500), np.zeros(500)])
        out = fit_planes_ransac(pts, RecognitionConfig(), 0, SemanticClass.GROUND)
        assert len(out) == 1
        plane, idx = out[0]
        assert abs(abs(plane.normal[2]) - 1) <= 1e-12 and abs(plane.offset) <= 1e-9
        assert idx.shape[0] == 500

    def test_two_orthogonal_walls_vs_svd_oracle(self, rng):
        a = np.column_stack([np.zeros(300), rng.uniform(0, 2, 300), rng.uniform(0, 2, 300)])
        b = np.column_stack([rng.uniform(0, 2, 300), np.zeros(300), rng.uniform(0, 2, 300)])
        a += rng.normal(0, 0.005, a.shape)
        b += rng.normal(0, 0.005, b.shape)
        cfg = RecognitionConfig(ransac_inlier_tol=0.02)
        out = fit_planes_ransac(np.vstack([a, b]), cfg, 3)
        assert len(out) == 2
        for truth in (a, b):
            n_true, _, _ = fit_plane_lstsq(truth)
            errs = [angle_between(n_true, p.normal) for p, _ in out]
            errs = [min(e, math.pi - e) for e in errs]
            k = int(np.argmin(errs))
            assert math.degrees(errs[k]) <= 1.0
            assert out[k][1].shape[0] >= 270

    def test_sparse_random_points_yield_nothing(self, rng):
        pts = rng.uniform(0, 1, size=(50, 3))
        # exhaustive check: 50 points can never give 100 inliers
        assert len(pts) < 100
        assert fit_planes_ransac(pts, RecognitionConfig(min_inliers=100), 0) == []

    def test_too_few_points(self):
        assert fit_planes_ransac(np.zeros((2, 3)), RecognitionConfig(), 0) == []

    def test_collinear_points(self):
        pts = np.column_stack([np.linspace(0, 1, 200), np.zeros(200), np.zeros(200)])
        assert fit_planes_ransac(pts, RecognitionConfig(), 0) == []

    def test_seed_reproducible(self, rng):
        pts = rng.uniform(0, 2, size=(800, 3))
        pts[:400, 0] = 0.0
        cfg = RecognitionConfig(min_inliers=50)
        a = fit_planes_ransac(pts, cfg, 11)
        b = fit_planes_ransac(pts, cfg, 11)
        assert len(a) == len(b)
        for (p, i), (q, j) in zip(a, b):
            np.testing.assert_array_equal(p.normal, q.normal)
            np.testing.assert_array_equal(i, j)

    def test_coplanar_strips_are_split(self, rng):
        # two coplanar patches 2 m apart: the consensus keeps only the larger piece
        a = np.column_stack([rng.uniform(0, 1, 400), rng.uniform(0, 1, 400), np.zeros(400)])
        b = np.column_stack([rng.uniform(3, 3.5, 200), rng.uniform(0, 1, 200), np.zeros(200)])
        out = fit_planes_ransac(np.vstack([a, b]), RecognitionConfig(), 0, SemanticClass.GROUND)
        assert [idx.shape[0] for _, idx in out] == [400, 200]


class TestValidate:
    def _wall(self, n):
        return Plane(n, 0.0, SemanticClass.WALL, [0, 0, 0])

    def test_vertical_wall_kept(self):
        cfg = RecognitionConfig(verticality_tol=math.radians(5))
        assert len(validate_components([self._wall([1, 0, 0])], cfg)) == 1

    def test_horizontal_wall_rejected(self):
        assert validate_components([self._wall([0, 0, 1])], RecognitionConfig()) == []

    def test_tilt_threshold(self):
        cfg = RecognitionConfig(verticality_tol=math.radians(5))
        tilt = lambda deg: so3_exp([0, math.radians(deg), 0]) @ np.array([1.0, 0, 0])
        assert len(validate_components([self._wall(tilt(4))], cfg)) == 1
        assert validate_components([self._wall(tilt(6))], cfg) == []

    def test_ground_oriented_up(self):
        g = Plane([0, 0, -1], 1.0, SemanticClass.GROUND, [0, 0, 1])
        (out,) = validate_components([g], RecognitionConfig())
        assert out.normal[2] == 1.0

    def test_idempotent(self):
        planes = [self._wall([1, 0, 0.05]), self._wall([0, 0, 1]), Plane([0, 0.1, -1], 0, SemanticClass.GROUND, [0, 0, 0])]
        once = validate_components(planes, RecognitionConfig())
        twice = validate_components(once, RecognitionConfig())
        assert [p.normal.tolist() for p in once] == [p.normal.tolist() for p in twice]


class TestRecognize:
    def test_wall_and_ground(self, rng):
        kf = KeyFrame(0, PoseSE3(), _wall_and_ground(rng))
        out = recognize(kf, RecognitionConfig(), 0, CLASS_IDS)
        assert sorted(p.cls.value for p in out) == ["ground", "wall"]
        wall = next(p for p in out if p.cls is SemanticClass.WALL)
        assert math.degrees(min(angle_between(wall.normal, [1, 0, 0]), angle_between(wall.normal, [-1, 0, 0]))) < 1.0
        # sensor sits on the free side of the wall
        assert wall.offset <= 0.0
        assert kf.components == out

    def test_yawed_pose_rotates_normals(self, rng):
        cloud = _wall_and_ground(rng)
        base = recognize(KeyFrame(0, PoseSE3(), cloud), RecognitionConfig(), 0, CLASS_IDS)
        pose = PoseSE3.from_yaw(math.pi / 2)
        turned = recognize(KeyFrame(0, pose, cloud), RecognitionConfig(), 0, CLASS_IDS)
        for a, b in zip(base, turned):
            np.testing.assert_allclose(b.normal, pose.rotation @ a.normal, atol=1e-12)
            assert b.offset == pytest.approx(a.offset, abs=1e-12)

    def test_furniture_only(self, rng):
        c = _cloud(rng.uniform(0.5, 2, (300, 3)), [CHAIR] * 300, [0.9] * 300)
        assert recognize(KeyFrame(0, PoseSE3(), c), RecognitionConfig(), 0, CLASS_IDS) == []

    def test_empty_cloud(self):
        assert recognize(KeyFrame(0, PoseSE3(), None), RecognitionConfig()) == []


class TestConfig:
    def test_rejects_bad_depth_band(self):
        with pytest.raises(ValueError):
            RecognitionConfig(depth_min=3.0, depth_max=2.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            replace(RecognitionConfig(), min_inliers=0)
