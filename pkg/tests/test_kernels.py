import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenegraph_slam import kernels

seeds = st.integers(0, 2**31 - 1)


def _ransac_oracle(points, samples, tol):
    best, best_count = -1, -1
    for h, (a, b, c) in enumerate(samples):
        n = np.cross(points[b] - points[a], points[c] - points[a])
        if np.linalg.norm(n) <= kernels.DEGENERATE_CROSS:
            continue
        n = n / np.linalg.norm(n)
        count = int(np.sum(np.abs((points - points[a]) @ n) <= tol))
        if count > best_count:
            best, best_count = h, count
    return best, best_count


class TestRansacKernel:
    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_paths_agree_with_oracle(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-1, 1, size=(120, 3))
        pts[:60, 2] = 0.0
        samples = np.stack([rng.choice(120, 3, replace=False) for _ in range(25)])
        oracle = _ransac_oracle(pts, samples, 0.02)
        assert kernels.ransac_best_hypothesis(pts, samples, 0.02, use_jit=True) == oracle
        assert kernels.ransac_best_hypothesis(pts, samples, 0.02, use_jit=False) == oracle

    def test_all_degenerate(self):
        pts = np.column_stack([np.arange(5.0), np.zeros(5), np.zeros(5)])
        samples = np.array([[0, 1, 2], [1, 2, 3]])
        for jit in (True, False):
            assert kernels.ransac_best_hypothesis(pts, samples, 0.1, use_jit=jit) == (-1, -1)

    def test_no_samples(self):
        assert kernels.ransac_best_hypothesis(np.zeros((3, 3)), np.zeros((0, 3), dtype=int), 0.1) == (-1, -1)


class TestVoxelKernel:
    @given(seeds, st.sampled_from([0.05, 0.2, 0.7]))
    @settings(max_examples=30, deadline=None)
    def test_paths_agree_with_hash_oracle(self, seed, leaf):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-2, 2, size=(300, 3))
        groups = {}
        for p in pts:
            groups.setdefault(tuple(np.floor(p / leaf).astype(int)), []).append(p)
        oracle = np.array([np.mean(groups[k], axis=0) for k in sorted(groups)])
        for jit in (True, False):
            out = kernels.voxel_centroids(pts, leaf, use_jit=jit)
            np.testing.assert_allclose(out, oracle, atol=1e-12)

    def test_sparse_key_range_uses_sorted_path(self):
        # two far-apart points: key span far exceeds the point count
        pts = np.array([[0.0, 0.0, 0.0], [100.0, 100.0, 100.0]])
        for jit in (True, False):
            np.testing.assert_allclose(kernels.voxel_centroids(pts, 0.01, use_jit=jit), pts)

    def test_empty(self):
        assert kernels.voxel_centroids(np.zeros((0, 3)), 0.1).shape == (0, 3)


class TestOcclusionKernel:
    def test_wall_between_camera_and_point(self):
        panels = np.array([[1.0, -1.0, 1.0, 1.0, 0.0, 2.0]])
        pts = np.array([[2.0, 0.0, 1.0], [0.5, 0.0, 1.0], [2.0, 0.0, 4.0]])  # ray passes above the panel
        owner = np.array([-1, -1, -1])
        cam = np.zeros(3) + [0, 0, 1.0]
        for jit in (True, False):
            np.testing.assert_array_equal(kernels.occluded(pts, owner, cam, panels, use_jit=jit), [True, False, False])

    def test_point_on_its_own_panel_not_occluded(self):
        panels = np.array([[1.0, -1.0, 1.0, 1.0, 0.0, 2.0]])
        pts = np.array([[1.0, 0.2, 1.0]])
        for jit in (True, False):
            assert not kernels.occluded(pts, np.array([0]), np.array([0.0, 0.0, 1.0]), panels, use_jit=jit)[0]

    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_paths_agree(self, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform([0, 0, 0], [6, 6, 2.5], size=(200, 3))
        owner = rng.integers(-1, 5, size=200)
        panels = np.column_stack([rng.uniform(0, 6, (5, 4)), np.zeros(5), np.full(5, 2.5)])
        cam = np.array([3.0, 3.0, 1.2])
        a = kernels.occluded(pts, owner, cam, panels, use_jit=True)
        b = kernels.occluded(pts, owner, cam, panels, use_jit=False)
        np.testing.assert_array_equal(a, b)


class TestSegmentClearance:
    def test_known_distances(self):
        segs = np.array([[0.0, 0.0, 2.0, 0.0]])
        cells = np.array([[1.0, 1.0], [3.0, 0.0], [-1.0, -1.0]])
        for jit in (True, False):
            np.testing.assert_allclose(kernels.segment_clearance(cells, segs, use_jit=jit), [1.0, 1.0, np.sqrt(2)])

    def test_degenerate_segment_is_a_point(self):
        segs = np.array([[1.0, 1.0, 1.0, 1.0]])
        for jit in (True, False):
            np.testing.assert_allclose(kernels.segment_clearance(np.array([[4.0, 5.0]]), segs, use_jit=jit), [5.0])

    @given(seeds)
    @settings(max_examples=30, deadline=None)
    def test_paths_agree(self, seed):
        rng = np.random.default_rng(seed)
        cells = rng.uniform(0, 5, size=(100, 2))
        segs = rng.uniform(0, 5, size=(6, 4))
        np.testing.assert_allclose(
            kernels.segment_clearance(cells, segs, use_jit=True),
            kernels.segment_clearance(cells, segs, use_jit=False),
            atol=1e-12,
        )


class TestSwitch:
    @pytest.mark.parametrize("value,expected", [("1", "False"), ("", "True")])
    def test_env_flag(self, value, expected):
        env = dict(os.environ, SCENEGRAPH_SLAM_DISABLE_NUMBA=value)
        out = subprocess.run(
            [sys.executable, "-c", "from scenegraph_slam._jit import JIT_ENABLED; print(JIT_ENABLED)"],
            env=env, capture_output=True, text=True, check=True,
        )
        assert out.stdout.strip() == expected
