"""Shared fixtures and hypothesis strategies."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import strategies as st

from scenegraph_slam.geometry import Plane, PoseSE3, SemanticClass, so3_exp
from scenegraph_slam.pipeline import detect, integrate_poses, optimize
from scenegraph_slam.presets import PRESETS
from scenegraph_slam.synthetic import NoiseModel, generate_world, render_keyframes, truth_document

finite = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)
vec3s = st.tuples(finite, finite, finite).map(np.array)
rotvecs = st.tuples(*(st.floats(-3.0, 3.0) for _ in range(3))).map(np.array)


@st.composite
def unit_vectors(draw):
    v = np.array(draw(st.tuples(*(st.floats(-1.0, 1.0) for _ in range(3)))))
    if np.linalg.norm(v) < 1e-3:
        v = np.array([0.0, 0.0, 1.0])
    return v / np.linalg.norm(v)


@st.composite
def poses(draw):
    return PoseSE3(so3_exp(draw(rotvecs)), draw(vec3s))


@st.composite
def planes(draw, cls=SemanticClass.WALL):
    n = draw(unit_vectors())
    c = draw(vec3s)
    return Plane(n, -float(n @ c), cls, c, draw(st.integers(1, 1000)))


def random_pose(rng: np.random.Generator, scale: float = 2.0) -> PoseSE3:
    return PoseSE3(so3_exp(rng.normal(size=3)), rng.normal(scale=scale, size=3))


def random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def plane_through(normal, point, cls=SemanticClass.WALL, inliers=100, extent=None) -> Plane:
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    p = np.asarray(point, dtype=float)
    return Plane(n, -float(n @ p), cls, p, inliers, extent)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --------------------------------------------------------------------------
# end-to-end runs over the built-in worlds (cached; callers get copies)
# --------------------------------------------------------------------------

@dataclass
class Run:
    world: object
    rendered: object
    graph: object
    truth: dict
    odometry_poses: dict
    seconds: float


_RUNS: dict = {}


def _run(preset: str, seed: int, noise: NoiseModel | None, optimized: bool) -> Run:
    t0 = time.perf_counter()
    spec = PRESETS[preset](seed)
    spec.seed = seed
    world = generate_world(spec)
    rendered = render_keyframes(world, noise=noise, seed=seed)
    seq_id = f"{spec.name}-seed{seed}"
    ids = [k.id for k in rendered.keyframes]
    g = detect(
        rendered.keyframes, rendered.odometry, rendered.true_poses[0],
        marker_db=world.marker_db, class_ids=rendered.class_ids, seed=seed, sequence_id=seq_id,
    )
    if optimized:
        g, _ = optimize(g, rendered.odometry)
    odo = integrate_poses(rendered.true_poses[0], ids, rendered.odometry)
    return Run(world, rendered, g, truth_document(world, rendered, seq_id), odo, time.perf_counter() - t0)


def pipeline_run(preset: str, seed: int = 0, noise: NoiseModel | None = None, optimized: bool = False) -> Run:
    key = (preset, seed, repr(noise), optimized)
    if key not in _RUNS:
        _RUNS[key] = _run(preset, seed, noise, optimized)
    r = _RUNS[key]
    return Run(r.world, r.rendered, r.graph.snapshot(), r.truth, r.odometry_poses, r.seconds)


# --------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run
# --------------------------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> bool:
    line = f"ACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
