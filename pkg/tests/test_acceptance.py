"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from scenegraph_slam import atlas
from scenegraph_slam.entities import KeyFrame
from scenegraph_slam.evaluation import ate_rmse, evaluate_graph, metrics_json, precision_recall
from scenegraph_slam.geometry import SemanticClass, axis_angle_unsigned
from scenegraph_slam.optim import floor_cost, parallel_cost, perpendicular_cost, room_centroid_cost
from scenegraph_slam.presets import PRESETS
from scenegraph_slam.recognition import (
    BUILDING_CLASSES,
    RecognitionConfig,
    range_filter,
    recognize,
    semantic_filter,
    voxel_downsample,
)
from scenegraph_slam.structure import StructuralConfig, marker_binds, room_predicates_hold, wall_contact_cells
from scenegraph_slam.synthetic import NoiseModel, generate_world, render_keyframes

from conftest import _run, pipeline_run, record_acceptance
from factories import MAKERS, jacobian_error

SEEDS = range(8)


def _svd_plane(pts):
    c = pts.mean(axis=0)
    n = np.linalg.svd(pts - c)[2][2]
    return n, -float(n @ c)


def _support(plane, pts, sigma):
    lo, hi = plane.bounds()
    pad = 3 * sigma + 1e-9
    near = np.abs(plane.signed_distance(pts)) <= pad
    return near & np.all((pts >= lo - pad) & (pts <= hi + pad), axis=1)


def _plane_recovery(preset, sigma=0.01, tol=0.03):
    """Per keyframe, compare detections with an SVD fit of every recoverable true plane.

    A true plane counts as recoverable when, on the recognizer's own voxel
    grid, at least ``min_inliers`` of its points cannot be claimed by another
    plane of the same class. The offset error is the distance between the two
    planes at the centroid of the true plane's points.
    """
    spec = PRESETS[preset](0)
    world = generate_world(spec)
    rendered = render_keyframes(world, noise=NoiseModel(point_sigma=sigma), seed=0)
    cfg = RecognitionConfig(ransac_inlier_tol=tol)
    truths = [(w.plane, SemanticClass.WALL) for w in world.walls] + [(world.ground, SemanticClass.GROUND)]
    worst_ang = worst_off = 0.0
    checked, misses, elapsed = 0, [], 0.0
    for kf in rendered.keyframes:
        probe = KeyFrame(kf.id, kf.pose, kf.cloud, kf.timestamp)
        t0 = time.perf_counter()
        found = recognize(probe, cfg, kf.id, rendered.class_ids)
        elapsed += time.perf_counter() - t0
        per_class = semantic_filter(kf.cloud, BUILDING_CLASSES, cfg.min_confidence, rendered.class_ids)
        for plane, cls in truths:
            raw = kf.pose.apply(per_class[cls])
            vox = kf.pose.apply(range_filter(voxel_downsample(per_class[cls], cfg.voxel_leaf), cfg.depth_min, cfg.depth_max))
            exclusive = _support(plane, vox, sigma)
            for other, ocls in truths:
                if other is not plane and ocls is cls:
                    exclusive &= np.abs(other.signed_distance(vox)) > tol
            if exclusive.sum() < cfg.min_inliers:
                continue
            checked += 1
            support = raw[_support(plane, raw, sigma)]
            n_ref, _ = _svd_plane(support)
            c_ref = support.mean(axis=0)
            # a detection belongs to this plane when roughly aligned and passing near its points
            cands = [
                p for p in found
                if p.cls is cls and math.degrees(axis_angle_unsigned(p.normal, n_ref)) <= 45.0
                and abs(float(p.signed_distance(c_ref))) <= 0.3
            ]
            if not cands:
                misses.append((kf.id, int(exclusive.sum())))
                continue
            best = min(cands, key=lambda p: abs(float(p.signed_distance(c_ref))))
            worst_ang = max(worst_ang, math.degrees(axis_angle_unsigned(best.normal, n_ref)))
            worst_off = max(worst_off, abs(float(best.signed_distance(c_ref))))
    return checked, misses, worst_ang, worst_off, elapsed


class TestAcceptance:
    def test_1_plane_recovery(self):
        parts, ok = [], True
        for preset in ("single-room", "corridor-3"):
            checked, misses, ang, off, secs = _plane_recovery(preset)
            ok &= checked > 0 and not misses and ang <= 1.0 and off <= 0.02 and secs < 5.0
            parts.append(f"{preset}: {checked} plane views, {len(misses)} missed, max {ang:.2f} deg / {off * 100:.2f} cm, {secs:.2f} s")
        assert record_acceptance(1, "plane recovery vs SVD fit", ok, "; ".join(parts))

    def test_2_entity_counts(self):
        worst_p = worst_r = 1.0
        runs = 0
        for preset in ("single-room", "corridor-3", "corridor-5"):
            for seed in SEEDS:
                run = pipeline_run(preset, seed, optimized=True)
                o = evaluate_graph(run.graph, run.truth)["overall"]
                worst_p, worst_r = min(worst_p, o["precision"]), min(worst_r, o["recall"])
                runs += 1
        ok = worst_p >= 0.9 and worst_r >= 0.9
        assert record_acceptance(2, "entity precision/recall", ok, f"{runs} runs, min precision {worst_p:.3f}, min recall {worst_r:.3f}")

    def test_3_table_arithmetic(self):
        m = precision_recall(detected=23, gt=22, matched=22)
        ok = abs(m.precision - 22 / 23) <= 1e-12 and round(m.precision, 2) == 0.96 and m.recall == 1.0
        assert record_acceptance(3, "23 / 22 with 22 matched", ok, f"precision {m.precision:.4f}, recall {m.recall:.2f}")

    def test_4_optimization_benefit(self):
        noise = NoiseModel(odom_rot_sigma_deg=0.2, odom_trans_sigma=0.005)
        gains, slowest, sizes = [], 0.0, set()
        for seed in SEEDS:
            run = _run("two-rooms-tour", seed, noise, optimized=True)
            ids = sorted(run.graph.keyframes)
            truth = [run.rendered.true_poses[k] for k in ids]
            before = ate_rmse([run.odometry_poses[k] for k in ids], truth)
            after = ate_rmse([run.graph.keyframes[k].pose for k in ids], truth)
            gains.append(1 - after / before)
            slowest = max(slowest, run.seconds)
            sizes.add(len(ids))
        ok = min(gains) >= 0.10 and slowest < 30.0 and sizes == {50}
        detail = (f"keyframes {sorted(sizes)}, ATE reduction min {min(gains) * 100:.1f}% mean {np.mean(gains) * 100:.1f}%, "
                  f"slowest seed {slowest:.1f} s")
        assert record_acceptance(4, "ATE reduction after optimization", ok, detail)

    def test_5_jacobians(self):
        t0 = time.perf_counter()
        worst = 0.0
        for kind, make in sorted(MAKERS.items()):
            rng = np.random.default_rng(2024)
            for _ in range(100):
                worst = max(worst, jacobian_error(*make(rng)))
        secs = time.perf_counter() - t0
        ok = worst <= 1e-4 and secs < 10.0
        assert record_acceptance(5, "analytic vs central-difference Jacobians", ok,
                                 f"{len(MAKERS)} factor kinds x 100 points, max rel error {worst:.2e}, {secs:.2f} s")

    def test_6_cost_examples(self):
        r2 = math.sqrt(0.5)
        cases = [
            (parallel_cost([0, 0, 1], [0, 0, 1]), 0.0),
            (parallel_cost([1, 0, 0], [0, 1, 0]), 1.0),
            (parallel_cost([1, 0, 0], [r2, r2, 0]), 1 - math.sqrt(2) / 2),
            (perpendicular_cost([1, 0, 0], [0, 1, 0]), 0.0),
            (perpendicular_cost([1, 0, 0], [1, 0, 0]), 1.0),
            (perpendicular_cost([1, 0, 0], [0.5, math.sqrt(3) / 2, 0]), 0.5),
            (room_centroid_cost([1, 1, 0], [[0, 0, 0], [2, 2, 0]]), 0.0),
            (room_centroid_cost([2, 1, 0], [[0, 0, 0], [2, 2, 0]]), 1.0),
            (floor_cost([2, 0, 0], [[0, 0, 0], [4, 0, 0]], np.eye(3)), 0.0),
            (floor_cost([2, 3, 0], [[0, 0, 0], [4, 0, 0]], np.eye(3)), 9.0),
            (floor_cost([3, 0, 0], [[0, 0, 0], [4, 0, 0]], np.diag([2.0, 1, 1])), 2.0),
        ]
        worst = max(abs(got - want) for got, want in cases)
        assert record_acceptance(6, "cost term examples", worst <= 1e-12, f"{len(cases)} cases, max error {worst:.1e}")

    def test_7_structural_postconditions(self):
        cfg = StructuralConfig()
        runs = [pipeline_run(p, 0) for p in ("single-room", "corridor-3", "corridor-5")]
        t0 = time.perf_counter()
        rooms = bindings = bad = 0
        for run in runs:
            g, db = run.graph, run.world.marker_db
            for room in g.rooms.values():
                rooms += 1
                if not room_predicates_hold(g, room, cfg):
                    bad += 1
                for w in room.walls:
                    if wall_contact_cells(g.components[w], room.cluster, cfg.wall_clearance, cfg.wall_clearance) < cfg.min_wall_contact_cells:
                        bad += 1
            bound = {r.marker: r for r in g.rooms.values() if r.marker is not None}
            for mid, marker in g.markers.items():
                if mid in bound:
                    bindings += 1
                    room = bound[mid]
                    if not marker_binds(g, room, marker.center, cfg.marker_proximity) or room.label != db[str(mid)]:
                        bad += 1
                elif str(mid) in db:
                    # an unbound known marker must have no free room satisfying the rule
                    free = [r for r in g.rooms.values() if r.marker is None]
                    if any(marker_binds(g, r, marker.center, cfg.marker_proximity) for r in free):
                        bad += 1
        secs = time.perf_counter() - t0
        ok = bad == 0 and rooms > 0 and bindings > 0 and secs < 1.0
        assert record_acceptance(7, "room and marker predicates on outputs", ok,
                                 f"{rooms} rooms, {bindings} marker bindings, {bad} violations, {secs * 1000:.0f} ms")

    def test_8_determinism_and_round_trip(self):
        docs = []
        for _ in range(2):
            run = _run("corridor-3", 3, None, optimized=True)
            docs.append(metrics_json(evaluate_graph(run.graph, run.truth, odometry_poses=run.odometry_poses)))
        g = run.graph
        back = atlas.loads(atlas.dumps(g))
        same_graph = atlas.graphs_equal(g, back, atol=1e-12) and back.edges() == g.edges()
        ok = docs[0] == docs[1] and same_graph
        detail = f"metrics JSON identical: {docs[0] == docs[1]}, round trip equal to 1e-12: {same_graph}"
        assert record_acceptance(8, "determinism and graph round trip", ok, detail)
