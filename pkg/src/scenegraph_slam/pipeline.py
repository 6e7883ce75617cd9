"""Detect and optimize passes over a keyframe sequence."""

from __future__ import annotations

import logging

from .atlas import AssociationConfig, SceneGraph, insert_keyframe
from .entities import KeyFrame
from .geometry import PoseSE3
from .optim import FactorConfig, SolverConfig, build_problem, solve, write_back
from .recognition import RecognitionConfig, recognize
from .structure import StructuralConfig, run_structural_pass

log = logging.getLogger(__name__)


def integrate_poses(start: PoseSE3, keyframe_ids, odometry) -> dict[int, PoseSE3]:
    """Chain relative motions from ``start``; keyframes without a path keep the last pose."""
    steps = {(i, j): z for i, j, z, _ in odometry}
    poses = {}
    prev_id, prev = None, start
    for k in keyframe_ids:
        if prev_id is None:
            poses[k] = start
        else:
            z = steps.get((prev_id, k))
            if z is None:
                log.warning("no odometry from keyframe %d to %d; holding pose", prev_id, k)
                poses[k] = prev
            else:
                poses[k] = prev @ z
        prev_id, prev = k, poses[k]
    return poses


def detect(
    keyframes,
    odometry,
    start_pose: PoseSE3,
    recognition: RecognitionConfig | None = None,
    association: AssociationConfig | None = None,
    structural: StructuralConfig | None = None,
    marker_db: dict | None = None,
    class_ids: dict[int, str] | None = None,
    seed: int = 0,
    sequence_id: str = "",
    keep_clouds: bool = False,
) -> SceneGraph:
    """Recognize components in each keyframe at its odometry pose and build the graph.

    Structural passes run whenever ``structural.run_period`` of keyframe
    time has elapsed since the last one, and once more at the end.
    """
    recognition = recognition or RecognitionConfig()
    association = association or AssociationConfig()
    structural = structural or StructuralConfig()
    kfs = sorted(keyframes, key=lambda k: (k.timestamp, k.id))
    if not kfs:
        raise ValueError("sequence has no keyframes")
    poses = integrate_poses(start_pose, [k.id for k in kfs], odometry)
    g = SceneGraph(sequence_id=sequence_id)
    last_pass = None
    for src in kfs:
        kf = KeyFrame(src.id, poses[src.id], src.cloud, src.timestamp, markers=list(src.markers))
        recognize(kf, recognition, seed * 1_000_003 + kf.id, class_ids)
        if not keep_clouds:
            kf.cloud = None
        insert_keyframe(g, kf, association)
        if last_pass is None:
            last_pass = kf.timestamp
        elif kf.timestamp - last_pass >= structural.run_period - 1e-9:
            run_structural_pass(g, structural, marker_db)
            last_pass = kf.timestamp
    run_structural_pass(g, structural, marker_db)
    return g


def optimize(
    g: SceneGraph,
    odometry,
    factors: FactorConfig | None = None,
    solver: SolverConfig | None = None,
):
    """Build the joint problem, solve it and write the result into ``g``."""
    prob = build_problem(g, odometry, factors, solver)
    result = solve(prob)
    write_back(g, result.values)
    return g, result
