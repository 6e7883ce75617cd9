"""Entity precision/recall and trajectory error against synthetic ground truth."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from math import radians

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import PoseSE3, SemanticClass, axis_angle_unsigned


@dataclass
class EntityRecord:
    """Something to match: a centroid, optionally a normal and a bounding box."""

    id: int
    centroid: np.ndarray
    normal: np.ndarray | None = None
    extent: np.ndarray | None = None


@dataclass
class EntityMatching:
    matched: list[tuple[int, int]]
    unmatched_detected: list[int]
    unmatched_truth: list[int]
    dist_tol: float
    angle_tol: float | None


@dataclass
class Metrics:
    precision: float
    recall: float
    detected: int
    gt: int
    matched: int
    ate_rmse: float | None = None


def _distance(det: EntityRecord, truth: EntityRecord) -> float:
    if truth.extent is not None:
        lo, hi = truth.extent
        gap = np.maximum(0.0, np.maximum(lo - det.centroid, det.centroid - hi))
        return float(np.linalg.norm(gap))
    return float(np.linalg.norm(det.centroid - truth.centroid))


def match_entities(detected, truth, dist_tol: float, angle_tol: float | None = None) -> EntityMatching:
    """One-to-one matching: most pairs first, then least total centroid distance.

    A pair is admissible within ``dist_tol`` (and ``angle_tol`` when both
    sides carry a normal). A truth record with an extent is measured from the
    detected centroid to that box, so a partly observed long wall still finds
    its match. Exact ties go to the lower ids. Since only admissible pairs are
    ever used, tightening either tolerance never adds a match.
    """
    detected, truth = list(detected), list(truth)
    admissible = np.zeros((len(detected), len(truth)), dtype=bool)
    cost = np.zeros(admissible.shape)
    for i, d in enumerate(detected):
        for j, t in enumerate(truth):
            dist = _distance(d, t)
            if dist > dist_tol:
                continue
            if angle_tol is not None and d.normal is not None and t.normal is not None:
                if axis_angle_unsigned(d.normal, t.normal) > angle_tol:
                    continue
            admissible[i, j] = True
            cost[i, j] = dist
    pairs = []
    if admissible.any():
        # inadmissible pairs cost more than any full admissible assignment, so cardinality wins first
        big = 1.0 + cost.sum() * 2.0
        rank_d = np.argsort(np.argsort([d.id for d in detected]))
        rank_t = np.argsort(np.argsort([t.id for t in truth]))
        tie = (rank_d[:, None] * len(truth) + rank_t[None, :] + 1) / (admissible.size + 1)
        c = np.where(admissible, cost + 1e-12 * tie, big)
        rows, cols = linear_sum_assignment(c)
        pairs = [(detected[i].id, truth[j].id) for i, j in zip(rows, cols) if admissible[i, j]]
    used_d = {p[0] for p in pairs}
    used_t = {p[1] for p in pairs}
    return EntityMatching(
        sorted(pairs),
        sorted(d.id for d in detected if d.id not in used_d),
        sorted(t.id for t in truth if t.id not in used_t),
        dist_tol,
        angle_tol,
    )


def precision_recall(m: EntityMatching | None = None, *, detected=None, gt=None, matched=None) -> Metrics:
    """Precision ``matched/detected`` and recall ``matched/gt``, with ``0/0 = 1``.

    Accepts a matching, or the three counts as keywords.
    """
    if m is not None:
        matched = len(m.matched)
        detected = matched + len(m.unmatched_detected)
        gt = matched + len(m.unmatched_truth)
    if detected is None or gt is None or matched is None:
        raise ValueError("precision_recall needs a matching or all three counts")
    if matched < 0 or matched > min(detected, gt):
        raise ValueError("matched count must lie in [0, min(detected, gt)]")
    precision = 1.0 if detected == 0 else matched / detected
    recall = 1.0 if gt == 0 else matched / gt
    return Metrics(precision, recall, int(detected), int(gt), int(matched))


def _positions(poses) -> np.ndarray:
    return np.array([p.translation if isinstance(p, PoseSE3) else np.asarray(p, dtype=float)[:3] for p in poses])


def align_rigid(est: np.ndarray, truth: np.ndarray, yaw_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares rotation and translation taking ``est`` onto ``truth`` (no scale)."""
    me, mt = est.mean(axis=0), truth.mean(axis=0)
    E, T = est - me, truth - mt
    if yaw_only:
        H = E[:, :2].T @ T[:, :2]
        u, _, vt = np.linalg.svd(H)
        s = np.diag([1.0, np.sign(np.linalg.det(vt.T @ u.T)) or 1.0])
        R = np.eye(3)
        R[:2, :2] = vt.T @ s @ u.T
    else:
        H = E.T @ T
        u, _, vt = np.linalg.svd(H)
        s = np.diag([1.0, 1.0, np.sign(np.linalg.det(vt.T @ u.T)) or 1.0])
        R = vt.T @ s @ u.T
    return R, mt - R @ me


def ate_rmse(estimated, truth, yaw_only: bool = False) -> float:
    """Translation RMSE in centimeters after rigid alignment of the estimate."""
    est = _positions(estimated)
    tru = _positions(truth)
    if est.shape[0] != tru.shape[0]:
        raise ValueError(f"trajectory length mismatch: {est.shape[0]} estimated vs {tru.shape[0]} true")
    if est.shape[0] == 0:
        raise ValueError("empty trajectories")
    R, t = align_rigid(est, tru, yaw_only)
    res = est @ R.T + t - tru
    return float(100.0 * np.sqrt(np.mean(np.sum(res * res, axis=1))))


# --------------------------------------------------------------------------
# graph-level evaluation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    plane_dist_tol: float = 0.3
    plane_angle_tol: float = radians(10.0)
    room_dist_tol: float = 1.0
    floor_dist_tol: float = 2.0
    yaw_only_alignment: bool = False


def truth_records(truth: dict) -> dict[str, list[EntityRecord]]:
    walls = [
        EntityRecord(w["id"], np.array(w["centroid"]), np.array(w["n"]), np.array(w["extent"])) for w in truth["walls"]
    ]
    gr = truth["ground"]
    grounds = [EntityRecord(0, np.array(gr["centroid"]), np.array(gr["n"]), np.array(gr["extent"]))]
    rooms = [EntityRecord(k, np.array(r["centroid"])) for k, r in enumerate(truth["rooms"])]
    floors = [EntityRecord(0, np.array(truth["floor_centroid"]))] if truth["rooms"] else []
    return {"walls": walls, "grounds": grounds, "rooms": rooms, "floors": floors}


def detected_records(g) -> dict[str, list[EntityRecord]]:
    walls, grounds = [], []
    for cid, c in sorted(g.components.items()):
        rec = EntityRecord(cid, np.array(c.plane.centroid), np.array(c.plane.normal))
        (walls if c.plane.cls is SemanticClass.WALL else grounds).append(rec)
    rooms = [EntityRecord(rid, np.array(r.cluster.centroid)) for rid, r in sorted(g.rooms.items())]
    floors = []
    if g.floor is not None:
        floors.append(EntityRecord(g.floor.id, np.array(g.floor.centroid)))
    return {"walls": walls, "grounds": grounds, "rooms": rooms, "floors": floors}


def _xy(records):
    return [EntityRecord(r.id, np.array([r.centroid[0], r.centroid[1], 0.0])) for r in records]


def evaluate_graph(g, truth: dict, cfg: EvalConfig | None = None, odometry_poses=None) -> dict:
    """Metrics document: per-kind precision/recall plus ATE of odometry and of the graph."""
    cfg = cfg or EvalConfig()
    det = detected_records(g)
    tru = truth_records(truth)
    kinds = {}
    total = [0, 0, 0]
    for kind in ("walls", "grounds", "rooms", "floors"):
        if kind in ("walls", "grounds"):
            m = match_entities(det[kind], tru[kind], cfg.plane_dist_tol, cfg.plane_angle_tol)
        else:
            tol = cfg.room_dist_tol if kind == "rooms" else cfg.floor_dist_tol
            m = match_entities(_xy(det[kind]), _xy(tru[kind]), tol)
        pr = precision_recall(m)
        kinds[kind] = {
            "detected": pr.detected,
            "gt": pr.gt,
            "matched": pr.matched,
            "precision": round(pr.precision, 6),
            "recall": round(pr.recall, 6),
        }
        total[0] += pr.detected
        total[1] += pr.gt
        total[2] += pr.matched
    overall = precision_recall(detected=total[0], gt=total[1], matched=total[2])
    doc = {
        "sequence_id": truth.get("sequence_id", ""),
        "entities": kinds,
        "overall": {
            "detected": overall.detected,
            "gt": overall.gt,
            "matched": overall.matched,
            "precision": round(overall.precision, 6),
            "recall": round(overall.recall, 6),
        },
    }
    true_poses = {int(k): PoseSE3.from_matrix(np.reshape(v, (4, 4))) for k, v in truth.get("trajectory", {}).items()}
    ids = [k for k in sorted(g.keyframes) if k in true_poses]
    if ids:
        est = [g.keyframes[k].pose for k in ids]
        ref = [true_poses[k] for k in ids]
        doc["ate_cm"] = {"graph": round(ate_rmse(est, ref, cfg.yaw_only_alignment), 6)}
        if odometry_poses is not None:
            odo = [odometry_poses[k] for k in ids if k in odometry_poses]
            if len(odo) == len(ids):
                doc["ate_cm"]["odometry"] = round(ate_rmse(odo, ref, cfg.yaw_only_alignment), 6)
        doc["ate_cm"]["alignment"] = "yaw" if cfg.yaw_only_alignment else "se3"
        doc["ate_cm"]["keyframes"] = len(ids)
    return doc


def metrics_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def format_table(doc: dict) -> str:
    """Plain-text table with a ``Detected / GT`` column per entity kind."""
    rows = [f"{'Entity':<10}{'Detected / GT':>16}{'Matched':>10}{'Precision':>12}{'Recall':>9}"]
    for kind, m in list(doc["entities"].items()) + [("overall", doc["overall"])]:
        rows.append(
            f"{kind:<10}{str(m['detected']) + ' / ' + str(m['gt']):>16}{m['matched']:>10}"
            f"{m['precision']:>12.2f}{m['recall']:>9.2f}"
        )
    ate = doc.get("ate_cm")
    if ate:
        rows.append("")
        if "odometry" in ate:
            rows.append(f"ATE odometry [cm]: {ate['odometry']:.2f}")
        rows.append(f"ATE graph    [cm]: {ate['graph']:.2f}")
    return "\n".join(rows) + "\n"


def plot_svg(doc: dict, path) -> None:
    """Bar plot of precision and recall per entity kind (SVG)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "scenegraph-slam"
    kinds = list(doc["entities"])
    p = [doc["entities"][k]["precision"] for k in kinds]
    r = [doc["entities"][k]["recall"] for k in kinds]
    x = np.arange(len(kinds))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar(x - 0.2, p, 0.4, label="precision")
    ax.bar(x + 0.2, r, 0.4, label="recall")
    ax.set_xticks(x, kinds)
    ax.set_ylim(0, 1.05)
    ax.legend(loc="lower right")
    title = doc.get("sequence_id", "")
    if doc.get("ate_cm"):
        title += f"  ATE {doc['ate_cm']['graph']:.2f} cm"
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def metrics_to_dict(m: Metrics) -> dict:
    return asdict(m)
