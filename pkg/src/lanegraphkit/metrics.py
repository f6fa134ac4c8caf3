"""Lane graph evaluation: point-level F, per-centerline detection F and
connectivity F over matched centerlines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .lane_graph import DEFAULT_POINTS, LaneGraph

DEFAULT_MATCH_DIST = 0.5


@dataclass(frozen=True)
class EvalReport:
    mean_f: float
    detect_f: float
    connect_f: float
    matched_pairs: list[tuple[int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "mean_f": self.mean_f,
            "detect_f": self.detect_f,
            "connect_f": self.connect_f,
            "matched_pairs": [list(p) for p in self.matched_pairs],
        }


def f_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _min_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """For each point of ``a`` the distance to the nearest point of ``b``."""
    return cKDTree(b).query(a, k=1)[0]


def centerline_f(pred: LaneGraph, gt: LaneGraph, match_dist: float = DEFAULT_MATCH_DIST) -> float:
    if len(pred) == 0 and len(gt) == 0:
        return 1.0
    if len(pred) == 0 or len(gt) == 0:
        return 0.0
    p = pred.polylines(DEFAULT_POINTS).reshape(-1, 2)
    g = gt.polylines(DEFAULT_POINTS).reshape(-1, 2)
    precision = float(np.mean(_min_dists(p, g) <= match_dist))
    recall = float(np.mean(_min_dists(g, p) <= match_dist))
    return f_score(precision, recall)


def mean_polyline_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean nearest-point distance between two polylines."""
    return 0.5 * (float(_min_dists(a, b).mean()) + float(_min_dists(b, a).mean()))


def _cost_matrix(pp: np.ndarray, gp: np.ndarray) -> np.ndarray:
    """mean_polyline_distance for every (pred, gt) pair."""
    q, n = gp.shape[:2]
    pred_trees = [cKDTree(a) for a in pp]
    gt_trees = [cKDTree(b) for b in gp]
    cost = np.empty((len(pp), q))
    for i, a in enumerate(pp):
        # nearest gt point per line from each pred point: (n_pred_points, q)
        to_gt = np.stack([t.query(a, k=1)[0] for t in gt_trees], axis=1)
        to_pred = pred_trees[i].query(gp.reshape(-1, 2), k=1)[0].reshape(q, n)
        cost[i] = 0.5 * (to_gt.mean(axis=0) + to_pred.mean(axis=1))
    return cost


def detection_f(
    pred: LaneGraph, gt: LaneGraph, match_dist: float = DEFAULT_MATCH_DIST
) -> tuple[float, list[tuple[int, int]]]:
    """Greedy one-to-one matching by ascending mean polyline distance."""
    if len(pred) == 0 and len(gt) == 0:
        return 1.0, []
    if len(pred) == 0 or len(gt) == 0:
        return 0.0, []
    pp = pred.polylines(DEFAULT_POINTS)
    gp = gt.polylines(DEFAULT_POINTS)
    cost = _cost_matrix(pp, gp)
    order = np.argsort(cost, axis=None, kind="stable")
    used_p, used_g, pairs = set(), set(), []
    for flat in order:
        i, j = divmod(int(flat), len(gp))
        if cost[i, j] >= match_dist:
            break
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        pairs.append((i, j))
    tp = len(pairs)
    precision = tp / len(pred)
    recall = tp / len(gt)
    return f_score(precision, recall), sorted(pairs)


def connectivity_f(pred: LaneGraph, gt: LaneGraph, matched_pairs) -> float:
    """F-score of edges among matched centerlines.

    For every ordered pair of matched predictions the predicted edge is
    compared with the edge between their ground-truth partners.
    """
    if not matched_pairs:
        no_edges = not pred.incidence.any() and not gt.incidence.any()
        return 1.0 if no_edges else 0.0
    p_idx = np.array([p for p, _ in matched_pairs])
    g_idx = np.array([g for _, g in matched_pairs])
    pe = pred.incidence[np.ix_(p_idx, p_idx)]
    ge = gt.incidence[np.ix_(g_idx, g_idx)]
    tp = int(np.count_nonzero(pe & ge))
    fp = int(np.count_nonzero(pe & ~ge))
    fn = int(np.count_nonzero(~pe & ge))
    if tp + fp + fn == 0:
        return 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return f_score(precision, recall)


def evaluate(pred: LaneGraph, gt: LaneGraph, match_dist: float = DEFAULT_MATCH_DIST) -> EvalReport:
    mean_f = centerline_f(pred, gt, match_dist)
    detect_f, pairs = detection_f(pred, gt, match_dist)
    connect_f = connectivity_f(pred, gt, pairs)
    return EvalReport(mean_f, detect_f, connect_f, pairs)
