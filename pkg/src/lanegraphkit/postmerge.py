"""Temporal post-processing: merge per-frame lane graph estimates.

Centerlines estimated in other frames are matched to the reference frame's
centerlines by heading and by point proximity, and matched reference curves
have their control points spliced with the candidate's. All estimates passed
to :func:`match_and_update` must already be in reference ego coordinates; use
:func:`to_reference` for that.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .camera_geometry import CameraRig, RigidTransform, relative_pose, transform_ground
from .lane_graph import DEFAULT_CONNECT_TOL, DEFAULT_POINTS, LaneGraph, build_incidence, interpolate_many


@dataclass(frozen=True)
class MergeParams:
    prob_thresh: float = 0.5
    dir_thresh: float = 0.5
    dist_thresh: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.prob_thresh <= 1.0:
            raise ValueError(f"prob_thresh must be in [0, 1], got {self.prob_thresh}")
        if not -1.0 <= self.dir_thresh <= 1.0:
            raise ValueError(f"dir_thresh must be in [-1, 1], got {self.dir_thresh}")
        if not self.dist_thresh > 0:
            raise ValueError(f"dist_thresh must be positive, got {self.dist_thresh}")


@dataclass(frozen=True)
class FrameEstimate:
    control_points: np.ndarray  # (Q, 3, 2) metres
    probabilities: np.ndarray  # (Q,)
    connectivity: np.ndarray  # (Q, Q)
    polylines: np.ndarray = field(default=None)  # (Q, omega, 2)
    relative_time: float = 0.0

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=np.float64).reshape(-1, 3, 2)
        q = cp.shape[0]
        probs = np.asarray(self.probabilities, dtype=np.float64).reshape(q)
        conn = np.asarray(self.connectivity, dtype=np.float64).reshape(q, q)
        poly = self.polylines
        poly = interpolate_many(cp) if poly is None else np.asarray(poly, dtype=np.float64)
        if poly.ndim != 3 or poly.shape[0] != q or poly.shape[2] != 2:
            raise ValueError(f"polylines shape {poly.shape} does not fit {q} centerlines")
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "connectivity", conn)
        object.__setattr__(self, "polylines", poly)

    @classmethod
    def from_control_points(
        cls, control_points, probabilities=None, connectivity=None, relative_time=0.0, n_points=DEFAULT_POINTS
    ) -> "FrameEstimate":
        cp = np.asarray(control_points, dtype=np.float64).reshape(-1, 3, 2)
        q = cp.shape[0]
        probs = np.ones(q) if probabilities is None else probabilities
        conn = np.zeros((q, q)) if connectivity is None else connectivity
        return cls(cp, probs, conn, interpolate_many(cp, n_points), relative_time)

    @property
    def num_queries(self) -> int:
        return self.control_points.shape[0]

    @property
    def n_points(self) -> int:
        return self.polylines.shape[1]


def transform_estimate(e: FrameEstimate, t: RigidTransform) -> FrameEstimate:
    """Apply a rigid transform to all planar geometry of ``e``.

    Bezier curves are affine invariant, so moving control points and polylines
    separately stays consistent.
    """
    return replace(
        e,
        control_points=transform_ground(t, e.control_points),
        polylines=transform_ground(t, e.polylines),
    )


def to_reference(e: FrameEstimate, frame_rig: CameraRig, ref_rig: CameraRig) -> FrameEstimate:
    return transform_estimate(e, relative_pose(ref_rig, frame_rig))


def filter_by_probability(e: FrameEstimate, prob_thresh: float) -> FrameEstimate:
    keep = np.flatnonzero(e.probabilities >= prob_thresh)
    return FrameEstimate(
        e.control_points[keep],
        e.probabilities[keep],
        e.connectivity[np.ix_(keep, keep)],
        e.polylines[keep],
        e.relative_time,
    )


def _directions(cps: np.ndarray) -> np.ndarray:
    # degenerate curves get a zero heading and so never pass a positive dir_thresh
    d = cps[:, -1] - cps[:, 0]
    norm = np.linalg.norm(d, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(norm > 0, d / norm, 0.0)


def match_and_update(ref: FrameEstimate, others: Sequence[FrameEstimate], params: MergeParams) -> FrameEstimate:
    """Splice candidate control points into matching reference centerlines.

    Candidates are scanned frame by frame, then by index; every accepted match
    updates the reference curve immediately and its polyline is
    re-interpolated before the next candidate is tested.
    """
    r_ref = ref.control_points.copy()
    omega_ref = ref.polylines.copy()
    n_points = ref.n_points
    if not others or ref.num_queries == 0:
        return replace(ref, control_points=r_ref, polylines=omega_ref)

    r_o = np.concatenate([o.control_points for o in others])
    omega_o = np.concatenate([o.polylines for o in others])
    if len(r_o) == 0:
        return replace(ref, control_points=r_ref, polylines=omega_ref)
    d_ref = _directions(r_ref)
    d_o = _directions(r_o)

    for i in range(len(r_ref)):
        dir_sel = d_o @ d_ref[i] > params.dir_thresh
        for j in np.flatnonzero(dir_sel):
            # rows: reference points, columns: candidate points
            dist = np.linalg.norm(omega_ref[i][:, None, :] - omega_o[j][None, :, :], axis=-1)
            hits = np.count_nonzero((dist < params.dist_thresh).any(axis=1))
            if hits <= 0.5 * n_points:
                continue
            var1 = dist[0].min()
            var2 = dist[-1].min()
            if var1 >= var2:
                r_ref[i] = np.stack([r_ref[i][0], r_o[j][1], r_o[j][2]])
            else:
                r_ref[i] = np.stack([r_o[j][0], r_o[j][1], r_ref[i][2]])
            omega_ref[i] = interpolate_many(r_ref[i], n_points)[0]

    return replace(ref, control_points=r_ref, polylines=omega_ref)


def post_merge(
    estimates: Sequence[FrameEstimate],
    ref_index: int = 0,
    params: MergeParams | None = None,
    connect_tol: float = DEFAULT_CONNECT_TOL,
    connect_thresh: float = 0.5,
) -> LaneGraph:
    """Merge all estimates into the reference frame's lane graph.

    Edges are the reference connectivity scores at or above ``connect_thresh``
    plus the geometric end-to-start incidence of the merged curves.
    """
    if not estimates:
        raise ValueError("post_merge needs at least one estimate")
    if not 0 <= ref_index < len(estimates):
        raise IndexError(f"reference index {ref_index} out of range for {len(estimates)} estimates")
    params = params or MergeParams()
    filtered = [filter_by_probability(e, params.prob_thresh) for e in estimates]
    ref = filtered[ref_index]
    others = [e for k, e in enumerate(filtered) if k != ref_index]
    merged = match_and_update(ref, others, params)
    if merged.num_queries == 0:
        return LaneGraph()
    incidence = (merged.connectivity >= connect_thresh) | build_incidence(merged.control_points, connect_tol)
    np.fill_diagonal(incidence, False)
    return LaneGraph.from_control_points(merged.control_points, incidence)
