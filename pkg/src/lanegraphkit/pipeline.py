"""End-to-end helpers chaining synthetic data, warping, merging and scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bev_warp import BevGrid, compute_mask, crop_mask
from .lane_graph import DEFAULT_CONNECT_TOL, LaneGraph, clip_graph
from .metrics import DEFAULT_MATCH_DIST, EvalReport, evaluate
from .postmerge import MergeParams, filter_by_probability, post_merge, to_reference
from .synthetic import NoiseParams, SyntheticScene, gt_in_frame, simulate_frame_estimates


@dataclass(frozen=True)
class MergeTrial:
    gt: LaneGraph
    single: LaneGraph
    merged: LaneGraph
    single_report: EvalReport
    merged_report: EvalReport


def merge_trial(
    scene: SyntheticScene,
    indices: Sequence[int],
    ref_index: int,
    noise: NoiseParams,
    seed: int = 0,
    params: MergeParams | None = None,
    grid: BevGrid | None = None,
    match_dist: float = DEFAULT_MATCH_DIST,
) -> MergeTrial:
    """Merge simulated estimates of ``indices`` into frame ``ref_index``.

    Both the single-frame baseline (the reference estimate after probability
    filtering) and the merged graph are clipped to the reference target
    window and scored against the visible ground truth there.
    """
    grid = grid or BevGrid()
    params = params or MergeParams()
    indices = list(indices)
    if ref_index not in indices:
        raise ValueError(f"reference frame {ref_index} is not among {indices}")
    raw = simulate_frame_estimates(scene, indices, noise, seed, grid, ref_index)
    ref_rig = scene.rig(ref_index)
    in_ref = [to_reference(e, scene.rig(k), ref_rig) for e, k in zip(raw, indices)]
    r = indices.index(ref_index)

    window = grid.target_window()
    merged = clip_graph(post_merge(in_ref, r, params, DEFAULT_CONNECT_TOL), window)
    single = clip_graph(post_merge([in_ref[r]], 0, params, DEFAULT_CONNECT_TOL), window)
    gt = gt_in_frame(scene, ref_index, grid)
    return MergeTrial(gt, single, merged, evaluate(single, gt, match_dist), evaluate(merged, gt, match_dist))


def coverage_counts(scene: SyntheticScene, indices: Sequence[int], ref_index: int, grid: BevGrid | None = None):
    """Valid target-window cells seen by the reference alone and by all of ``indices``."""
    grid = grid or BevGrid()
    ref_rig = scene.rig(ref_index)
    masks = {k: crop_mask(compute_mask(scene.rig(k), ref_rig, grid, scene.image_shape), grid).data for k in indices}
    union = np.logical_or.reduce([masks[k] for k in indices])
    return int(masks[ref_index].sum()), int(union.sum())


__all__ = ["MergeTrial", "merge_trial", "coverage_counts", "filter_by_probability"]
