import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _helpers import separated_lanes, trace_merge
from lanegraphkit.camera_geometry import RigidTransform
from lanegraphkit.lane_graph import LaneGraph, build_incidence
from lanegraphkit.postmerge import (
    FrameEstimate,
    MergeParams,
    filter_by_probability,
    match_and_update,
    post_merge,
    to_reference,
)
from lanegraphkit.synthetic import default_rig

REF = [[0.0, 0.0], [0.0, 5.0], [0.0, 10.0]]
CAND = [[0.0, 5.0], [0.0, 11.5], [0.0, 18.0]]


def est(cps, probs=None, conn=None, n_points=100):
    return FrameEstimate.from_control_points(cps, probs, conn, n_points=n_points)


def test_filter_examples():
    cps = np.arange(18, dtype=float).reshape(3, 3, 2)
    conn = np.arange(9, dtype=float).reshape(3, 3) / 10
    e = est(cps, [0.9, 0.3, 0.7], conn)
    f = filter_by_probability(e, 0.5)
    np.testing.assert_array_equal(f.control_points, cps[[0, 2]])
    np.testing.assert_array_equal(f.connectivity, [[0.0, 0.2], [0.6, 0.8]])
    np.testing.assert_array_equal(f.polylines, e.polylines[[0, 2]])
    assert filter_by_probability(est(cps, [0.9] * 3), 0.5).num_queries == 3
    assert filter_by_probability(est(cps, [0.1] * 3), 0.5).num_queries == 0


def test_extension_example_matches_trace():
    merged = match_and_update(est([REF]), [est([CAND])], MergeParams())
    expected, log = trace_merge([REF], [CAND])
    assert len(log) == 1
    i, j, hits, var1, var2, branch = log[0]
    assert hits > 50
    assert var1 == 5.0
    assert var2 < 0.1
    assert branch == "keep-start"
    np.testing.assert_array_equal(merged.control_points[0], expected[0])
    np.testing.assert_array_equal(merged.control_points[0], [[0, 0], [0, 11.5], [0, 18]])


def test_backward_extension_keeps_end():
    back = [[0.0, -8.0], [0.0, -1.0], [0.0, 6.0]]
    merged = match_and_update(est([REF]), [est([back])], MergeParams())
    np.testing.assert_array_equal(merged.control_points[0], [[0, -8], [0, -1], [0, 10]])
    expected, log = trace_merge([REF], [back])
    assert log[0][-1] == "keep-end"
    np.testing.assert_array_equal(merged.control_points[0], expected[0])


def test_identical_candidate_is_fixpoint():
    merged = match_and_update(est([REF]), [est([REF])], MergeParams())
    np.testing.assert_array_equal(merged.control_points[0], REF)


def test_direction_gate():
    reverse = [CAND[2], CAND[1], CAND[0]]
    side = [[-5.0, 8.0], [0.0, 8.0], [5.0, 8.0]]
    merged = match_and_update(est([REF]), [est([reverse, side])], MergeParams())
    np.testing.assert_array_equal(merged.control_points[0], REF)


def test_distance_gate():
    shifted = [[p[0] + 2.5, p[1]] for p in CAND]
    merged = match_and_update(est([REF]), [est([shifted])], MergeParams())
    np.testing.assert_array_equal(merged.control_points[0], REF)


def test_single_estimate_graph():
    e = est([REF, [[0, 10], [0, 15], [0, 20]]], [0.9, 0.8])
    g = post_merge([e])
    assert g == LaneGraph.from_control_points(e.control_points)
    assert g.edges() == [(0, 1)]


def test_connectivity_scores_become_edges():
    far = [[20.0, 0.0], [20.0, 5.0], [20.0, 10.0]]
    e = est([REF, far], [0.9, 0.9], [[0, 0.7], [0.2, 0]])
    assert post_merge([e]).edges() == [(0, 1)]
    assert post_merge([e], connect_thresh=0.8).edges() == []


def test_empty_reference_gives_empty_graph():
    assert post_merge([est([REF], [0.1])]) == LaneGraph()
    with pytest.raises(ValueError):
        post_merge([])
    with pytest.raises(IndexError):
        post_merge([est([REF])], ref_index=3)


def test_to_reference_moves_geometry():
    ref = default_rig()
    ahead = ref.with_pose(RigidTransform.from_yaw(0.0, z=4.0))
    moved = to_reference(est([REF]), ahead, ref)
    np.testing.assert_allclose(moved.control_points[0], [[0, 4], [0, 9], [0, 14]], atol=1e-12)
    np.testing.assert_allclose(moved.polylines[0, -1], [0, 14], atol=1e-12)


def test_params_validated():
    with pytest.raises(ValueError):
        MergeParams(prob_thresh=1.5)
    with pytest.raises(ValueError):
        MergeParams(dir_thresh=-2)
    with pytest.raises(ValueError):
        MergeParams(dist_thresh=0)


def lane_set(rng, q):
    """Roughly forward-pointing curves in a 20 m square."""
    start = rng.uniform([-10, 0], [10, 10], (q, 2))
    heading = rng.uniform(-0.6, 0.6, q)
    length = rng.uniform(3, 15, q)
    end = start + np.stack([np.sin(heading), np.cos(heading)], -1) * length[:, None]
    mid = (start + end) / 2 + rng.normal(0, 1.0, (q, 2))
    return np.stack([start, mid, end], axis=1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_trace_on_random_scenes(seed):
    rng = np.random.default_rng(seed)
    ref = lane_set(rng, rng.integers(1, 4))
    frames = [lane_set(rng, rng.integers(0, 4)) for _ in range(2)]
    # overlap some candidates with reference lines so merges actually happen
    frames[0] = np.concatenate([frames[0], ref[:1] + rng.normal(0, 0.3, (1, 3, 2))])
    params = MergeParams(dist_thresh=2.0)
    merged = match_and_update(est(ref, n_points=24), [est(f, n_points=24) for f in frames], params)
    expected, _ = trace_merge(ref, list(np.concatenate(frames)), n_points=24)
    np.testing.assert_allclose(merged.control_points, np.array(expected), atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duplicate_frame_is_fixpoint(seed):
    rng = np.random.default_rng(seed)
    e = est(separated_lanes(rng, rng.integers(1, 6)))
    merged = match_and_update(e, [e], MergeParams())
    np.testing.assert_array_equal(merged.control_points, e.control_points)
    assert post_merge([e, e]) == post_merge([e])


def test_duplicate_merge_can_splice_diverging_siblings():
    # a ramp leaving the lane at its start overlaps it for most of its length;
    # scanned after the lane itself, it pulls the lane's middle control point
    lane = [[0.0, 0.0], [0.0, 10.0], [0.0, 20.0]]
    ramp = [[0.0, 0.0], [0.5, 10.0], [3.0, 20.0]]
    e = est([lane, ramp])
    merged = match_and_update(e, [e], MergeParams())
    expected, _ = trace_merge([lane, ramp], [lane, ramp])
    np.testing.assert_array_equal(merged.control_points, np.array(expected))
    assert not np.array_equal(merged.control_points, e.control_points)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_merge_invariants(seed):
    rng = np.random.default_rng(seed)
    ref_cp = lane_set(rng, rng.integers(1, 5))
    ref = est(ref_cp, rng.uniform(0, 1, len(ref_cp)))
    others = [est(lane_set(rng, 3), rng.uniform(0, 1, 3)) for _ in range(2)]
    filtered_ref = filter_by_probability(ref, 0.5)
    g = post_merge([ref] + others)
    assert len(g) == filtered_ref.num_queries

    # each single update keeps one of the line's own endpoints
    for cand in np.concatenate([o.control_points for o in others]):
        merged = match_and_update(filtered_ref, [est([cand])], MergeParams())
        for before, after in zip(filtered_ref.control_points, merged.control_points):
            assert np.array_equal(before[0], after[0]) or np.array_equal(before[2], after[2])

    alone = post_merge([ref])
    inc = (filtered_ref.connectivity >= 0.5) | build_incidence(filtered_ref.control_points)
    np.fill_diagonal(inc, False)
    assert alone == LaneGraph.from_control_points(filtered_ref.control_points, inc)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1), st.floats(0, 1))
def test_filter_monotone(seed, a, b):
    rng = np.random.default_rng(seed)
    e = est(lane_set(rng, 6), rng.uniform(0, 1, 6))
    lo, hi = min(a, b), max(a, b)
    assert filter_by_probability(e, hi).num_queries <= filter_by_probability(e, lo).num_queries
