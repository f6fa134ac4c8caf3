import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lanegraphkit.bev_warp import BevGrid
from lanegraphkit.camera_geometry import relative_pose
from lanegraphkit.lane_graph import bezier_eval, validate
from lanegraphkit.metrics import evaluate
from lanegraphkit.postmerge import post_merge
from lanegraphkit.synthetic import (
    Layout,
    NoiseParams,
    default_rig,
    generate_scene,
    gt_in_frame,
    lane_pattern,
    render_ground_pattern,
    simulate_frame_estimates,
)


def test_scene_is_deterministic():
    a = generate_scene(7, "intersection", 3)
    b = generate_scene(7, "intersection", 3)
    assert a.gt_graph == b.gt_graph
    assert a.poses == b.poses
    assert generate_scene(8, "intersection", 3).gt_graph != a.gt_graph


@pytest.mark.parametrize("layout", list(Layout))
@pytest.mark.parametrize("lanes", [1, 2, 3])
def test_layouts_are_valid_graphs(layout, lanes):
    s = generate_scene(3, layout, lanes)
    assert validate(s.gt_graph) == []
    if layout is not Layout.STRAIGHT:
        assert len(s.gt_graph.edges()) >= 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6), st.floats(0.5, 3.0))
def test_trajectory_spacing(seed, frames, dt):
    s = generate_scene(seed, frames=frames, dt=dt)
    assert s.timestamps == tuple(k * dt for k in range(frames))
    for k in range(frames - 1):
        step = relative_pose(s.rig(k), s.rig(k + 1))
        assert 0 < step.translation[2] <= 11.5
        assert abs(step.translation[1]) < 1e-9


def test_gt_in_frame_is_clipped_to_window():
    s = generate_scene(2, "merge", 2)
    grid = BevGrid()
    g = gt_in_frame(s, 0, grid)
    assert len(g) > 0
    pts = g.polylines(50).reshape(-1, 2)
    x0, x1, z0, z1 = grid.target_window()
    assert np.all((pts[:, 0] >= x0 - 1e-6) & (pts[:, 0] <= x1 + 1e-6))
    assert np.all((pts[:, 1] >= z0 - 1e-6) & (pts[:, 1] <= z1 + 1e-6))


def test_noise_free_estimate_is_ground_truth():
    s = generate_scene(5, "intersection", 2)
    gt = gt_in_frame(s, 1)
    (e,) = simulate_frame_estimates(s, [1])
    assert e.num_queries == len(gt)
    # order is shuffled; every estimate line is some gt line exactly
    for cp in e.control_points:
        assert any(np.array_equal(cp, g) for g in gt.control_points)
    r = evaluate(post_merge([e]), gt)
    assert (r.mean_f, r.detect_f, r.connect_f) == (1.0, 1.0, 1.0)


def test_fragments_tile_the_original_line():
    s = generate_scene(1, "straight", 1)
    gt = gt_in_frame(s, 0)
    (e,) = simulate_frame_estimates(s, [0], NoiseParams(fragment_probability=1.0))
    assert e.num_queries >= 2
    curve = np.array([bezier_eval(gt.control_points[0], u) for u in np.linspace(0, 1, 2001)])
    for cp in e.control_points:
        for t in (0.0, 0.3, 1.0):
            # each fragment point lies on the source curve
            p = bezier_eval(cp, t)
            assert np.min(np.linalg.norm(curve - p, axis=1)) < 0.05
    # consecutive fragments are linked in the connectivity scores
    assert e.connectivity.sum() >= e.num_queries - 1


def test_false_positives_have_low_probability():
    s = generate_scene(4)
    (e,) = simulate_frame_estimates(s, [0], NoiseParams(false_positive_rate=5.0), seed=9)
    gt_count = len(gt_in_frame(s, 0))
    low = e.probabilities < 0.5
    assert low.sum() == e.num_queries - gt_count
    assert np.all(e.probabilities[~low] == pytest.approx(0.9))


def test_relative_time_and_bad_index():
    s = generate_scene(0, frames=3)
    es = simulate_frame_estimates(s, [0, 1, 2])
    assert [e.relative_time for e in es] == [-1.0, 0.0, 1.0]
    with pytest.raises(IndexError):
        simulate_frame_estimates(s, [3])


def test_noise_params_validated():
    with pytest.raises(ValueError):
        NoiseParams(control_point_sigma=-1)
    with pytest.raises(ValueError):
        NoiseParams(dropout_probability=1.5)


def test_render_constant_and_horizon():
    rig = default_rig()
    img = render_ground_pattern(lambda x, z: np.full_like(x, 3.0), rig)
    assert img.shape == (128, 256, 1)
    # rows at or above the principal row see sky
    assert np.all(img.data[:64] == 0.0)
    assert np.all(img.data[80:] == 3.0)


def test_lane_pattern_peaks_on_lanes():
    s = generate_scene(0, "straight", 2)
    pattern = lane_pattern(s.gt_graph)
    pose = s.poses[0]
    on_lane = gt_in_frame(s, 0).polylines(10)[0, 5]
    v = pattern(np.array([on_lane[0]]), np.array([on_lane[1]]), pose)
    off = pattern(np.array([on_lane[0] + 1.75]), np.array([on_lane[1]]), pose)
    assert v.shape == (1, 2)
    assert v[0, 0] > 0.99 and off[0, 0] < 0.1
