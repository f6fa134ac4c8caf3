import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lanegraphkit.bev_warp import BevGrid, WarpedFrame, crop_to_target, warp_frame
from lanegraphkit.camera_geometry import RigidTransform
from lanegraphkit.synthetic import default_rig
from lanegraphkit.temporal_agg import aggregate, default_pre_transform
from lanegraphkit.tensor_core import BinaryMask, FeatureMap

GRID = BevGrid(x_min=-1, x_max=1, z_min=1, z_max=3, resolution=0.5, fov_margin=0.5)  # 6x6 FOV


def frame(values, mask, t=0.0):
    values = np.asarray(values, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if values.ndim == 2:
        values = values[..., None]
    return WarpedFrame(FeatureMap(np.where(mask[..., None], values, 0.0)), BinaryMask(mask), t, GRID)


def random_frame(rng, channels=3):
    shape = GRID.fov_shape
    return frame(rng.normal(size=(*shape, channels)), rng.random(shape) < 0.6)


def test_single_frame_unchanged():
    rng = np.random.default_rng(0)
    f = random_frame(rng)
    for op in ("max", "mean"):
        out = aggregate([f], op)
        assert out.features == f.features
        assert np.array_equal(out.coverage.data, f.mask.data)
        assert out.frame_count == 1


def test_two_values_max_and_mean():
    shape = GRID.fov_shape
    a = frame(np.full(shape, 2.0), np.ones(shape))
    b = frame(np.full(shape, 5.0), np.ones(shape))
    assert np.all(aggregate([a, b], "max").features.data == 5.0)
    assert np.all(aggregate([a, b], "mean").features.data == 3.5)


def test_disjoint_masks_select_valid_frame():
    shape = GRID.fov_shape
    left = np.zeros(shape, bool)
    left[:, :3] = True
    a = frame(np.full(shape, -4.0), left)
    b = frame(np.full(shape, -7.0), ~left)
    out = aggregate([a, b], "max")
    # a masked zero must not beat a valid negative value
    assert np.all(out.features.data[left] == -4.0)
    assert np.all(out.features.data[~left] == -7.0)
    assert out.coverage.data.all()


def test_uncovered_cells_are_zero():
    shape = GRID.fov_shape
    m = np.zeros(shape, bool)
    m[0, 0] = True
    out = aggregate([frame(np.full(shape, 3.0), m), frame(np.full(shape, 9.0), m)], "mean")
    assert out.features.data[0, 0, 0] == 6.0
    assert np.count_nonzero(out.features.data) == 1


def test_errors():
    with pytest.raises(ValueError):
        aggregate([])
    other = BevGrid(x_min=-1, x_max=1, z_min=1, z_max=3, resolution=0.5, fov_margin=1.0)
    f2 = WarpedFrame(FeatureMap.zeros(*other.fov_shape, 3), BinaryMask(np.zeros(other.fov_shape, bool)), 0.0, other)
    with pytest.raises(ValueError):
        aggregate([random_frame(np.random.default_rng(0)), f2])
    with pytest.raises(ValueError):
        aggregate([random_frame(np.random.default_rng(0))], "median")


def test_pre_transform_contract():
    x = np.random.default_rng(3).normal(size=(20, 6))
    assert default_pre_transform()(x) is x
    t1, t2 = default_pre_transform(11), default_pre_transform(11)
    np.testing.assert_array_equal(t1(x), t2(x))
    assert t1(x).shape == x.shape
    assert not np.array_equal(default_pre_transform(12)(x), t1(x))
    # residual form: output is never below the input
    assert np.all(t1(x) >= x)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations(range(3)))
def test_max_permutation_invariant_and_idempotent(seed, perm):
    rng = np.random.default_rng(seed)
    frames = [random_frame(rng) for _ in range(3)]
    base = aggregate(frames, "max")
    shuffled = aggregate([frames[i] for i in perm], "max")
    assert np.array_equal(base.features.data, shuffled.features.data)
    dup = aggregate(frames + [frames[perm[0]]], "max")
    assert np.array_equal(base.features.data, dup.features.data)
    assert np.array_equal(base.coverage.data, dup.coverage.data)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_coverage_is_union_and_monotone(seed, n):
    rng = np.random.default_rng(seed)
    frames = [random_frame(rng) for _ in range(n + 1)]
    small = aggregate(frames[:n]).coverage.data
    big = aggregate(frames).coverage.data
    assert np.array_equal(small, np.logical_or.reduce([f.mask.data for f in frames[:n]]))
    assert np.all(big >= small)
    assert np.all(aggregate(frames).features.data[~big] == 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mean_order_stable(seed):
    rng = np.random.default_rng(seed)
    frames = [random_frame(rng) for _ in range(4)]
    a = aggregate(frames, "mean").features.data
    b = aggregate(frames[::-1], "mean").features.data
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_one_frame_aggregate_then_crop_equals_crop():
    rig = default_rig()
    grid = BevGrid(x_min=-10, x_max=10, z_min=1, z_max=31, resolution=0.5, fov_margin=4)
    x = FeatureMap(np.random.default_rng(8).normal(size=(128, 256, 2)))
    w = warp_frame(x, rig.with_pose(RigidTransform.from_yaw(0.1, z=-2.0)), rig, grid)
    assert crop_to_target(aggregate([w]), grid) == crop_to_target(w, grid)
