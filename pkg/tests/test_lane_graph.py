import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lanegraphkit.lane_graph import (
    BezierCenterline,
    DegenerateCenterline,
    LaneGraph,
    bezier_eval,
    build_incidence,
    clip_graph,
    clip_intervals,
    direction_vector,
    interpolate,
    subdivide,
    validate,
)

coord = st.floats(-100, 100, allow_nan=False)
point = st.tuples(coord, coord)
control_points = st.tuples(point, point, point).map(np.array)


def de_casteljau(cp, t):
    """Repeated linear interpolation, independent of the Bernstein form."""
    pts = [np.asarray(p, float) for p in cp]
    while len(pts) > 1:
        pts = [(1 - t) * a + t * b for a, b in zip(pts[:-1], pts[1:])]
    return pts[0]


def test_endpoints():
    c = BezierCenterline([[0, 0], [1, 3], [4, 1]])
    np.testing.assert_array_equal(bezier_eval(c, 0.0), [0, 0])
    np.testing.assert_array_equal(bezier_eval(c, 1.0), [4, 1])


def test_midpoint_example():
    c = BezierCenterline([[0, 0], [1, 1], [2, 0]])
    np.testing.assert_allclose(bezier_eval(c, 0.5), [1.0, 0.5], atol=0)


@pytest.mark.parametrize("t", [0.1, 0.37, 0.9])
def test_collinear_controls_stay_on_segment(t):
    c = BezierCenterline([[0, 0], [3, 3], [2, 2]])
    p = bezier_eval(c, t)
    assert abs(p[0] - p[1]) < 1e-12


@pytest.mark.parametrize("t", [-0.01, 1.01])
def test_parameter_range_checked(t):
    with pytest.raises(ValueError):
        bezier_eval(BezierCenterline([[0, 0], [1, 1], [2, 0]]), t)


def test_interpolate_examples():
    c = BezierCenterline([[0, 0], [1, 1], [2, 0]])
    np.testing.assert_array_equal(interpolate(c, 2), [[0, 0], [2, 0]])
    np.testing.assert_allclose(interpolate(c, 3), [[0, 0], [1, 0.5], [2, 0]], atol=1e-15)
    pts = interpolate(c)
    assert pts.shape == (100, 2)
    np.testing.assert_array_equal(pts[0], [0, 0])
    np.testing.assert_array_equal(pts[-1], [2, 0])
    with pytest.raises(ValueError):
        interpolate(c, 1)


def test_direction_vector():
    np.testing.assert_array_equal(direction_vector(BezierCenterline([[0, 0], [5, 3], [10, 0]])), [1, 0])
    np.testing.assert_array_equal(direction_vector(BezierCenterline([[1, 1], [0, 0], [1, 5]])), [0, 1])
    with pytest.raises(DegenerateCenterline):
        direction_vector(BezierCenterline([[1, 1], [3, 3], [1, 1]]))


def test_incidence_examples():
    x = BezierCenterline([[0, 0], [2.5, 0], [5, 0]])
    y = BezierCenterline([[5, 0], [7, 0], [9, 0]])
    inc = build_incidence([x, y], 0.5)
    assert inc.tolist() == [[False, True], [False, False]]

    far = BezierCenterline([[0, 10], [2, 10], [4, 10]])
    assert not build_incidence([x, far], 0.5).any()


@pytest.mark.parametrize("gap,expected", [(0.4, True), (0.6, False)])
def test_incidence_tolerance(gap, expected):
    x = BezierCenterline([[0, 0], [2.5, 0], [5, 0]])
    y = BezierCenterline([[5 + gap, 0], [7, 0], [9, 0]])
    # direct distance between x's end and y's start is ``gap``
    assert np.hypot(5 + gap - 5, 0) == pytest.approx(gap)
    assert build_incidence([x, y], 0.5)[0, 1] == expected


def test_validate():
    x = BezierCenterline([[0, 0], [2.5, 0], [5, 0]])
    y = BezierCenterline([[5, 0], [7, 0], [9, 0]])
    assert validate(LaneGraph.from_control_points([x.control_points, y.control_points])) == []
    bad_shape = LaneGraph((x, y), np.zeros((3, 3), dtype=bool))
    assert any("shape" in v for v in validate(bad_shape))
    loop = LaneGraph((x, y), np.array([[True, True], [False, False]]))
    assert any("self-loop" in v for v in validate(loop))
    far = LaneGraph((y, x), np.array([[False, True], [False, False]]))
    assert any("apart" in v for v in validate(far))


@settings(max_examples=100, deadline=None)
@given(control_points, st.floats(0, 1))
def test_matches_de_casteljau(cp, t):
    np.testing.assert_allclose(bezier_eval(cp, t), de_casteljau(cp, t), atol=1e-9, rtol=0)


@settings(max_examples=100, deadline=None)
@given(control_points, st.floats(0, 1))
def test_convex_hull(cp, t):
    p = bezier_eval(cp, t)
    # barycentric weights of p w.r.t. the control triangle are the Bernstein weights;
    # check them against an independent least-squares solve when the triangle is not flat
    a = np.vstack([cp.T, np.ones(3)])
    if abs(np.linalg.det(a)) < 1e-6:
        lo, hi = cp.min(axis=0) - 1e-9, cp.max(axis=0) + 1e-9
        assert np.all(p >= lo) and np.all(p <= hi)
        return
    w = np.linalg.solve(a, np.append(p, 1.0))
    assert np.all(w >= -1e-7)


@settings(max_examples=50, deadline=None)
@given(control_points, st.integers(2, 200))
def test_interpolate_endpoints_exact(cp, n):
    pts = interpolate(cp, n)
    assert np.array_equal(pts[0], cp[0]) and np.array_equal(pts[-1], cp[2])


@settings(max_examples=50, deadline=None)
@given(st.lists(control_points, min_size=1, max_size=6), point, st.floats(0.01, 5))
def test_incidence_translation_invariant(cps, shift, tol):
    # snap to a coarse lattice so the translation is exact in floating point
    cps = [np.round(c * 8) / 8 for c in cps]
    shift = np.round(np.array(shift) * 8) / 8
    moved = [c + shift for c in cps]
    np.testing.assert_array_equal(build_incidence(cps, tol), build_incidence(moved, tol))


@settings(max_examples=50, deadline=None)
@given(control_points, st.floats(0, 1), st.floats(0, 1))
def test_subdivide_traces_the_same_curve(cp, a, b):
    t0, t1 = min(a, b), max(a, b)
    sub = subdivide(cp, t0, t1)
    for s in (0.0, 0.3, 0.8, 1.0):
        np.testing.assert_allclose(bezier_eval(sub, s), de_casteljau(cp, t0 + s * (t1 - t0)), atol=1e-9)


def test_clip_intervals_straight_line():
    cp = np.array([[0.0, -10.0], [0.0, 20.0], [0.0, 50.0]])  # z = -10 + 60 t
    (t0, t1), = clip_intervals(cp, (-5, 5, 1, 30))
    assert t0 == pytest.approx(11 / 60, abs=1e-10)
    assert t1 == pytest.approx(40 / 60, abs=1e-10)


def test_clip_graph_keeps_inner_edges():
    a = np.array([[0.0, -10.0], [0.0, 0.0], [0.0, 10.0]])
    b = np.array([[0.0, 10.0], [0.0, 20.0], [0.0, 30.0]])
    c = np.array([[0.0, 30.0], [0.0, 50.0], [0.0, 70.0]])
    g = LaneGraph.from_control_points([a, b, c], connect_tol=1e-9)
    clipped = clip_graph(g, (-5, 5, 1, 50))
    assert len(clipped) == 3
    assert clipped.edges() == [(0, 1), (1, 2)]
    assert clipped.control_points[0, 0, 1] == pytest.approx(1.0)
    assert clipped.control_points[2, 2, 1] == pytest.approx(50.0)
    assert clip_graph(g, (10, 20, 1, 50)) == LaneGraph()
