"""Directed lane graphs whose vertices are quadratic Bezier centerlines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_POINTS = 100
DEFAULT_CONNECT_TOL = 0.5


class DegenerateCenterline(ValueError):
    """Raised when a centerline's first and last control points coincide."""


@dataclass(frozen=True)
class BezierCenterline:
    control_points: np.ndarray  # (3, 2) metres, (x, z)

    def __post_init__(self):
        cp = np.array(self.control_points, dtype=np.float64)
        if cp.shape != (3, 2):
            raise ValueError(f"a centerline needs 3 planar control points, got shape {cp.shape}")
        if not np.all(np.isfinite(cp)):
            raise ValueError("control points must be finite")
        cp.setflags(write=False)
        object.__setattr__(self, "control_points", cp)

    @property
    def start(self) -> np.ndarray:
        return self.control_points[0]

    @property
    def end(self) -> np.ndarray:
        return self.control_points[2]

    def __eq__(self, other):
        if not isinstance(other, BezierCenterline):
            return NotImplemented
        return np.array_equal(self.control_points, other.control_points)

    __hash__ = None


def bernstein_weights(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    s = 1.0 - t
    return np.stack([s * s, 2.0 * t * s, t * t], axis=-1)


def bezier_eval(c: BezierCenterline | np.ndarray, t: float) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"Bezier parameter must lie in [0, 1], got {t}")
    cp = _control_points(c)
    return bernstein_weights(t) @ cp


def interpolate(c: BezierCenterline | np.ndarray, n_points: int = DEFAULT_POINTS) -> np.ndarray:
    """Sample ``n_points`` points at evenly spaced parameters, endpoints included."""
    if n_points < 2:
        raise ValueError(f"need at least 2 interpolation points, got {n_points}")
    cp = _control_points(c)
    t = np.linspace(0.0, 1.0, n_points)
    pts = bernstein_weights(t) @ cp
    # pin the endpoints; the Bernstein sum is exact there but keep it explicit
    pts[0] = cp[0]
    pts[-1] = cp[2]
    return pts


def interpolate_many(control_points: np.ndarray, n_points: int = DEFAULT_POINTS) -> np.ndarray:
    """Batch version of :func:`interpolate` for a (Q, 3, 2) array."""
    cps = np.asarray(control_points, dtype=np.float64).reshape(-1, 3, 2)
    if n_points < 2:
        raise ValueError(f"need at least 2 interpolation points, got {n_points}")
    w = bernstein_weights(np.linspace(0.0, 1.0, n_points))
    pts = np.einsum("pk,qkd->qpd", w, cps)
    if len(cps):
        pts[:, 0] = cps[:, 0]
        pts[:, -1] = cps[:, 2]
    return pts


def direction_vector(c: BezierCenterline | np.ndarray) -> np.ndarray:
    cp = _control_points(c)
    d = cp[2] - cp[0]
    norm = float(np.hypot(d[0], d[1]))
    if norm == 0.0:
        raise DegenerateCenterline("first and last control points coincide")
    return d / norm


def subdivide(c: BezierCenterline | np.ndarray, t0: float, t1: float) -> np.ndarray:
    """Control points of the exact sub-curve over parameters ``[t0, t1]``.

    A quadratic restricted to an interval is again a quadratic; its control
    points are the blossom values f(t0,t0), f(t0,t1), f(t1,t1).
    """
    cp = _control_points(c)

    def blossom(a, b):
        return (1 - a) * (1 - b) * cp[0] + ((1 - a) * b + a * (1 - b)) * cp[1] + a * b * cp[2]

    return np.stack([blossom(t0, t0), blossom(t0, t1), blossom(t1, t1)])


def build_incidence(centerlines, connect_tol: float = DEFAULT_CONNECT_TOL) -> np.ndarray:
    cps = np.array([_control_points(c) for c in centerlines], dtype=np.float64).reshape(-1, 3, 2)
    ends = cps[:, 2]
    starts = cps[:, 0]
    gaps = np.linalg.norm(ends[:, None, :] - starts[None, :, :], axis=-1)
    incidence = gaps <= connect_tol
    np.fill_diagonal(incidence, False)
    return incidence


@dataclass(frozen=True)
class LaneGraph:
    centerlines: tuple[BezierCenterline, ...] = ()
    incidence: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=bool))

    def __post_init__(self):
        lines = tuple(
            c if isinstance(c, BezierCenterline) else BezierCenterline(c) for c in self.centerlines
        )
        inc = np.array(self.incidence, dtype=bool)
        inc.setflags(write=False)
        object.__setattr__(self, "centerlines", lines)
        object.__setattr__(self, "incidence", inc)

    @classmethod
    def from_control_points(cls, control_points, incidence=None, connect_tol: float = DEFAULT_CONNECT_TOL):
        cps = np.asarray(control_points, dtype=np.float64).reshape(-1, 3, 2)
        lines = tuple(BezierCenterline(cp) for cp in cps)
        if incidence is None:
            incidence = build_incidence(lines, connect_tol)
        return cls(lines, incidence)

    def __len__(self) -> int:
        return len(self.centerlines)

    @property
    def control_points(self) -> np.ndarray:
        if not self.centerlines:
            return np.zeros((0, 3, 2))
        return np.stack([c.control_points for c in self.centerlines])

    def edges(self) -> list[tuple[int, int]]:
        if self.incidence.ndim != 2:
            return []
        return [(int(a), int(b)) for a, b in zip(*np.nonzero(self.incidence))]

    def polylines(self, n_points: int = DEFAULT_POINTS) -> np.ndarray:
        return interpolate_many(self.control_points, n_points)

    def __eq__(self, other):
        if not isinstance(other, LaneGraph):
            return NotImplemented
        return (
            np.array_equal(self.control_points, other.control_points)
            and self.incidence.shape == other.incidence.shape
            and np.array_equal(self.incidence, other.incidence)
        )

    __hash__ = None


def validate(g: LaneGraph, connect_tol: float = DEFAULT_CONNECT_TOL) -> list[str]:
    """Return human-readable invariant violations; empty when ``g`` is well formed."""
    problems = []
    n = len(g.centerlines)
    inc = g.incidence
    if inc.ndim != 2 or inc.shape != (n, n):
        problems.append(f"incidence shape {inc.shape} does not match {n} centerlines")
        return problems
    for i in range(n):
        if inc[i, i]:
            problems.append(f"self-loop on centerline {i}")
    for a, b in zip(*np.nonzero(inc)):
        if a == b:
            continue
        gap = float(np.linalg.norm(g.centerlines[a].end - g.centerlines[b].start))
        if gap > connect_tol:
            problems.append(f"edge {a}->{b} joins points {gap:.3f} m apart (tol {connect_tol})")
    return problems


def _control_points(c) -> np.ndarray:
    if isinstance(c, BezierCenterline):
        return c.control_points
    return np.asarray(c, dtype=np.float64).reshape(3, 2)


Window = tuple[float, float, float, float]  # x_min, x_max, z_min, z_max


def _inside(pts: np.ndarray, window: Window) -> np.ndarray:
    x0, x1, z0, z1 = window
    return (pts[..., 0] >= x0) & (pts[..., 0] <= x1) & (pts[..., 1] >= z0) & (pts[..., 1] <= z1)


def clip_intervals(c, window: Window, samples: int = 1001, min_length: float = 0.0) -> list[tuple[float, float]]:
    """Parameter intervals over which the curve lies inside ``window``.

    Boundaries are located by dense sampling then refined by bisection, so
    they are accurate to ~1e-12 in ``t``. Pieces shorter than ``min_length``
    metres (chord) are dropped.
    """
    cp = _control_points(c)
    t = np.linspace(0.0, 1.0, samples)
    inside = _inside(bernstein_weights(t) @ cp, window)

    def refine(a, b, a_inside):
        # a and b straddle the boundary; a_inside tells which side a is on
        for _ in range(60):
            m = 0.5 * (a + b)
            if _inside(bernstein_weights(m) @ cp, window) == a_inside:
                a = m
            else:
                b = m
        return a

    out = []
    k = 0
    while k < samples:
        if not inside[k]:
            k += 1
            continue
        start = k
        while k + 1 < samples and inside[k + 1]:
            k += 1
        t0 = 0.0 if start == 0 else refine(t[start], t[start - 1], True)
        t1 = 1.0 if k == samples - 1 else refine(t[k], t[k + 1], True)
        p0 = bernstein_weights(t0) @ cp
        p1 = bernstein_weights(t1) @ cp
        if t1 > t0 and np.linalg.norm(p1 - p0) >= min_length:
            out.append((float(t0), float(t1)))
        k += 1
    return out


def clip_graph(g: LaneGraph, window: Window, min_length: float = 0.0) -> LaneGraph:
    """Restrict a graph to ``window``.

    Every visible piece of a centerline becomes a vertex. An edge x->y of the
    input survives when the piece of x ending at its original end and the
    piece of y starting at its original start are both kept.
    """
    pieces, owner, keeps_start, keeps_end = [], [], [], []
    for idx, c in enumerate(g.centerlines):
        for t0, t1 in clip_intervals(c, window, min_length=min_length):
            if t0 == 0.0 and t1 == 1.0:
                pieces.append(c.control_points.copy())
            else:
                pieces.append(subdivide(c, t0, t1))
            owner.append(idx)
            keeps_start.append(t0 == 0.0)
            keeps_end.append(t1 == 1.0)
    n = len(pieces)
    inc = np.zeros((n, n), dtype=bool)
    for a in range(n):
        if not keeps_end[a]:
            continue
        for b in range(n):
            if a != b and keeps_start[b] and g.incidence[owner[a], owner[b]]:
                inc[a, b] = True
    if not pieces:
        return LaneGraph()
    return LaneGraph.from_control_points(np.stack(pieces), inc)
