"""Deterministic synthetic scenes, ego trajectories, per-frame estimates and
ground-pattern renderings.

Everything here is a pure function of its seed and parameters, which is what
lets the rest of the package be tested against closed-form answers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .bev_warp import BevGrid
from .camera_geometry import CameraRig, RigidTransform, pixels_to_ground, transform_ground
from .lane_graph import LaneGraph, build_incidence, clip_graph, subdivide
from .postmerge import FrameEstimate
from .tensor_core import FeatureMap

LANE_WIDTH = 3.5
# pieces shorter than this are too small for a detector to report
MIN_PIECE_LENGTH = 1.0
DEFAULT_IMAGE_SHAPE = (128, 256)


class Layout(str, Enum):
    STRAIGHT = "straight"
    MERGE = "merge"
    INTERSECTION = "intersection"


@dataclass(frozen=True)
class SyntheticScene:
    gt_graph: LaneGraph  # global frame
    timestamps: tuple[float, ...]
    poses: tuple[RigidTransform, ...]  # ego -> global
    rig_template: CameraRig  # identity ego pose
    image_shape: tuple[int, int] = DEFAULT_IMAGE_SHAPE

    def __post_init__(self):
        if len(self.timestamps) != len(self.poses):
            raise ValueError("timestamps and poses differ in length")
        if any(b <= a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.poses)

    def rig(self, k: int) -> CameraRig:
        return self.rig_template.with_pose(self.poses[k])


@dataclass(frozen=True)
class NoiseParams:
    control_point_sigma: float = 0.0
    fragment_probability: float = 0.0
    dropout_probability: float = 0.0
    false_positive_rate: float = 0.0
    prob_noise_sigma: float = 0.0

    def __post_init__(self):
        for name, value in vars(self).items():
            if not value >= 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        for name in ("fragment_probability", "dropout_probability"):
            if getattr(self, name) > 1:
                raise ValueError(f"{name} must be at most 1, got {getattr(self, name)}")

    @classmethod
    def realistic(cls) -> "NoiseParams":
        return cls(0.3, 0.3, 0.05, 0.5, 0.5)


def default_rig(height: float = 1.5, image_shape=DEFAULT_IMAGE_SHAPE) -> CameraRig:
    """Level forward camera with a 90 degree horizontal field of view."""
    h, w = image_shape
    f = w / 2.0
    return CameraRig.level(height, f, f, (w - 1) / 2.0, (h - 1) / 2.0)


def _line(p0, p2, bend: float = 0.0) -> np.ndarray:
    """Control points from ``p0`` to ``p2``, middle point pushed sideways by ``bend``."""
    p0, p2 = np.asarray(p0, float), np.asarray(p2, float)
    mid = 0.5 * (p0 + p2)
    d = p2 - p0
    normal = np.array([d[1], -d[0]]) / np.linalg.norm(d)
    return np.stack([p0, mid + bend * normal, p2])


def _layout_lines(layout: Layout, lanes: int, z_start: float, z_end: float, rng) -> np.ndarray:
    xs = (np.arange(lanes) - (lanes - 1) / 2.0) * LANE_WIDTH
    if layout is Layout.STRAIGHT:
        return np.stack([_line((x, z_start), (x, z_end)) for x in xs])

    z_j = rng.uniform(z_start + 0.35 * (z_end - z_start), z_start + 0.5 * (z_end - z_start))
    lines = []
    if layout is Layout.MERGE:
        for k, x in enumerate(xs):
            if k == lanes - 1:
                lines.append(_line((x, z_start), (x, z_j)))
                lines.append(_line((x, z_j), (x, z_end)))
            else:
                lines.append(_line((x, z_start), (x, z_end)))
        x_r = xs[-1]
        ramp_len = rng.uniform(30.0, 45.0)
        p0 = np.array([x_r + rng.uniform(8.0, 12.0), z_j - ramp_len])
        p2 = np.array([x_r, z_j])
        lines.append(np.stack([p0, np.array([x_r + 0.5, z_j - 0.4 * ramp_len]), p2]))
        return np.stack(lines)

    # intersection: every lane splits at the junction, outer lanes also turn
    for x in xs:
        lines.append(_line((x, z_start), (x, z_j)))
        lines.append(_line((x, z_j), (x, z_end)))
    radius = rng.uniform(10.0, 16.0)
    x_r, x_l = xs[-1], xs[0]
    lines.append(np.array([[x_r, z_j], [x_r, z_j + radius], [x_r + radius + 15.0, z_j + radius]]))
    lines.append(np.array([[x_l, z_j], [x_l, z_j + radius + LANE_WIDTH], [x_l - radius - 15.0, z_j + radius + LANE_WIDTH]]))
    return np.stack(lines)


def generate_scene(
    seed: int,
    layout: Layout | str = Layout.STRAIGHT,
    lanes: int = 2,
    frames: int = 3,
    dt: float = 2.0,
    image_shape: tuple[int, int] = DEFAULT_IMAGE_SHAPE,
    max_step: float = 11.0,
) -> SyntheticScene:
    """Road layout plus an ego trajectory sampled every ``dt`` seconds.

    The ego drives along the left-most lane at a constant speed chosen so that
    consecutive poses are at most ``max_step`` metres apart, keeping each frame
    inside the default 12 m FOV margin of its neighbours.
    """
    if lanes < 1:
        raise ValueError(f"lanes must be >= 1, got {lanes}")
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    layout = Layout(layout)
    rng = np.random.default_rng([seed, 0x5CE4E])

    speed = rng.uniform(0.55, 1.0) * min(5.5, max_step / dt)
    z0 = rng.uniform(-5.0, 5.0)
    travel = speed * dt * (frames - 1)
    z_start = z0 - 30.0
    z_end = z0 + travel + 90.0
    local = _layout_lines(layout, lanes, z_start, z_end, rng)

    # the whole road is rotated and shifted so scenes are not axis aligned
    heading = rng.uniform(-0.3, 0.3)
    origin = rng.uniform(-20.0, 20.0, size=2)
    road = RigidTransform.from_yaw(heading, origin[0], origin[1])
    cps = transform_ground(road, local)
    gt = LaneGraph.from_control_points(cps, build_incidence(cps, 1e-6))

    ego_x = -(lanes - 1) / 2.0 * LANE_WIDTH
    poses = []
    for k in range(frames):
        local_pose = RigidTransform.from_yaw(rng.normal(0.0, 0.01), ego_x + rng.normal(0.0, 0.1), z0 + speed * dt * k)
        poses.append(road @ local_pose)
    timestamps = tuple(float(k * dt) for k in range(frames))
    return SyntheticScene(gt, timestamps, tuple(poses), default_rig(image_shape=image_shape), tuple(image_shape))


def gt_in_frame(scene: SyntheticScene, k: int, grid: BevGrid | None = None) -> LaneGraph:
    """Ground-truth graph in frame ``k``'s ego coordinates, clipped to its target window."""
    grid = grid or BevGrid()
    to_ego = scene.poses[k].inverse()
    gt = scene.gt_graph
    local = LaneGraph.from_control_points(transform_ground(to_ego, gt.control_points), gt.incidence)
    return clip_graph(local, grid.target_window(), min_length=MIN_PIECE_LENGTH)


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def simulate_frame_estimates(
    scene: SyntheticScene,
    indices: Sequence[int],
    noise: NoiseParams | None = None,
    seed: int = 0,
    grid: BevGrid | None = None,
    ref_index: int | None = None,
) -> list[FrameEstimate]:
    """Fake detector output for each frame in ``indices``, in that frame's ego frame.

    Visible ground truth is clipped to the frame's target window, optionally
    split into fragments, dropped, and jittered in control-point space; false
    positives are added with low existence probabilities. ``relative_time`` is
    the signed frame offset from ``ref_index`` (default: the middle index).
    """
    noise = noise or NoiseParams()
    grid = grid or BevGrid()
    if ref_index is None:
        ref_index = indices[len(indices) // 2] if len(indices) else 0
    out = []
    for k in indices:
        if not 0 <= k < len(scene):
            raise IndexError(f"frame {k} outside trajectory of length {len(scene)}")
        rng = np.random.default_rng([seed, k, 0xE57])
        visible = gt_in_frame(scene, k, grid)
        out.append(_noisy_estimate(visible, noise, rng, grid, float(k - ref_index)))
    return out


def _fragments(cp: np.ndarray, noise: NoiseParams, rng) -> list[np.ndarray]:
    if noise.fragment_probability == 0 or rng.random() >= noise.fragment_probability:
        return [cp]
    length = float(np.linalg.norm(cp[2] - cp[0]))
    n = int(rng.integers(2, 4))
    n = max(1, min(n, int(length // (2 * MIN_PIECE_LENGTH))))
    if n == 1:
        return [cp]
    cuts = np.sort(rng.uniform(0.15, 0.85, n - 1))
    # keep every piece at least a few percent long
    cuts = np.clip(cuts, 0.1, 0.9)
    cuts = np.unique(cuts)
    bounds = np.concatenate([[0.0], cuts, [1.0]])
    return [subdivide(cp, a, b) if (a, b) != (0.0, 1.0) else cp for a, b in zip(bounds[:-1], bounds[1:])]


def _noisy_estimate(visible: LaneGraph, noise: NoiseParams, rng, grid: BevGrid, relative_time: float) -> FrameEstimate:
    clean, owner, first, last = [], [], [], []
    for idx, c in enumerate(visible.centerlines):
        frags = _fragments(c.control_points, noise, rng)
        for f_i, f in enumerate(frags):
            clean.append(f)
            owner.append(idx)
            first.append(f_i == 0)
            last.append(f_i == len(frags) - 1)
    keep = [rng.random() >= noise.dropout_probability for _ in clean]

    q = len(clean)
    conn = np.zeros((q, q))
    for a in range(q):
        for b in range(q):
            if a == b:
                continue
            same_line = owner[a] == owner[b] and b == a + 1
            across = last[a] and first[b] and visible.incidence[owner[a], owner[b]]
            if same_line or across:
                conn[a, b] = 1.0

    true_p = 0.9
    cps, probs = [], []
    for a in range(q):
        cp = clean[a]
        if noise.control_point_sigma > 0:
            cp = cp + rng.normal(0.0, noise.control_point_sigma, cp.shape)
        cps.append(cp)
        logit = _logit(true_p) + (rng.normal(0.0, noise.prob_noise_sigma) if noise.prob_noise_sigma > 0 else 0.0)
        probs.append(float(_sigmoid(logit)))

    n_fp = int(rng.poisson(noise.false_positive_rate)) if noise.false_positive_rate > 0 else 0
    x0, x1, z0, z1 = grid.target_window()
    for _ in range(n_fp):
        start = np.array([rng.uniform(x0, x1), rng.uniform(z0, z1)])
        ang = rng.uniform(-math.pi, math.pi)
        length = rng.uniform(5.0, 20.0)
        end = start + length * np.array([math.sin(ang), math.cos(ang)])
        cps.append(_line(start, end, rng.normal(0.0, 1.0)))
        probs.append(float(rng.uniform(0.05, 0.45)))

    kept = [a for a in range(q) if keep[a]] + list(range(q, q + n_fp))
    big = np.zeros((q + n_fp, q + n_fp))
    big[:q, :q] = conn
    order = rng.permutation(len(kept))
    sel = np.array(kept, dtype=int)[order] if kept else np.zeros(0, dtype=int)
    cp_arr = np.array(cps).reshape(-1, 3, 2)[sel] if len(sel) else np.zeros((0, 3, 2))
    return FrameEstimate.from_control_points(
        cp_arr,
        np.array(probs)[sel] if len(sel) else np.zeros(0),
        big[np.ix_(sel, sel)],
        relative_time,
    )


GroundPattern = Callable[[np.ndarray, np.ndarray], np.ndarray]


def render_ground_pattern(
    pattern: GroundPattern, rig: CameraRig, image_shape: tuple[int, int] = DEFAULT_IMAGE_SHAPE
) -> FeatureMap:
    """Image whose pixels hold ``pattern(x, z)`` at the ground point they see.

    ``pattern`` takes arrays of ego-frame x and z and returns values of the
    same shape (one channel) or with a trailing channel axis. Pixels at or
    above the horizon are zero.
    """
    h, w = image_shape
    vv, uu = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    xz, valid = pixels_to_ground(rig, uu, vv)
    x = np.where(valid, xz[..., 0], 0.0)
    z = np.where(valid, xz[..., 1], 0.0)
    values = np.asarray(pattern(x, z), dtype=np.float64)
    if values.ndim == 2:
        values = values[..., None]
    values = np.where(valid[..., None], values, 0.0)
    return FeatureMap(values)


def lane_pattern(graph: LaneGraph, width: float = 0.75):
    """Two-channel ground pattern for rendering scene images.

    Channel 0 is a Gaussian ridge of ``width`` metres around every centerline
    of ``graph`` (global frame), channel 1 a smooth analytic texture. The
    returned callable takes ego-frame x, z and the ego-to-global pose.
    """
    tree = cKDTree(graph.polylines(200).reshape(-1, 2)) if len(graph) else None

    def pattern(x: np.ndarray, z: np.ndarray, to_global: RigidTransform) -> np.ndarray:
        g = transform_ground(to_global, np.stack([x, z], axis=-1))
        flat = g.reshape(-1, 2)
        ridge = np.zeros(len(flat))
        if tree is not None:
            d, _ = tree.query(flat, k=1)
            ridge = np.exp(-(d**2) / (2 * width**2))
        texture = np.sin(g[..., 0] / 8.0) * np.cos(g[..., 1] / 12.0)
        return np.stack([ridge.reshape(x.shape), texture], axis=-1)

    return pattern
