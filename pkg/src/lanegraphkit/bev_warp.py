"""Warp per-frame feature maps onto the reference bird's-eye-view grid.

The warp is a backward mapping: every BEV cell centre (reference ego frame)
is carried into the frame's ego frame, projected into its image, and the
feature map is bilinearly sampled there. Cells whose projection is invalid or
falls outside the feature map are masked out and hold zeros.

Grid layout: row ``i`` covers forward distance ``z``, increasing with ``i``;
column ``j`` covers lateral ``x``, increasing with ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_rows
from .camera_geometry import CameraRig, ground_to_pixels, relative_pose, transform_ground
from .tensor_core import BinaryMask, FeatureMap, bilinear_sample_many


def _whole(value: float, what: str) -> int:
    n = round(value)
    if abs(value - n) > 1e-9 * max(1.0, abs(value)):
        raise ValueError(f"{what} must be a whole number of cells, got {value:.6g}")
    return int(n)


@dataclass(frozen=True)
class BevGrid:
    x_min: float = -25.0
    x_max: float = 25.0
    z_min: float = 1.0
    z_max: float = 50.0
    resolution: float = 0.25
    fov_margin: float = 12.0

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError(f"x_min {self.x_min} must be below x_max {self.x_max}")
        if not self.z_min < self.z_max:
            raise ValueError(f"z_min {self.z_min} must be below z_max {self.z_max}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if self.fov_margin < 0:
            raise ValueError(f"fov_margin must be >= 0, got {self.fov_margin}")
        _whole((self.z_max - self.z_min) / self.resolution, "target height")
        _whole((self.x_max - self.x_min) / self.resolution, "target width")
        _whole(self.fov_margin / self.resolution, "fov_margin")

    @property
    def target_shape(self) -> tuple[int, int]:
        """(H', W') of the output window."""
        return (
            _whole((self.z_max - self.z_min) / self.resolution, "target height"),
            _whole((self.x_max - self.x_min) / self.resolution, "target width"),
        )

    @property
    def margin_cells(self) -> int:
        return _whole(self.fov_margin / self.resolution, "fov_margin")

    @property
    def fov_shape(self) -> tuple[int, int]:
        """(H'', W'') of the extended grid features are warped into."""
        h, w = self.target_shape
        m = 2 * self.margin_cells
        return h + m, w + m

    def cell_centres(self, fov: bool = True) -> np.ndarray:
        """(H, W, 2) array of (x, z) cell centres in reference ego metres."""
        m = self.fov_margin if fov else 0.0
        h, w = self.fov_shape if fov else self.target_shape
        x = self.x_min - m + (np.arange(w) + 0.5) * self.resolution
        z = self.z_min - m + (np.arange(h) + 0.5) * self.resolution
        zz, xx = np.meshgrid(z, x, indexing="ij")
        return np.stack([xx, zz], axis=-1)

    def target_window(self) -> tuple[float, float, float, float]:
        return self.x_min, self.x_max, self.z_min, self.z_max


@dataclass(frozen=True)
class WarpedFrame:
    features: FeatureMap
    mask: BinaryMask
    relative_time: float = 0.0
    grid: BevGrid = field(default_factory=BevGrid)

    def __post_init__(self):
        if self.features.shape[:2] != self.mask.data.shape:
            raise ValueError(
                f"features {self.features.shape[:2]} and mask {self.mask.data.shape} disagree"
            )


def _project_cells(frame_rig: CameraRig, ref_rig: CameraRig, centres: np.ndarray):
    if frame_rig.ego_pose == ref_rig.ego_pose:
        # reference-frame warp: no pose composition at all
        pts = centres
    else:
        pts = transform_ground(relative_pose(frame_rig, ref_rig), centres)
    return ground_to_pixels(frame_rig, pts)


def _warp(x: FeatureMap | None, image_shape, frame_rig, ref_rig, grid: BevGrid):
    centres = grid.cell_centres()
    h, w = grid.fov_shape
    img_h, img_w = image_shape
    channels = x.channels if x is not None else 0
    feats = np.zeros((h, w, channels))
    mask = np.zeros((h, w), dtype=bool)

    def block(rows: slice):
        uv, valid = _project_cells(frame_rig, ref_rig, centres[rows])
        u, v = uv[..., 0], uv[..., 1]
        inside = valid & (u >= 0) & (u <= img_w - 1) & (v >= 0) & (v <= img_h - 1)
        mask[rows] = inside
        if x is not None:
            values, _ = bilinear_sample_many(x, np.where(inside, u, -1.0), np.where(inside, v, -1.0))
            feats[rows] = values

    map_rows(block, h)
    return feats, mask


def warp_frame(
    x: FeatureMap,
    frame_rig: CameraRig,
    ref_rig: CameraRig,
    grid: BevGrid | None = None,
    relative_time: float = 0.0,
) -> WarpedFrame:
    """Resample ``x`` (seen by ``frame_rig``) onto ``ref_rig``'s BEV grid."""
    grid = grid or BevGrid()
    feats, mask = _warp(x, (x.height, x.width), frame_rig, ref_rig, grid)
    return WarpedFrame(FeatureMap(feats), BinaryMask(mask), float(relative_time), grid)


def warp_reference(x: FeatureMap, rig: CameraRig, grid: BevGrid | None = None) -> WarpedFrame:
    """Warp the reference frame itself; no ego pose enters the computation."""
    return warp_frame(x, rig, rig, grid, 0.0)


def compute_mask(
    frame_rig: CameraRig,
    ref_rig: CameraRig,
    grid: BevGrid | None = None,
    image_shape: tuple[int, int] = (128, 256),
) -> BinaryMask:
    """Validity mask of :func:`warp_frame` for an image of ``image_shape`` (H, W)."""
    _, mask = _warp(None, image_shape, frame_rig, ref_rig, grid or BevGrid())
    return BinaryMask(mask)


def _crop_slices(shape, grid: BevGrid):
    th, tw = grid.target_shape
    h, w = shape[:2]
    dh, dw = h - th, w - tw
    if dh < 0 or dw < 0:
        raise ValueError(f"map {h}x{w} is smaller than the target window {th}x{tw}")
    if dh % 2 or dw % 2:
        raise ValueError(f"map {h}x{w} is not centred on the target window {th}x{tw}")
    return slice(dh // 2, dh // 2 + th), slice(dw // 2, dw // 2 + tw)


def crop_to_target(w, grid: BevGrid | None = None) -> FeatureMap:
    """Extract the central target window from a FOV-sized map.

    Accepts a :class:`WarpedFrame`, anything with a ``features`` FeatureMap
    (such as an aggregated map), or a bare :class:`FeatureMap`.
    """
    grid = grid or getattr(w, "grid", None) or BevGrid()
    fm = w if isinstance(w, FeatureMap) else w.features
    rows, cols = _crop_slices(fm.shape, grid)
    return FeatureMap(fm.data[rows, cols])


def crop_mask(mask: BinaryMask, grid: BevGrid | None = None) -> BinaryMask:
    rows, cols = _crop_slices(mask.data.shape, grid or BevGrid())
    return BinaryMask(mask.data[rows, cols])
