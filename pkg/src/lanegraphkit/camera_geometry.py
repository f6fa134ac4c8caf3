"""Camera intrinsics, rigid poses and flat-ground projection.

Axis convention, used everywhere in the package:

* camera frame: x right, y down, z along the optical axis;
* ego frame: x lateral-right, y down, z forward, with the ground plane at y = 0;
* ``cam_from_ego`` maps ego coordinates into the camera frame;
* ``ego_pose`` maps ego coordinates into the global frame.

A positive yaw (rotation about +y, which points down) turns +z towards +x,
i.e. a right turn seen from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

AXIS_CONVENTION = "x-right, z-forward, y-down"
# rays shallower than this below the horizon are treated as hitting infinity
HORIZON_MARGIN_DEG = 0.5
_SIN_MARGIN = math.sin(math.radians(HORIZON_MARGIN_DEG))


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"intrinsic {name} must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(-1)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError(f"need a 3x3 rotation and 3-vector translation, got {r.shape}, {t.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("rigid transform entries must be finite")
        problem = rotation_problem(r, tol=1e-9)
        if problem:
            raise ValueError(problem)
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_yaw(cls, yaw: float, x: float = 0.0, z: float = 0.0, y: float = 0.0) -> "RigidTransform":
        """Planar pose: heading ``yaw`` (radians, right turn positive) at (x, y, z)."""
        return cls(yaw_matrix(yaw), np.array([x, y, z]))

    @classmethod
    def from_matrix(cls, m) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -(rt @ self.translation))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self @ other``: apply ``other`` first, then ``self``."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    __matmul__ = compose

    def __eq__(self, other):
        if not isinstance(other, RigidTransform):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(self.translation, other.translation)

    __hash__ = None


def yaw_matrix(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rotation_problem(r: np.ndarray, tol: float) -> str | None:
    """Describe why ``r`` is not a proper rotation, or return None."""
    err = float(np.max(np.abs(r.T @ r - np.eye(3))))
    if err > tol:
        return f"rotation matrix is not orthonormal (max |R^T R - I| = {err:.3g})"
    det = float(np.linalg.det(r))
    if abs(det - 1.0) > tol:
        return f"rotation matrix has determinant {det:.9g}, expected +1"
    return None


@dataclass(frozen=True)
class CameraRig:
    intrinsics: CameraIntrinsics
    cam_from_ego: RigidTransform
    ego_pose: RigidTransform
    camera_height: float

    def __post_init__(self):
        if not (self.camera_height > 0):
            raise ValueError(f"camera_height must be positive, got {self.camera_height}")
        # ground is the ego plane y = 0 and y points down
        centre_y = self.camera_centre[1]
        if abs(centre_y + self.camera_height) > 1e-6:
            raise ValueError(
                f"camera_height {self.camera_height} disagrees with extrinsics "
                f"(camera centre at ego y = {centre_y:.6g})"
            )

    @classmethod
    def level(
        cls,
        height: float,
        fx: float,
        fy: float,
        cx: float,
        cy: float,
        pitch: float = 0.0,
        ego_pose: RigidTransform | None = None,
    ) -> "CameraRig":
        """Forward-looking camera ``height`` metres above the ego origin.

        ``pitch`` tilts the optical axis downwards (radians).
        """
        s, c = math.sin(pitch), math.cos(pitch)
        # columns: camera x, y, z axes expressed in the ego frame
        ego_from_cam_r = np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])
        centre = np.array([0.0, -height, 0.0])
        ego_from_cam = RigidTransform(ego_from_cam_r, centre)
        return cls(
            CameraIntrinsics(fx, fy, cx, cy),
            ego_from_cam.inverse(),
            ego_pose if ego_pose is not None else RigidTransform.identity(),
            float(height),
        )

    @property
    def camera_centre(self) -> np.ndarray:
        """Camera centre in ego coordinates."""
        r, t = self.cam_from_ego.rotation, self.cam_from_ego.translation
        return -(r.T @ t)

    def with_pose(self, ego_pose: RigidTransform) -> "CameraRig":
        return CameraRig(self.intrinsics, self.cam_from_ego, ego_pose, self.camera_height)


def pixels_to_ground(rig: CameraRig, u, v) -> tuple[np.ndarray, np.ndarray]:
    """Back-project pixels onto the ground plane.

    Returns ``(xz, valid)`` where ``xz`` has shape ``u.shape + (2,)`` in the
    rig's ego frame. Pixels whose ray does not dip at least
    ``HORIZON_MARGIN_DEG`` below horizontal are invalid and come back as NaN.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    k = rig.intrinsics
    rays_cam = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)
    rays = rays_cam @ rig.cam_from_ego.rotation  # R^T applied row-wise
    centre = rig.camera_centre
    norm = np.linalg.norm(rays, axis=-1)
    valid = rays[..., 1] > _SIN_MARGIN * norm
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(valid, -centre[1] / rays[..., 1], np.nan)
    valid &= np.isfinite(scale) & (scale > 0)
    x = centre[0] + scale * rays[..., 0]
    z = centre[2] + scale * rays[..., 2]
    xz = np.stack([x, z], axis=-1)
    xz[~valid] = np.nan
    return xz, valid


def pixel_to_ground(rig: CameraRig, u: float, v: float) -> tuple[np.ndarray, bool]:
    xz, valid = pixels_to_ground(rig, np.array([u]), np.array([v]))
    return xz[0], bool(valid[0])


def ground_to_pixels(rig: CameraRig, xz) -> tuple[np.ndarray, np.ndarray]:
    """Project ground points (..., 2) in the rig's ego frame to pixel coords.

    Validity mirrors :func:`pixels_to_ground`: the point must lie in front of
    the camera and below the horizon margin, so the two are inverse on the
    shared valid domain.
    """
    xz = np.asarray(xz, dtype=np.float64)
    pts = np.stack([xz[..., 0], np.zeros(xz.shape[:-1]), xz[..., 1]], axis=-1)
    cam = rig.cam_from_ego.apply(pts)
    offset = pts - rig.camera_centre
    norm = np.linalg.norm(offset, axis=-1)
    valid = (cam[..., 2] > 0) & (offset[..., 1] > _SIN_MARGIN * norm)
    k = rig.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * cam[..., 0] / cam[..., 2] + k.cx
        v = k.fy * cam[..., 1] / cam[..., 2] + k.cy
    uv = np.stack([u, v], axis=-1)
    valid &= np.all(np.isfinite(uv), axis=-1)
    uv[~valid] = np.nan
    return uv, valid


def ground_to_pixel(rig: CameraRig, x: float, z: float) -> tuple[float, float, bool]:
    uv, valid = ground_to_pixels(rig, np.array([[x, z]]))
    return float(uv[0, 0]), float(uv[0, 1]), bool(valid[0])


def relative_pose(ref: CameraRig, frame: CameraRig) -> RigidTransform:
    """Transform taking ``frame`` ego coordinates to ``ref`` ego coordinates."""
    return ref.ego_pose.inverse() @ frame.ego_pose


def ref_from_frame(ref: CameraRig, frame: CameraRig, xz) -> np.ndarray:
    """Move ground points (..., 2) from ``frame``'s ego frame into ``ref``'s."""
    return transform_ground(relative_pose(ref, frame), xz)


def transform_ground(t: RigidTransform, xz) -> np.ndarray:
    xz = np.asarray(xz, dtype=np.float64)
    pts = np.stack([xz[..., 0], np.zeros(xz.shape[:-1]), xz[..., 1]], axis=-1)
    out = t.apply(pts)
    return np.stack([out[..., 0], out[..., 2]], axis=-1)
