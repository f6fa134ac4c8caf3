"""Dense feature maps, binary masks and bilinear sampling.

Feature maps are stored channel-last (H, W, C) so that the feature vector of
one cell is contiguous; every per-cell operation downstream relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

CellTransform = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FeatureMap:
    data: np.ndarray  # (H, W, C)

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValueError(f"FeatureMap needs a (H, W, C) array, got shape {data.shape}")
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise ValueError("FeatureMap values must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, height: int, width: int, channels: int) -> "FeatureMap":
        return cls(np.zeros((height, width, channels)))

    @classmethod
    def full(cls, height: int, width: int, channels: int, value: float) -> "FeatureMap":
        return cls(np.full((height, width, channels), float(value)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, FeatureMap):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    __hash__ = None


@dataclass(frozen=True)
class BinaryMask:
    data: np.ndarray  # (H, W) bool

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"BinaryMask needs a (H, W) array, got shape {data.shape}")
        if data.dtype != bool:
            if not np.all((data == 0) | (data == 1)):
                raise ValueError("BinaryMask values must be 0 or 1")
            data = data.astype(bool)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def count(self) -> int:
        return int(self.data.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


def bilinear_sample_many(map: FeatureMap, u, v) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised bilinear lookup.

    ``u`` indexes columns and ``v`` rows, both in continuous cell coordinates
    where integer values hit cell centres. Returns ``(values, in_bounds)`` with
    values of shape ``u.shape + (C,)``; out-of-bounds samples are zero.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    h, w, c = map.data.shape
    inside = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    inside &= np.isfinite(u) & np.isfinite(v)

    out = np.zeros(u.shape + (c,), dtype=np.float64)
    if not inside.any():
        return out, inside
    ui = u[inside]
    vi = v[inside]
    u0 = np.floor(ui).astype(np.intp)
    v0 = np.floor(vi).astype(np.intp)
    # the last row/column has no right neighbour; weight 0 makes it harmless
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    du = (ui - u0)[:, None]
    dv = (vi - v0)[:, None]
    d = map.data
    top = d[v0, u0] * (1.0 - du) + d[v0, u1] * du
    bottom = d[v1, u0] * (1.0 - du) + d[v1, u1] * du
    out[inside] = top * (1.0 - dv) + bottom * dv
    return out, inside


def bilinear_sample(map: FeatureMap, u: float, v: float) -> tuple[np.ndarray, bool]:
    """Sample one feature vector at column ``u``, row ``v``.

    Outside ``[0, W-1] x [0, H-1]`` the zero vector comes back with the flag
    set to False, so callers can gate on validity instead of clamping.
    """
    values, inside = bilinear_sample_many(map, np.array([u]), np.array([v]))
    return values[0], bool(inside[0])


def map_cells(map: FeatureMap, f: CellTransform) -> FeatureMap:
    """Apply ``f`` to every cell's feature vector.

    ``f`` receives an (n, C) batch of feature vectors and must act row-wise,
    returning the same shape.
    """
    flat = map.data.reshape(-1, map.channels)
    out = np.asarray(f(flat), dtype=np.float64)
    if out.shape != flat.shape:
        raise ValueError(f"cell transform changed shape {flat.shape} -> {out.shape}")
    return FeatureMap(out.reshape(map.shape))
