"""Fuse warped frames into one BEV feature map with a masked max or mean."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .bev_warp import WarpedFrame
from .tensor_core import BinaryMask, CellTransform, FeatureMap


class AggregateOp(str, Enum):
    MAX = "max"
    MEAN = "mean"


@dataclass(frozen=True)
class AggregatedBev:
    features: FeatureMap
    coverage: BinaryMask
    frame_count: int


def identity_transform(x: np.ndarray) -> np.ndarray:
    return x


def default_pre_transform(seed: int | None = None, channels: int | None = None) -> CellTransform:
    """Untrained residual block ``x + relu(x W + b)`` with fixed-seed weights.

    Stand-in for the learned block applied before the reduction. With no seed
    the identity is returned. Weights are drawn lazily per channel count so a
    single transform works for any feature width.
    """
    if seed is None:
        return identity_transform
    cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def weights(c: int):
        if c not in cache:
            rng = np.random.default_rng([seed, c])
            cache[c] = (rng.normal(0.0, 1.0 / np.sqrt(c), (c, c)), rng.normal(0.0, 0.1, c))
        return cache[c]

    if channels is not None:
        weights(channels)

    def transform(x: np.ndarray) -> np.ndarray:
        w, b = weights(x.shape[-1])
        return x + np.maximum(x @ w + b, 0.0)

    return transform


def aggregate(
    frames: Sequence[WarpedFrame],
    op: AggregateOp | str = AggregateOp.MAX,
    pre_transform: CellTransform | None = None,
) -> AggregatedBev:
    """Per-cell reduction over the frames whose mask covers that cell.

    Masked cells are left out of the reduction rather than entering as zeros;
    cells no frame covers come out as zero. Mean divides by the number of
    covering frames.
    """
    if not frames:
        raise ValueError("aggregate needs at least one frame")
    op = AggregateOp(op)
    shape = frames[0].features.shape
    for k, f in enumerate(frames):
        if f.features.shape != shape:
            raise ValueError(f"frame {k} has shape {f.features.shape}, expected {shape}")

    masks = np.stack([f.mask.data for f in frames])  # (N, H, W)
    coverage = masks.any(axis=0)
    feats = []
    for f in frames:
        x = f.features.data
        if pre_transform is not None:
            x = np.asarray(pre_transform(x.reshape(-1, shape[2])), dtype=np.float64).reshape(shape)
        feats.append(x)
    stack = np.stack(feats)  # (N, H, W, C)
    valid = masks[..., None]

    if op is AggregateOp.MAX:
        out = np.where(valid, stack, -np.inf).max(axis=0)
    else:
        counts = masks.sum(axis=0)[..., None]
        total = np.where(valid, stack, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = total / counts
    out = np.where(coverage[..., None], out, 0.0)
    return AggregatedBev(FeatureMap(out), BinaryMask(coverage), len(frames))
