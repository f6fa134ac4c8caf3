"""Spatio-temporal sinusoidal embeddings and sequence flattening.

Each token of an N x X x Y x F stack of feature maps gets a temporal code for
its frame offset concatenated with a DETR-style row/column code, and the
stack is flattened to a single NXY x F sequence. ``toy_query_decoder`` is an
untrained single cross-attention layer that only exercises output shapes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor_core import FeatureMap


@dataclass(frozen=True)
class EmbeddingConfig:
    feature_dim: int = 32
    temporal_dim: int | None = None  # defaults to feature_dim // 4
    base_frequency: float = 10000.0

    def __post_init__(self):
        if self.temporal_dim is None:
            object.__setattr__(self, "temporal_dim", _even(self.feature_dim // 4))
        if self.feature_dim <= 0 or self.feature_dim % 2:
            raise ValueError(f"feature_dim must be positive and even, got {self.feature_dim}")
        if self.temporal_dim <= 0 or self.temporal_dim % 2:
            raise ValueError(f"temporal_dim must be positive and even, got {self.temporal_dim}")
        if self.spatial_dims <= 0:
            raise ValueError("temporal_dim leaves no channels for the spatial embedding")
        if self.base_frequency <= 0:
            raise ValueError("base_frequency must be positive")

    @property
    def spatial_dims(self) -> int:
        return self.feature_dim - self.temporal_dim


def _even(n: int) -> int:
    return max(2, n - n % 2)


def sinusoid(pos, dim: int, base: float) -> np.ndarray:
    """Channel ``c`` holds sin (c even) or cos (c odd) of ``pos * base**(-2*(c//2)/dim)``."""
    pos = np.asarray(pos, dtype=np.float64)
    c = np.arange(dim)
    freq = base ** (-2.0 * (c // 2) / dim)
    angle = pos[..., None] * freq
    return np.where(c % 2 == 0, np.sin(angle), np.cos(angle))


def temporal_embedding(t, cfg: EmbeddingConfig) -> np.ndarray:
    return sinusoid(t, cfg.temporal_dim, cfg.base_frequency)


def spatial_embedding(i, j, cfg: EmbeddingConfig) -> np.ndarray:
    """Row code in the first half of the channels, column code in the second."""
    half = cfg.spatial_dims // 2
    if cfg.spatial_dims % 2:
        raise ValueError("spatial_dims must be even")
    return np.concatenate(
        [sinusoid(i, half, cfg.base_frequency), sinusoid(j, half, cfg.base_frequency)], axis=-1
    )


@dataclass(frozen=True)
class TokenSequence:
    tokens: np.ndarray  # (L, F)
    provenance: np.ndarray  # (L, 3) int: frame n, row i, col j

    def __len__(self) -> int:
        return self.tokens.shape[0]


def flatten_with_embeddings(
    frames: Sequence[FeatureMap], offsets: Sequence[float], cfg: EmbeddingConfig
) -> TokenSequence:
    if len(frames) != len(offsets):
        raise ValueError(f"{len(frames)} frames but {len(offsets)} offsets")
    if not frames:
        raise ValueError("need at least one frame")
    shape = frames[0].shape
    for k, f in enumerate(frames):
        if f.shape != shape:
            raise ValueError(f"frame {k} has shape {f.shape}, expected {shape}")
    x, y, f = shape
    if f != cfg.feature_dim:
        raise ValueError(f"frames have {f} channels but feature_dim is {cfg.feature_dim}")

    ii, jj = np.meshgrid(np.arange(x), np.arange(y), indexing="ij")
    spatial = spatial_embedding(ii, jj, cfg).reshape(x * y, -1)
    blocks, prov = [], []
    for n, (fm, t) in enumerate(zip(frames, offsets)):
        temporal = np.broadcast_to(temporal_embedding(t, cfg), (x * y, cfg.temporal_dim))
        emb = np.concatenate([temporal, spatial], axis=1)
        blocks.append(fm.data.reshape(x * y, f) + emb)
        prov.append(np.stack([np.full(x * y, n), ii.ravel(), jj.ravel()], axis=1))
    return TokenSequence(np.concatenate(blocks), np.concatenate(prov).astype(np.int64))


@dataclass(frozen=True)
class QueryOutputs:
    control_points: np.ndarray  # (Q, 3, 2) in [0, 1], target-normalised
    probabilities: np.ndarray  # (Q,)
    association: np.ndarray  # (Q, assoc_dim)
    attention: np.ndarray  # (Q, L)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def toy_query_decoder(seq: TokenSequence, num_queries: int, seed: int = 0, assoc_dim: int = 8) -> QueryOutputs:
    if num_queries < 1:
        raise ValueError(f"num_queries must be >= 1, got {num_queries}")
    if len(seq) == 0:
        raise ValueError("token sequence is empty")
    f = seq.tokens.shape[1]
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(f)
    queries = rng.normal(0.0, 1.0, (num_queries, f))
    w_k = rng.normal(0.0, scale, (f, f))
    w_v = rng.normal(0.0, scale, (f, f))
    w_cp = rng.normal(0.0, scale, (f, 6))
    w_p = rng.normal(0.0, scale, f)
    w_a = rng.normal(0.0, scale, (f, assoc_dim))

    keys = seq.tokens @ w_k
    logits = queries @ keys.T * scale
    logits -= logits.max(axis=1, keepdims=True)
    attn = np.exp(logits)
    attn /= attn.sum(axis=1, keepdims=True)
    context = attn @ (seq.tokens @ w_v)

    control_points = _sigmoid(context @ w_cp).reshape(num_queries, 3, 2)
    eps = 1e-6
    probs = np.clip(_sigmoid(context @ w_p), eps, 1.0 - eps)
    assoc = np.tanh(context @ w_a)
    return QueryOutputs(control_points, probs, assoc, attn)
