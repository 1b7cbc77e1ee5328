"""Synthetic stand-in for the two-pathway backbone: scripts -> grid features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embed.geometry import project_bbox_to_grid
from .generate import ClipRecord


@dataclass
class GridFeaturePack:
    """slow: F1 x W' x H' x d1, fast: F2 x W' x H' x d2 (float64)."""

    slow: np.ndarray
    fast: np.ndarray
    stride: int

    def pathway(self, name: str) -> np.ndarray:
        if name == "slow":
            return self.slow
        if name == "fast":
            return self.fast
        raise ValueError(f"unknown pathway {name!r}")

    def frame_index(self, name: str, fast_t: int) -> int | None:
        """Pathway frame holding fast frame ``fast_t``, or None if slow skips it."""
        if name == "fast":
            return fast_t
        return fast_t // self.stride if fast_t % self.stride == 0 else None

    def as_storage(self) -> "GridFeaturePack":
        """Round through float32, the on-disk precision."""
        return GridFeaturePack(self.slow.astype(np.float32).astype(np.float64),
                               self.fast.astype(np.float32).astype(np.float64), self.stride)


def render_master(clip: ClipRecord) -> np.ndarray:
    """Fast-rate frames over the full signature width (F2 x W' x H' x max(d1, d2))."""
    dims = clip.dims
    out = np.zeros((dims.F2, dims.Wg, dims.Hg, dims.d_sig))
    for obj in clip.objects:
        sig = np.asarray(obj.base_signature, dtype=np.float64)
        for t in range(obj.t_start, obj.t_end + 1):
            b = project_bbox_to_grid(obj.bbox(t), dims.W, dims.H, dims.Wg, dims.Hg)
            out[t, int(b.x0):int(b.x1), int(b.y0):int(b.y1)] += obj.texture_signal(t) * sig
    if clip.sigma_bg > 0:
        rng = np.random.default_rng(clip.noise_seed)
        out += rng.normal(0.0, clip.sigma_bg, size=out.shape)
    return out


def render_grid_features(clip: ClipRecord) -> GridFeaturePack:
    dims = clip.dims
    master = render_master(clip)
    slow = master[:: dims.stride, :, :, : dims.d1].copy()
    fast = master[:, :, :, : dims.d2].copy()
    return GridFeaturePack(slow=slow, fast=fast, stride=dims.stride)
