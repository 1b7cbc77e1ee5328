"""Object state, motion and interaction embeddings.

Pooled grid features are constants (the backbone is not trained here), so a
state sequence is stored as two arrays, pooled features ``P`` (T x d) and
normalised box corners ``N`` (T x 4). The learned coordinate map ``W_c`` is
applied at forward time, which keeps the OSE differentiable in ``W_c``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..tensor import (ParamStore, Tensor, add, concat, matmul, mean, mul, reshape, sigmoid, slice_axis,
                      tanh, transpose)
from .geometry import BBox, normalized_coords, project_bbox_to_grid, union_box

log = logging.getLogger(__name__)

PATHWAYS = ("slow", "fast")


def pool_in_box(grid: np.ndarray, box: BBox) -> np.ndarray:
    """Mean feature vector over cells [x0, x1) x [y0, y1) of a W' x H' x d frame."""
    x0, y0, x1, y1 = (int(v) for v in box.as_tuple())
    if not (0 <= x0 < x1 <= grid.shape[0] and 0 <= y0 < y1 <= grid.shape[1]):
        raise ValueError(f"box {box.as_tuple()} is empty or outside grid {grid.shape[:2]}")
    return grid[x0:x1, y0:y1].mean(axis=(0, 1))


def coord_embed(box: BBox, w_c: Tensor, grid_w: int, grid_h: int) -> Tensor:
    if w_c.shape[1] != 4:
        raise ValueError(f"W_c must be d_c x 4, got {w_c.shape}")
    n = Tensor(np.asarray(normalized_coords(box, grid_w, grid_h)).reshape(4, 1))
    return reshape(matmul(w_c, n), (w_c.shape[0],))


@dataclass
class ObjectStateSeq:
    """Per-frame pooled features and box corners of one object in one pathway."""

    object_id: int
    pathway: str
    frames: list[int]            # pathway frame indices
    boxes: list[BBox]            # grid boxes
    pooled: np.ndarray           # T x d
    coords: np.ndarray           # T x 4, normalised to [0, 1]

    def __len__(self) -> int:
        return len(self.frames)

    def states(self, w_c: Tensor | None, use_disp: bool = True) -> Tensor:
        """s_t = [p_t, W_c n_t] stacked over frames (T x (d + d_c))."""
        p = Tensor(self.pooled)
        if w_c is None:
            raise ValueError("coordinate map W_c is required")
        if use_disp:
            c = matmul(Tensor(self.coords), transpose(w_c))
        else:
            c = Tensor(np.zeros((len(self.frames), w_c.shape[0])))
        return concat([p, c], axis=1)


@dataclass
class SkippedObject:
    object_id: int
    pathway: str
    reason: str


def _frames_for(obj, pack, pathway: str) -> list[tuple[int, int]]:
    """(fast frame, pathway frame) pairs where the object is visible."""
    out = []
    for t in range(obj.t_start, obj.t_end + 1):
        k = pack.frame_index(pathway, t)
        if k is not None:
            out.append((t, k))
    return out


def build_ose(clip, pack, obj, pathway: str, skipped: list | None = None) -> ObjectStateSeq | None:
    dims = clip.dims
    grid = pack.pathway(pathway)
    pairs = _frames_for(obj, pack, pathway)
    if not pairs:
        msg = f"object {obj.object_id} has no {pathway} frame in [{obj.t_start}, {obj.t_end}]"
        log.warning(msg)
        if skipped is not None:
            skipped.append(SkippedObject(obj.object_id, pathway, msg))
        return None
    boxes = [project_bbox_to_grid(obj.bbox(t), dims.W, dims.H, dims.Wg, dims.Hg) for t, _ in pairs]
    pooled = np.stack([pool_in_box(grid[k], b) for (_, k), b in zip(pairs, boxes)])
    coords = np.array([normalized_coords(b, dims.Wg, dims.Hg) for b in boxes], dtype=np.float64)
    return ObjectStateSeq(obj.object_id, pathway, [k for _, k in pairs], boxes, pooled, coords)


def build_interaction_seq(clip, pack, objects: Sequence, pathway: str) -> ObjectStateSeq:
    """Union-box state sequence over the given objects (frames with none visible are skipped)."""
    dims = clip.dims
    grid = pack.pathway(pathway)
    n_path = grid.shape[0]
    frames, boxes = [], []
    for k in range(n_path):
        t = k if pathway == "fast" else k * pack.stride
        vis = [o for o in objects if o.visible(t)]
        if not vis:
            continue
        per = [project_bbox_to_grid(o.bbox(t), dims.W, dims.H, dims.Wg, dims.Hg) for o in vis]
        frames.append(k)
        boxes.append(union_box(per))
    if not frames:
        raise ValueError(f"{clip.clip_id}: no {pathway} frame has a visible object")
    pooled = np.stack([pool_in_box(grid[k], b) for k, b in zip(frames, boxes)])
    coords = np.array([normalized_coords(b, dims.Wg, dims.Hg) for b in boxes], dtype=np.float64)
    return ObjectStateSeq(-1, pathway, frames, boxes, pooled, coords)


# -- aggregators ----------------------------------------------------------------
class LSTMAggregator:
    """Single-layer LSTM over a state sequence; returns the final hidden state."""

    def __init__(self, params: ParamStore, prefix: str, size: int):
        self.size = size
        self.w = params.xavier(f"{prefix}.W", (4 * size, 2 * size))
        self.b = params.zeros(f"{prefix}.b", (4 * size,))

    def __call__(self, seq: Tensor) -> Tensor:
        n = self.size
        if seq.ndim != 2 or seq.shape[1] != n:
            raise ValueError(f"LSTM expects T x {n}, got {seq.shape}")
        if seq.shape[0] == 0:
            raise ValueError("empty state sequence")
        h = Tensor(np.zeros((1, n)))
        c = Tensor(np.zeros((1, n)))
        wt = transpose(self.w)
        for t in range(seq.shape[0]):
            x = slice_axis(seq, 0, t, t + 1)
            z = add(matmul(concat([x, h], axis=1), wt), self.b)
            i = sigmoid(slice_axis(z, 1, 0, n))
            f = sigmoid(slice_axis(z, 1, n, 2 * n))
            g = tanh(slice_axis(z, 1, 2 * n, 3 * n))
            o = sigmoid(slice_axis(z, 1, 3 * n, 4 * n))
            c = add(mul(f, c), mul(i, g))
            h = mul(o, tanh(c))
        return reshape(h, (n,))


def state_agg(seq: Tensor, mode: str = "mean", lstm: LSTMAggregator | None = None) -> Tensor:
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise ValueError(f"state_agg needs a non-empty T x D sequence, got {seq.shape}")
    if mode == "mean":
        return mean(seq, axis=0)
    if mode == "lstm":
        if lstm is None:
            raise ValueError("lstm mode needs an LSTMAggregator")
        return lstm(seq)
    raise ValueError(f"unknown aggregator {mode!r}")


@dataclass
class ClipStates:
    """Everything the encoder needs from one clip, minus learned parameters."""

    clip_id: str
    video_mean: np.ndarray                               # d1 + d2
    objects: list[dict[str, ObjectStateSeq]]             # confidence order, top O_max
    object_ids: list[int]
    interaction: dict[str, ObjectStateSeq] | None
    skipped: list[SkippedObject] = field(default_factory=list)


def clip_states(clip, pack, o_max: int = 8, with_interaction: bool = True) -> ClipStates:
    from ..model.encoder import video_mean_feature

    ranked = clip.ranked_objects()[:o_max]
    skipped: list[SkippedObject] = []
    objects, ids = [], []
    for obj in ranked:
        per = {pw: build_ose(clip, pack, obj, pw, skipped) for pw in PATHWAYS}
        if any(v is None for v in per.values()):
            continue
        objects.append(per)
        ids.append(obj.object_id)
    kept = [o for o in ranked if o.object_id in ids]
    inter = None
    if with_interaction and kept:
        inter = {pw: build_interaction_seq(clip, pack, kept, pw) for pw in PATHWAYS}
    return ClipStates(clip.clip_id, video_mean_feature(pack), objects, ids, inter, skipped)
