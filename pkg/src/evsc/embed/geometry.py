"""Bounding boxes and their projection onto the backbone grid."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box ``[x0, x1) x [y0, y1)``; ``space`` is "raw" or "grid"."""

    x0: float
    y0: float
    x1: float
    y1: float
    space: str = "raw"

    def validate(self) -> "BBox":
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {self}")
        return self

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, other: "BBox") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and self.x1 >= other.x1 and self.y1 >= other.y1)

    def overlaps(self, other: "BBox") -> bool:
        return (min(self.x1, other.x1) > max(self.x0, other.x0)
                and min(self.y1, other.y1) > max(self.y0, other.y0))


def _cover(lo: float, hi: float, scale: float, n: int) -> tuple[int, int]:
    a = math.floor(lo * scale + 1e-9)
    b = math.ceil(hi * scale - 1e-9)
    a = min(max(a, 0), n)
    b = min(max(b, 0), n)
    if b <= a:  # widen to one cell, staying on the grid
        if a >= n:
            a, b = n - 1, n
        else:
            b = a + 1
    return a, b


def project_bbox_to_grid(box: BBox, raw_w: float, raw_h: float, grid_w: int, grid_h: int) -> BBox:
    """Map a raw-pixel box to the integer cell cover floor(lo*G/R) .. ceil(hi*G/R)."""
    if not (0 <= box.x0 < box.x1 <= raw_w and 0 <= box.y0 < box.y1 <= raw_h):
        raise ValueError(f"box {box.as_tuple()} lies outside the {raw_w}x{raw_h} frame")
    gx0, gx1 = _cover(box.x0, box.x1, grid_w / raw_w, grid_w)
    gy0, gy1 = _cover(box.y0, box.y1, grid_h / raw_h, grid_h)
    return BBox(gx0, gy0, gx1, gy1, space="grid")


def union_box(boxes: Iterable[BBox]) -> BBox:
    boxes = list(boxes)
    if not boxes:
        raise ValueError("union_box needs at least one box")
    return BBox(min(b.x0 for b in boxes), min(b.y0 for b in boxes),
                max(b.x1 for b in boxes), max(b.y1 for b in boxes), space=boxes[0].space)


def normalized_coords(box: BBox, grid_w: int, grid_h: int) -> Sequence[float]:
    return (box.x0 / grid_w, box.y0 / grid_h, box.x1 / grid_w, box.y1 / grid_h)
