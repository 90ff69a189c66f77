"""Rectangle arithmetic, fan field-of-view tests, window enumeration, and NMS.

Boxes are axis-aligned half-open pixel regions [x, x+w) x [y, y+h), so the
analytic intersection/union areas agree exactly with counting member pixels.
All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle: top-left corner (x, y), width w, height h."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")

    @property
    def x2(self) -> int:
        """Exclusive right edge."""
        return self.x + self.w

    @property
    def y2(self) -> int:
        """Exclusive bottom edge."""
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def corners(self):
        """The four geometric corner points, as (x, y) pairs."""
        return (
            (self.x, self.y),
            (self.x2, self.y),
            (self.x, self.y2),
            (self.x2, self.y2),
        )


@dataclass(frozen=True)
class ScoredWindow:
    """A window plus its objectness score."""

    window: BoundingBox
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class FanGeometry:
    """Annular sector FOV: apex at (origin_x, origin_y), range band
    [r_min, r_max], bearing band axis_angle +- half_angle (radians).

    Angles follow image coordinates: bearing(p) = atan2(py - origin_y,
    px - origin_x), so an upward-pointing fan has axis_angle = -pi/2.
    """

    origin_x: float
    origin_y: float
    r_min: float
    r_max: float
    half_angle: float
    axis_angle: float

    def __post_init__(self):
        if not (0.0 <= self.r_min < self.r_max):
            raise ValueError(f"need 0 <= r_min < r_max, got [{self.r_min}, {self.r_max}]")
        if not (0.0 < self.half_angle <= math.pi / 2):
            raise ValueError(f"half_angle must be in (0, pi/2], got {self.half_angle}")

    def to_dict(self) -> dict:
        return {
            "origin_x": self.origin_x,
            "origin_y": self.origin_y,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "half_angle": self.half_angle,
            "axis_angle": self.axis_angle,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FanGeometry":
        fields = ("origin_x", "origin_y", "r_min", "r_max", "half_angle", "axis_angle")
        missing = [f for f in fields if f not in d]
        if missing:
            raise ValueError(f"fan geometry missing fields: {missing}")
        return cls(**{f: float(d[f]) for f in fields})


@dataclass(frozen=True)
class WindowConfig:
    """Square sliding window of side window_size, moved by stride pixels."""

    window_size: int = 96
    stride: int = 8

    def __post_init__(self):
        if self.window_size <= 0:
            raise ValueError(f"window_size must be positive, got {self.window_size}")
        if not (0 < self.stride <= self.window_size):
            raise ValueError(
                f"stride must be in (0, window_size], got {self.stride} vs {self.window_size}"
            )


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, in [0, 1]."""
    ix = max(a.x, b.x)
    iy = max(a.y, b.y)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    iw = max(0, ix2 - ix)
    ih = max(0, iy2 - iy)
    inter = iw * ih
    if inter == 0:
        return 0.0
    union = a.area + b.area - inter
    return inter / union


def boxes_to_array(boxes: Sequence[BoundingBox]) -> np.ndarray:
    """Stack boxes into an (N, 4) int array of (x, y, w, h) rows."""
    if not boxes:
        return np.zeros((0, 4), dtype=np.int64)
    return np.array([(b.x, b.y, b.w, b.h) for b in boxes], dtype=np.int64)


def iou_matrix(a: Sequence[BoundingBox], b: Sequence[BoundingBox]) -> np.ndarray:
    """Pairwise IoU, shape (len(a), len(b)), float64."""
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)), dtype=np.float64)
    ra = boxes_to_array(a)
    rb = boxes_to_array(b)
    ax, ay, aw, ah = (ra[:, i][:, None] for i in range(4))
    bx, by, bw, bh = (rb[:, i][None, :] for i in range(4))
    iw = np.minimum(ax + aw, bx + bw) - np.maximum(ax, bx)
    ih = np.minimum(ay + ah, by + bh) - np.maximum(ay, by)
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = aw * ah + bw * bh - inter
    return inter / union


def fan_contains(geom: FanGeometry, px, py):
    """True where point(s) satisfy both the range band and the bearing band.

    Accepts scalars or broadcastable arrays; returns bool or a bool array.
    """
    dx = np.asarray(px, dtype=np.float64) - geom.origin_x
    dy = np.asarray(py, dtype=np.float64) - geom.origin_y
    r = np.hypot(dx, dy)
    bearing = np.arctan2(dy, dx)
    diff = np.mod(bearing - geom.axis_angle + math.pi, 2 * math.pi) - math.pi
    inside = (r >= geom.r_min) & (r <= geom.r_max) & (np.abs(diff) <= geom.half_angle)
    if np.isscalar(px) and np.isscalar(py):
        return bool(inside)
    return inside


def window_in_fov(geom: FanGeometry, box: BoundingBox) -> bool:
    """True iff all four corner points of the box are inside the fan."""
    xs = np.array([c[0] for c in box.corners()], dtype=np.float64)
    ys = np.array([c[1] for c in box.corners()], dtype=np.float64)
    return bool(np.all(fan_contains(geom, xs, ys)))


def enumerate_windows(
    geom: Optional[FanGeometry],
    image_w: int,
    image_h: int,
    cfg: WindowConfig,
) -> List[BoundingBox]:
    """All stride-aligned windows inside the image, row-major order.

    With a fan geometry, windows whose four corners are not all inside the
    fan are dropped.
    """
    w = cfg.window_size
    if w > min(image_w, image_h):
        raise ValueError(
            f"window {w} exceeds image bounds {image_w}x{image_h}"
        )
    xs = np.arange(0, image_w - w + 1, cfg.stride, dtype=np.int64)
    ys = np.arange(0, image_h - w + 1, cfg.stride, dtype=np.int64)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    gx = gx.ravel()
    gy = gy.ravel()
    if geom is not None:
        ok = np.ones(gx.shape, dtype=bool)
        for cx, cy in ((gx, gy), (gx + w, gy), (gx, gy + w), (gx + w, gy + w)):
            ok &= fan_contains(geom, cx.astype(np.float64), cy.astype(np.float64))
        gx = gx[ok]
        gy = gy[ok]
    return [BoundingBox(int(x), int(y), w, w) for x, y in zip(gx, gy)]


def _nms_order(windows: Sequence[ScoredWindow]) -> np.ndarray:
    """Indices sorted by descending score, ties broken row-major (y, x, w, h)."""
    scores = np.array([s.score for s in windows], dtype=np.float64)
    boxes = boxes_to_array([s.window for s in windows])
    return np.lexsort((boxes[:, 3], boxes[:, 2], boxes[:, 0], boxes[:, 1], -scores))


def nms(proposals: Sequence[ScoredWindow], iou_threshold: float) -> List[ScoredWindow]:
    """Greedy non-maximum suppression.

    Visits proposals in descending score order (deterministic positional
    tie-break) and keeps each one iff its IoU with every already-kept
    proposal is strictly below iou_threshold. Output stays score-sorted.
    """
    if not (0.0 < iou_threshold <= 1.0):
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    if not proposals:
        return []
    order = _nms_order(proposals)
    boxes = boxes_to_array([s.window for s in proposals])[order]
    x1 = boxes[:, 0].astype(np.float64)
    y1 = boxes[:, 1].astype(np.float64)
    x2 = x1 + boxes[:, 2]
    y2 = y1 + boxes[:, 3]
    areas = boxes[:, 2] * boxes[:, 3]

    keep = []
    idx = np.arange(len(order))
    while idx.size > 0:
        i = idx[0]
        keep.append(i)
        rest = idx[1:]
        iw = np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest])
        ih = np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest])
        inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
        overlap = inter / (areas[i] + areas[rest] - inter)
        idx = rest[overlap < iou_threshold]
    return [proposals[order[i]] for i in keep]
