"""Scored sliding windows, thresholded proposals, and objectness heatmaps.

A frame is scored by running the trained scorer over every in-FOV sliding
window; proposals are the windows whose score strictly exceeds a threshold,
optionally pruned by non-maximum suppression. Heatmaps paint one stride-sized
block per window center, white for score 0 through black for score 1, so
unscored regions (outside the field of view) stay white.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dataset import LabeledFrame
from .errors import DataError
from .geometry import BoundingBox, ScoredWindow, WindowConfig, enumerate_windows, nms

PROPOSAL_CSV_HEADER = "frame,x,y,w,h,score"


@dataclass(frozen=True)
class ProposalConfig:
    """Thresholding and suppression settings applied to scored windows."""

    threshold: float = 0.5
    use_nms: bool = False
    nms_iou: float = 0.5
    window: WindowConfig = field(default_factory=WindowConfig)

    def __post_init__(self):
        if not (0.0 <= self.threshold <= 1.0):
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if not (0.0 < self.nms_iou <= 1.0):
            raise ValueError(f"nms_iou must be in (0, 1], got {self.nms_iou}")


def frame_windows(frame: LabeledFrame, cfg: WindowConfig) -> List[BoundingBox]:
    """The frame's in-FOV sliding windows, row-major."""
    h, w = frame.image.shape
    return enumerate_windows(frame.fan, w, h, cfg)


def score_frame(net, frame: LabeledFrame, cfg: WindowConfig) -> List[ScoredWindow]:
    """Score every in-FOV window of the frame, in enumeration order.

    Crops are taken from the intensity-normalized image, so uint8 and uint16
    frames feed the scorer the same [0, 1] range it was trained on.
    """
    h, w = frame.image.shape
    if min(h, w) < cfg.window_size:
        raise DataError(
            f"frame {frame.frame_id}: image {w}x{h} is smaller than "
            f"the {cfg.window_size}-pixel scoring window"
        )
    windows = frame_windows(frame, cfg)
    if not windows:
        return []
    pixels = frame.normalized()
    crops = np.stack(
        [pixels[b.y : b.y + b.h, b.x : b.x + b.w] for b in windows]
    )
    scores = net.predict(crops)
    return [ScoredWindow(b, float(s)) for b, s in zip(windows, scores)]


def threshold_proposals(
    scored: Sequence[ScoredWindow], cfg: ProposalConfig
) -> List[ScoredWindow]:
    """Windows scoring strictly above the threshold, best first.

    With suppression enabled, greedy NMS keeps only windows whose pairwise
    IoU stays below cfg.nms_iou. A threshold of 1.0 always yields an empty
    list since no score exceeds it.
    """
    keep = [sw for sw in scored if sw.score > cfg.threshold]
    if cfg.use_nms:
        return nms(keep, cfg.nms_iou)
    return sorted(keep, key=lambda sw: -sw.score)


def render_heatmap(
    scored: Sequence[ScoredWindow],
    cfg: WindowConfig,
    dims: Tuple[int, int],
    max_value: int = 255,
) -> np.ndarray:
    """Blocky objectness map: white is score 0, black is score 1.

    Each window paints a stride-sized square on its center with value
    round(max_value * (1 - score)); later windows overwrite earlier ones,
    and pixels no window center reaches keep the white background.
    """
    h, w = dims
    if h <= 0 or w <= 0:
        raise ValueError(f"bad heatmap dims {dims}")
    dtype = np.uint8 if max_value <= 255 else np.uint16
    canvas = np.full((h, w), max_value, dtype=dtype)
    s = cfg.stride
    half = s // 2
    for sw in scored:
        cx = sw.window.x + sw.window.w // 2
        cy = sw.window.y + sw.window.h // 2
        x0 = max(cx - half, 0)
        y0 = max(cy - half, 0)
        x1 = min(x0 + s, w)
        y1 = min(y0 + s, h)
        canvas[y0:y1, x0:x1] = int(round(max_value * (1.0 - sw.score)))
    return canvas


def draw_proposals(
    image: np.ndarray,
    proposals: Sequence[ScoredWindow],
    value: Optional[int] = None,
) -> np.ndarray:
    """Copy of the image with 1-pixel proposal outlines burned in."""
    if image.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {image.shape}")
    out = image.copy()
    if value is None:
        value = int(np.iinfo(out.dtype).max)
    h, w = out.shape
    for sw in proposals:
        b = sw.window
        x0, y0 = max(b.x, 0), max(b.y, 0)
        x1, y1 = min(b.x2, w), min(b.y2, h)
        if x0 >= x1 or y0 >= y1:
            continue
        out[y0, x0:x1] = value
        out[y1 - 1, x0:x1] = value
        out[y0:y1, x0] = value
        out[y0:y1, x1 - 1] = value
    return out


def write_proposals_csv(rows: Sequence[Tuple[str, ScoredWindow]], path) -> None:
    """Write (frame_id, proposal) pairs as frame,x,y,w,h,score lines."""
    lines = [PROPOSAL_CSV_HEADER]
    for frame_id, sw in rows:
        b = sw.window
        lines.append(f"{frame_id},{b.x},{b.y},{b.w},{b.h},{sw.score:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_proposals_csv(path) -> List[Tuple[str, ScoredWindow]]:
    """Parse a proposals CSV back into (frame_id, ScoredWindow) pairs."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read proposals CSV {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0] != PROPOSAL_CSV_HEADER:
        raise DataError(f"{path}: missing proposals CSV header")
    out = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise DataError(f"{path} line {i}: expected 6 fields, got {len(parts)}")
        try:
            frame_id = parts[0]
            x, y, w, h = (int(p) for p in parts[1:5])
            score = float(parts[5])
        except ValueError as exc:
            raise DataError(f"{path} line {i}: {exc}") from exc
        out.append((frame_id, ScoredWindow(BoundingBox(x, y, w, h), score)))
    return out
