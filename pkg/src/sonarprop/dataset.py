"""Labeled frames, training-crop construction, splits, and the on-disk format.

A dataset on disk is `dataset.json` plus `images/*.pgm`. Crop labels follow
the piecewise IoU-to-objectness mapping; positives are all in-FOV windows
whose best IoU against ground truth clears a threshold, negatives are a
seeded without-replacement sample of near-background windows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError
from .geometry import BoundingBox, FanGeometry, WindowConfig, enumerate_windows, iou_matrix
from .pgm import read_pgm, write_pgm

FORMAT_VERSION = 1

PROVENANCE_POSITIVE = "positive"
PROVENANCE_NEGATIVE = "negative"
PROVENANCE_FLIP = "augmented-flip"


@dataclass
class LabeledFrame:
    """One sonar frame: intensity image, fan geometry, ground-truth boxes."""

    frame_id: str
    image: np.ndarray
    fan: Optional[FanGeometry]
    boxes: List[BoundingBox] = field(default_factory=list)

    def __post_init__(self):
        if self.image.ndim != 2:
            raise ValueError(f"frame {self.frame_id}: image must be 2-D")
        if self.image.dtype not in (np.uint8, np.uint16):
            raise ValueError(
                f"frame {self.frame_id}: image dtype must be uint8/uint16, got {self.image.dtype}"
            )
        h, w = self.image.shape
        for b in self.boxes:
            if b.x < 0 or b.y < 0 or b.x2 > w or b.y2 > h:
                raise ValueError(
                    f"frame {self.frame_id}: box ({b.x},{b.y},{b.w},{b.h}) "
                    f"exceeds image bounds {w}x{h}"
                )

    @property
    def maxval(self) -> int:
        return 255 if self.image.dtype == np.uint8 else 65535

    def normalized(self) -> np.ndarray:
        """Image scaled to [0, 1] float32 by the pixel format's max value."""
        return self.image.astype(np.float32) / np.float32(self.maxval)


@dataclass
class TrainingCrop:
    """A window crop ready for training: normalized pixels plus label."""

    frame_id: str
    window: BoundingBox
    pixels: np.ndarray
    label: float
    provenance: str

    def __post_init__(self):
        if not (0.0 <= self.label <= 1.0):
            raise ValueError(f"label must be in [0, 1], got {self.label}")
        if self.pixels.ndim != 2 or self.pixels.shape[0] != self.pixels.shape[1]:
            raise ValueError(f"crop pixels must be square, got {self.pixels.shape}")


def objectness_label(iou_score):
    """Piecewise objectness target: 0 below 0.2, identity between, 1 from 0.8.

    Accepts a scalar or array; monotone non-decreasing.
    """
    arr = np.asarray(iou_score, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"iou must be in [0, 1], got {iou_score}")
    out = np.where(arr >= 0.8, 1.0, np.where(arr <= 0.2, 0.0, arr))
    if np.isscalar(iou_score) or arr.ndim == 0:
        return float(out)
    return out


def _window_max_iou(frame: LabeledFrame, windows: Sequence[BoundingBox]) -> np.ndarray:
    """Best IoU of each window against any ground-truth box (0 if no boxes)."""
    if not frame.boxes or not windows:
        return np.zeros(len(windows), dtype=np.float64)
    return iou_matrix(windows, frame.boxes).max(axis=1)


def _crop(frame: LabeledFrame, box: BoundingBox) -> np.ndarray:
    patch = frame.image[box.y : box.y2, box.x : box.x2]
    return patch.astype(np.float32) / np.float32(frame.maxval)


def extract_positive_crops(
    frame: LabeledFrame,
    cfg: WindowConfig,
    min_iou: float = 0.5,
    include_intermediate: bool = False,
) -> List[TrainingCrop]:
    """Crops for every in-FOV window whose best ground-truth IoU >= min_iou.

    With include_intermediate, windows in the (0.2, min_iou) band are kept
    too, carrying their raw-IoU labels. Output order follows window
    enumeration order.
    """
    windows = enumerate_windows(frame.fan, frame.image.shape[1], frame.image.shape[0], cfg)
    best = _window_max_iou(frame, windows)
    crops = []
    for win, b in zip(windows, best):
        if b >= min_iou or (include_intermediate and b > 0.2):
            crops.append(
                TrainingCrop(
                    frame_id=frame.frame_id,
                    window=win,
                    pixels=_crop(frame, win),
                    label=objectness_label(float(b)),
                    provenance=PROVENANCE_POSITIVE,
                )
            )
    return crops


def sample_negative_crops(
    frame: LabeledFrame,
    cfg: WindowConfig,
    rng: np.random.Generator,
    count: int = 20,
    max_iou: float = 0.1,
) -> List[TrainingCrop]:
    """Up to `count` background windows (best IoU <= max_iou), labeled 0.

    Sampling is without replacement from the seeded generator; fewer crops
    come back when the candidate pool is smaller than `count`.
    """
    windows = enumerate_windows(frame.fan, frame.image.shape[1], frame.image.shape[0], cfg)
    best = _window_max_iou(frame, windows)
    pool = [w for w, b in zip(windows, best) if b <= max_iou]
    if not pool:
        return []
    k = min(count, len(pool))
    picks = rng.choice(len(pool), size=k, replace=False)
    return [
        TrainingCrop(
            frame_id=frame.frame_id,
            window=pool[int(i)],
            pixels=_crop(frame, pool[int(i)]),
            label=0.0,
            provenance=PROVENANCE_NEGATIVE,
        )
        for i in picks
    ]


def augment_flips(crops: Sequence[TrainingCrop], include_both: bool = False) -> List[TrainingCrop]:
    """Expand each crop to original + up-down flip + left-right flip.

    include_both adds the combined flip for a 4x expansion. Labels carry over.
    """
    out = []
    for c in crops:
        out.append(c)
        variants = [np.flipud(c.pixels), np.fliplr(c.pixels)]
        if include_both:
            variants.append(np.flipud(np.fliplr(c.pixels)))
        for px in variants:
            out.append(
                TrainingCrop(
                    frame_id=c.frame_id,
                    window=c.window,
                    pixels=np.ascontiguousarray(px),
                    label=c.label,
                    provenance=PROVENANCE_FLIP,
                )
            )
    return out


def split_frames(
    frames: Sequence[LabeledFrame], seed: int
) -> Tuple[List[LabeledFrame], List[LabeledFrame], List[LabeledFrame]]:
    """Frame-level split: 70/30 into (train+val)/test, then 85/15 train/val.

    Counts floor the named fraction at each stage (100 frames -> 59/11/30);
    the shuffle is a seeded permutation, so partitions are deterministic,
    disjoint, and exhaustive.
    """
    n = len(frames)
    if n < 3:
        raise ValueError(f"need at least 3 frames to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_trainval = int(np.floor(0.7 * n))
    n_train = int(np.floor(0.85 * n_trainval))
    train = [frames[i] for i in order[:n_train]]
    val = [frames[i] for i in order[n_train:n_trainval]]
    test = [frames[i] for i in order[n_trainval:]]
    return train, val, test


def crops_to_arrays(crops: Sequence[TrainingCrop]) -> Tuple[np.ndarray, np.ndarray]:
    """Stack crops into network inputs (N,1,S,S) float32 and labels (N,)."""
    if not crops:
        raise ValueError("no crops to stack")
    x = np.stack([c.pixels for c in crops])[:, None, :, :].astype(np.float32)
    y = np.array([c.label for c in crops], dtype=np.float32)
    return x, y


def save_dataset(frames: Sequence[LabeledFrame], path) -> None:
    """Write dataset.json plus images/*.pgm under `path`."""
    root = Path(path)
    (root / "images").mkdir(parents=True, exist_ok=True)
    entries = []
    for f in frames:
        rel = f"images/{f.frame_id}.pgm"
        write_pgm(root / rel, f.image)
        entries.append(
            {
                "id": f.frame_id,
                "image": rel,
                "fan": f.fan.to_dict() if f.fan is not None else None,
                "boxes": [{"x": b.x, "y": b.y, "w": b.w, "h": b.h} for b in f.boxes],
            }
        )
    doc = {"format_version": FORMAT_VERSION, "frames": entries}
    (root / "dataset.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_dataset(path) -> List[LabeledFrame]:
    """Load and validate a dataset directory; errors name the failing frame."""
    root = Path(path)
    index = root / "dataset.json"
    if not index.is_file():
        raise DataError(f"missing dataset index {index}")
    try:
        doc = json.loads(index.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{index}: invalid JSON: {e}") from e
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"{index}: unsupported format_version {doc.get('format_version')!r}, "
            f"expected {FORMAT_VERSION}"
        )
    frames = []
    for entry in doc.get("frames", []):
        fid = entry.get("id", "<missing id>")
        img_rel = entry.get("image")
        if not img_rel:
            raise DataError(f"frame {fid}: missing image path")
        img_path = root / img_rel
        if not img_path.is_file():
            raise DataError(f"frame {fid}: image file not found: {img_path}")
        image = read_pgm(img_path)
        fan = None
        if entry.get("fan") is not None:
            try:
                fan = FanGeometry.from_dict(entry["fan"])
            except (ValueError, TypeError) as e:
                raise DataError(f"frame {fid}: malformed fan geometry: {e}") from e
        boxes = []
        for b in entry.get("boxes", []):
            try:
                boxes.append(BoundingBox(int(b["x"]), int(b["y"]), int(b["w"]), int(b["h"])))
            except (KeyError, TypeError, ValueError) as e:
                raise DataError(f"frame {fid}: malformed box {b!r}: {e}") from e
        try:
            frames.append(LabeledFrame(frame_id=str(fid), image=image, fan=fan, boxes=boxes))
        except ValueError as e:
            raise DataError(str(e)) from e
    return frames
