"""Recall and proposal-count curves over a threshold sweep.

The operating curve of a proposal scorer is traced by sweeping the objectness
threshold: recall of ground-truth boxes on one axis, mean proposals per frame
on the other. Frames are scored once and the cached scores are re-thresholded
for every grid point, so a sweep costs one network pass regardless of grid
size. A random-scoring baseline over the same windows calibrates how much of
the recall is earned by the scorer rather than by window density.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .dataset import LabeledFrame
from .errors import DataError
from .geometry import BoundingBox, ScoredWindow, WindowConfig, iou_matrix
from .proposals import ProposalConfig, frame_windows, score_frame, threshold_proposals
from .rngutil import derive_rng

CURVE_CSV_HEADER = "threshold recall numberOfProposals proposalStd"


@dataclass(frozen=True)
class CurveRecord:
    """One operating point: threshold, recall, and proposal-count stats."""

    threshold: float
    recall: float
    mean_proposals: float
    proposal_std: float

    def __post_init__(self):
        if not (0.0 <= self.threshold <= 1.0):
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if not (0.0 <= self.recall <= 1.0):
            raise ValueError(f"recall must be in [0, 1], got {self.recall}")
        if self.mean_proposals < 0 or self.proposal_std < 0:
            raise ValueError("proposal statistics must be non-negative")


def recall_at(
    proposals_by_frame: Sequence[Sequence[ScoredWindow]],
    boxes_by_frame: Sequence[Sequence[BoundingBox]],
    min_iou: float = 0.5,
) -> float:
    """Fraction of ground-truth boxes covered by at least one proposal.

    A box counts as recalled when any proposal overlaps it with IoU >=
    min_iou; one proposal may recall several boxes. Frames without ground
    truth contribute nothing to either side of the fraction.
    """
    if len(proposals_by_frame) != len(boxes_by_frame):
        raise ValueError(
            f"frame count mismatch: {len(proposals_by_frame)} proposal lists "
            f"vs {len(boxes_by_frame)} box lists"
        )
    if not (0.0 < min_iou <= 1.0):
        raise ValueError(f"min_iou must be in (0, 1], got {min_iou}")
    total = 0
    hit = 0
    for proposals, boxes in zip(proposals_by_frame, boxes_by_frame):
        if not boxes:
            continue
        total += len(boxes)
        if not proposals:
            continue
        overlaps = iou_matrix([sw.window for sw in proposals], boxes)
        hit += int(np.count_nonzero(overlaps.max(axis=0) >= min_iou))
    if total == 0:
        raise DataError("no ground-truth boxes in the evaluation set")
    return hit / total


def validate_thresholds(thresholds: Sequence[float]) -> List[float]:
    """Checked copy of a threshold grid: nonempty, in [0, 1], ascending."""
    grid = [float(t) for t in thresholds]
    if not grid:
        raise ValueError("threshold grid is empty")
    for t in grid:
        if not (0.0 <= t <= 1.0):
            raise ValueError(f"thresholds must be in [0, 1], got {t}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError(f"thresholds must be strictly ascending, got {grid}")
    return grid


def default_threshold_grid(step: float = 0.05) -> List[float]:
    """The standard sweep grid 0, step, ..., 1 inclusive."""
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9 or n < 1:
        raise ValueError(f"step {step} does not divide [0, 1] evenly")
    return [round(i * step, 10) for i in range(n + 1)]


def sweep_scored(
    scored_by_frame: Sequence[Sequence[ScoredWindow]],
    boxes_by_frame: Sequence[Sequence[BoundingBox]],
    thresholds: Sequence[float],
    use_nms: bool = False,
    nms_iou: float = 0.5,
    min_iou: float = 0.5,
) -> List[CurveRecord]:
    """Curve over already-scored frames; scoring cost is paid only once.

    Proposal counts use the population standard deviation across frames.
    """
    grid = validate_thresholds(thresholds)
    if not scored_by_frame:
        raise DataError("evaluation set is empty")
    records = []
    for t in grid:
        cfg = ProposalConfig(threshold=t, use_nms=use_nms, nms_iou=nms_iou)
        per_frame = [threshold_proposals(scored, cfg) for scored in scored_by_frame]
        counts = np.array([len(p) for p in per_frame], dtype=np.float64)
        records.append(
            CurveRecord(
                threshold=t,
                recall=recall_at(per_frame, boxes_by_frame, min_iou),
                mean_proposals=float(counts.mean()),
                proposal_std=float(counts.std()),
            )
        )
    return records


def threshold_sweep(
    net,
    frames: Sequence[LabeledFrame],
    thresholds: Sequence[float],
    window: Optional[WindowConfig] = None,
    use_nms: bool = False,
    nms_iou: float = 0.5,
    min_iou: float = 0.5,
) -> List[CurveRecord]:
    """Score the frames once, then trace the full threshold curve."""
    window = window or WindowConfig()
    scored = [score_frame(net, f, window) for f in frames]
    boxes = [f.boxes for f in frames]
    return sweep_scored(scored, boxes, thresholds, use_nms, nms_iou, min_iou)


def random_baseline_scores(
    frame: LabeledFrame, window: WindowConfig, seed: int
) -> List[ScoredWindow]:
    """The frame's windows with i.i.d. uniform [0, 1) scores.

    The stream is keyed on (seed, frame id), so the baseline is reproducible
    and independent of frame ordering.
    """
    windows = frame_windows(frame, window)
    rng = derive_rng(seed, frame.frame_id, "baseline")
    scores = rng.uniform(0.0, 1.0, size=len(windows))
    return [ScoredWindow(b, float(s)) for b, s in zip(windows, scores)]


def random_baseline_sweep(
    frames: Sequence[LabeledFrame],
    thresholds: Sequence[float],
    window: Optional[WindowConfig] = None,
    seed: int = 0,
    min_iou: float = 0.5,
) -> List[CurveRecord]:
    """Threshold curve for uniform-random window scores, without suppression.

    At threshold t each window survives independently with probability 1 - t,
    so the expected proposal count is (1 - t) times the in-FOV window count;
    that closed form is what makes this baseline useful as a calibration.
    """
    window = window or WindowConfig()
    scored = [random_baseline_scores(f, window, seed) for f in frames]
    boxes = [f.boxes for f in frames]
    return sweep_scored(scored, boxes, thresholds, use_nms=False, min_iou=min_iou)


def recall_at_matched_count(
    curve: Sequence[CurveRecord], mean_count: float
) -> float:
    """Recall linearly interpolated at a given mean proposal count.

    Lets two curves be compared at equal proposal budgets even when their
    thresholds do not line up. Counts outside the curve's range clamp to the
    nearest endpoint.
    """
    if not curve:
        raise ValueError("cannot interpolate an empty curve")
    pts = sorted(curve, key=lambda r: r.mean_proposals)
    xs = np.array([r.mean_proposals for r in pts], dtype=np.float64)
    ys = np.array([r.recall for r in pts], dtype=np.float64)
    return float(np.interp(mean_count, xs, ys))


def write_curve_csv(records: Sequence[CurveRecord], path) -> None:
    """Space-separated curve table with a fixed header and 6-decimal fields."""
    lines = [CURVE_CSV_HEADER]
    for r in records:
        lines.append(
            f"{r.threshold:.6f} {r.recall:.6f} "
            f"{r.mean_proposals:.6f} {r.proposal_std:.6f}"
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_curve_csv(path) -> List[CurveRecord]:
    """Parse a curve table written by write_curve_csv."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"cannot read curve CSV {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines or lines[0] != CURVE_CSV_HEADER:
        raise DataError(f"{path}: missing curve CSV header")
    records = []
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        if len(parts) != 4:
            raise DataError(f"{path} line {i}: expected 4 fields, got {len(parts)}")
        try:
            t, recall, mean_p, std_p = (float(p) for p in parts)
        except ValueError as exc:
            raise DataError(f"{path} line {i}: {exc}") from exc
        records.append(CurveRecord(t, recall, mean_p, std_p))
    return records
