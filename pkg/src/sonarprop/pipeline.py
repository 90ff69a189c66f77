"""End-to-end training orchestration: frames in, fitted scorer out.

Splits labeled frames, builds the crop sets (positives from overlap labels,
a seeded per-frame sample of negatives, flip augmentation on the training
side only), and fits the window scorer with early stopping. Validation crops
are never augmented; they measure generalization, not capacity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dataset import (
    LabeledFrame,
    TrainingCrop,
    augment_flips,
    crops_to_arrays,
    extract_positive_crops,
    sample_negative_crops,
    split_frames,
)
from .errors import DataError
from .geometry import WindowConfig
from .nn import EpochStats, ObjectnessNet, TrainConfig, init_params, train
from .rngutil import derive_rng


@dataclass(frozen=True)
class CropPlan:
    """How frames become labeled crops."""

    window: WindowConfig = field(default_factory=WindowConfig)
    min_iou: float = 0.5
    include_intermediate: bool = False
    negatives_per_frame: int = 20
    max_negative_iou: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.min_iou <= 1.0):
            raise ValueError(f"min_iou must be in (0, 1], got {self.min_iou}")
        if not (0.0 <= self.max_negative_iou < self.min_iou):
            raise ValueError(
                f"need 0 <= max_negative_iou < min_iou, got {self.max_negative_iou}"
            )
        if self.negatives_per_frame < 0:
            raise ValueError("negatives_per_frame must be >= 0")


def build_crops(
    frames: Sequence[LabeledFrame],
    plan: CropPlan,
    seed: int,
    augment: bool = True,
) -> List[TrainingCrop]:
    """Positive and negative crops for each frame, optionally flip-augmented.

    Negative sampling draws from a stream keyed on (seed, frame id), so the
    crop set does not depend on frame order or on how work is parallelized.
    """
    crops: List[TrainingCrop] = []
    for frame in frames:
        crops.extend(
            extract_positive_crops(
                frame, plan.window, plan.min_iou, plan.include_intermediate
            )
        )
        rng = derive_rng(seed, frame.frame_id, "negatives")
        crops.extend(
            sample_negative_crops(
                frame, plan.window, rng, plan.negatives_per_frame, plan.max_negative_iou
            )
        )
    if augment:
        crops = augment_flips(crops)
    return crops


@dataclass
class TrainedModel:
    """A fitted scorer plus everything needed to describe the run."""

    net: ObjectnessNet
    history: List[EpochStats]
    train_ids: List[str]
    val_ids: List[str]
    test_ids: List[str]
    n_train_crops: int
    n_val_crops: int

    @property
    def best_val_loss(self) -> float:
        return min(s.val_loss for s in self.history)


def train_pipeline(
    frames: Sequence[LabeledFrame],
    config: TrainConfig,
    plan: Optional[CropPlan] = None,
    test_frames: Optional[Sequence[LabeledFrame]] = None,
) -> TrainedModel:
    """Split, extract, augment, and fit; the returned net holds the best epoch.

    With test_frames given, `frames` is split 85/15 into train/val only and
    the provided frames become the held-out set; otherwise the full
    70/30-then-85/15 split applies. Frames whose crops are empty still count
    toward the split; training only fails if the whole train set ends up
    empty.
    """
    plan = plan or CropPlan()
    if test_frames is None:
        train_frames, val_frames, test = split_frames(frames, config.seed)
    else:
        n = len(frames)
        if n < 2:
            raise DataError(f"need at least 2 frames to split train/val, got {n}")
        order = np.random.default_rng(config.seed).permutation(n)
        n_train = int(np.floor(0.85 * n))
        train_frames = [frames[i] for i in order[:n_train]]
        val_frames = [frames[i] for i in order[n_train:]]
        test = list(test_frames)
    if not val_frames:
        raise DataError("validation split is empty; provide more frames")

    train_crops = build_crops(train_frames, plan, config.seed, augment=True)
    val_crops = build_crops(val_frames, plan, config.seed, augment=False)
    if not train_crops:
        raise DataError("no training crops were produced; check labels and FOV")
    if not val_crops:
        raise DataError("no validation crops were produced; check labels and FOV")

    net = init_params(config.seed)
    net, history = train(net, crops_to_arrays(train_crops), crops_to_arrays(val_crops), config)
    return TrainedModel(
        net=net,
        history=history,
        train_ids=[f.frame_id for f in train_frames],
        val_ids=[f.frame_id for f in val_frames],
        test_ids=[f.frame_id for f in test],
        n_train_crops=len(train_crops),
        n_val_crops=len(val_crops),
    )
