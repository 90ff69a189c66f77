"""Tests for the crop-assembly and training pipeline glue."""

import numpy as np
import pytest

from sonarprop.dataset import DataError, crops_to_arrays, extract_positive_crops, split_frames
from sonarprop.nn import TrainConfig
from sonarprop.pipeline import CropPlan, build_crops, train_pipeline
from sonarprop.synth import SceneConfig, generate_frame


def make_frames(n, seed=0, count_min=1, count_max=1):
    cfg = SceneConfig(count_min=count_min, count_max=count_max, seed=seed)
    return [generate_frame(cfg, i) for i in range(n)]


class TestCropPlan:
    def test_defaults(self):
        plan = CropPlan()
        assert plan.min_iou == 0.5
        assert plan.negatives_per_frame == 20
        assert plan.max_negative_iou == 0.1

    def test_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            CropPlan(min_iou=0.0)
        with pytest.raises(ValueError):
            CropPlan(min_iou=1.5)
        with pytest.raises(ValueError):
            CropPlan(max_negative_iou=0.5, min_iou=0.5)
        with pytest.raises(ValueError):
            CropPlan(negatives_per_frame=-1)


class TestBuildCrops:
    def test_deterministic_across_calls(self):
        frames = make_frames(3)
        a = build_crops(frames, CropPlan(), seed=7)
        b = build_crops(frames, CropPlan(), seed=7)
        assert len(a) == len(b)
        for ca, cb in zip(a, b):
            assert np.array_equal(ca.pixels, cb.pixels)
            assert ca.label == cb.label

    def test_seed_changes_negatives_only(self):
        frames = make_frames(3)
        a = build_crops(frames, CropPlan(), seed=7, augment=False)
        b = build_crops(frames, CropPlan(), seed=8, augment=False)
        pos_a = [c for c in a if c.label > 0]
        pos_b = [c for c in b if c.label > 0]
        assert len(pos_a) == len(pos_b)
        for ca, cb in zip(pos_a, pos_b):
            assert np.array_equal(ca.pixels, cb.pixels)
        neg_a = np.stack([c.pixels for c in a if c.label == 0])
        neg_b = np.stack([c.pixels for c in b if c.label == 0])
        assert neg_a.shape == neg_b.shape
        assert not np.array_equal(neg_a, neg_b)

    def test_augmentation_triples_count(self):
        frames = make_frames(2)
        plain = build_crops(frames, CropPlan(), seed=0, augment=False)
        flipped = build_crops(frames, CropPlan(), seed=0, augment=True)
        assert len(flipped) == 3 * len(plain)

    def test_counts_match_manual_assembly(self):
        frames = make_frames(2)
        plan = CropPlan()
        crops = build_crops(frames, plan, seed=0, augment=False)
        n_pos = sum(len(extract_positive_crops(f, plan.window, plan.min_iou)) for f in frames)
        assert len(crops) == n_pos + len(frames) * plan.negatives_per_frame


@pytest.fixture(scope="module")
def result():
    frames = make_frames(12, seed=4)
    config = TrainConfig(learning_rate=0.002, max_epochs=1, seed=3)
    return train_pipeline(frames, config), frames


class TestTrainPipeline:
    def test_split_is_disjoint_and_complete(self, result):
        model, frames = result
        ids = set(model.train_ids) | set(model.val_ids) | set(model.test_ids)
        assert ids == {f.frame_id for f in frames}
        assert len(model.train_ids) + len(model.val_ids) + len(model.test_ids) == len(frames)
        expected = split_frames(frames, 3)
        assert model.test_ids == [f.frame_id for f in expected[2]]

    def test_history_and_crops_recorded(self, result):
        model, _ = result
        assert len(model.history) == 1
        assert model.best_val_loss == model.history[0].val_loss
        assert model.n_train_crops > model.n_val_crops > 0

    def test_explicit_test_frames_excluded_from_training(self):
        frames = make_frames(10, seed=4)
        config = TrainConfig(learning_rate=0.002, max_epochs=1, seed=3)
        model = train_pipeline(frames[:8], config, test_frames=frames[8:])
        assert model.test_ids == [f.frame_id for f in frames[8:]]
        assert set(model.test_ids).isdisjoint(model.train_ids)
        assert set(model.test_ids).isdisjoint(model.val_ids)

    def test_too_few_frames_is_data_error(self):
        frames = make_frames(1)
        with pytest.raises((DataError, ValueError)):
            train_pipeline(frames, TrainConfig(max_epochs=1))
