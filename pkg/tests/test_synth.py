import numpy as np
import pytest

from sonarprop.dataset import load_dataset
from sonarprop.errors import DataError
from sonarprop.geometry import (
    FanGeometry,
    WindowConfig,
    enumerate_windows,
    fan_contains,
    iou,
)
from sonarprop.synth import (
    SceneConfig,
    generate_dataset,
    generate_frame,
    plan_frame,
    render_frame,
)


def polar_grids(cfg):
    xs = np.arange(cfg.width) + 0.5
    ys = np.arange(cfg.height) + 0.5
    px, py = np.meshgrid(xs, ys)
    dx, dy = px - cfg.fan.origin_x, py - cfg.fan.origin_y
    radius = np.hypot(dx, dy)
    rel = np.mod(np.arctan2(dy, dx) - cfg.fan.axis_angle + np.pi, 2 * np.pi) - np.pi
    return px, py, radius, rel


def test_frame_is_deterministic():
    cfg = SceneConfig(count_min=1, count_max=2, seed=5)
    a = generate_frame(cfg, "7")
    b = generate_frame(cfg, "7")
    assert np.array_equal(a.image, b.image)
    assert a.boxes == b.boxes
    c = generate_frame(cfg, "8")
    assert not np.array_equal(a.image, c.image)


def test_fan_masking_exact():
    cfg = SceneConfig(count_min=1, count_max=1, seed=1)
    frame = generate_frame(cfg, "0")
    ys, xs = np.nonzero(frame.image)
    inside = fan_contains(cfg.fan, xs + 0.5, ys + 0.5)
    assert inside.all(), "every nonzero pixel must lie inside the fan"


def test_zero_pixels_outside_fan():
    cfg = SceneConfig(count_min=0, count_max=0, seed=2)
    frame = generate_frame(cfg, "0")
    _, _, radius, rel = polar_grids(cfg)
    outside = ~(
        (radius >= cfg.fan.r_min)
        & (radius <= cfg.fan.r_max)
        & (np.abs(rel) <= cfg.fan.half_angle)
    )
    assert (frame.image[outside] == 0).all()


def test_empty_count_range_gives_speckle_only():
    cfg = SceneConfig(count_min=0, count_max=0, seed=3)
    frame = generate_frame(cfg, "4")
    assert frame.boxes == []
    assert (frame.image > 0).any(), "fan interior should carry speckle"


def _roomy_cfg(**kw):
    fan = FanGeometry(
        origin_x=180.0, origin_y=400.0, r_min=50.0, r_max=405.0,
        half_angle=0.82, axis_angle=-np.pi / 2,
    )
    base = dict(width=360, height=360, fan=fan, count_min=1, count_max=2,
                size_min=70, size_max=90, seed=11)
    base.update(kw)
    return SceneConfig(**base)


def test_intensity_ordering_per_object():
    # highlight mean > background mean > shadow mean, for every object
    cfg = _roomy_cfg()
    checked = 0
    for i in range(12):
        plan = plan_frame(cfg, str(i))
        frame = render_frame(cfg, plan)
        img = frame.image.astype(np.float64)
        _, _, radius, rel = polar_grids(cfg)
        fan_mask = (
            (radius >= cfg.fan.r_min)
            & (radius <= cfg.fan.r_max)
            & (np.abs(rel) <= cfg.fan.half_angle)
        )
        occupied = np.zeros_like(fan_mask)
        for obj in plan.objects:
            b = obj.box
            occupied[b.y : b.y2, b.x : b.x2] = True
            occupied |= (
                (rel >= obj.shadow_theta_lo)
                & (rel <= obj.shadow_theta_hi)
                & (radius > obj.shadow_r_lo)
                & (radius <= obj.shadow_r_hi)
            )
        bg_mean = img[fan_mask & ~occupied].mean()
        for obj in plan.objects:
            b = obj.box
            box_mean = img[b.y : b.y2, b.x : b.x2].mean()
            shadow_mask = (
                (rel >= obj.shadow_theta_lo)
                & (rel <= obj.shadow_theta_hi)
                & (radius > obj.shadow_r_lo)
                & (radius <= obj.shadow_r_hi)
                & fan_mask
            )
            assert shadow_mask.any()
            shadow_mean = img[shadow_mask].mean()
            assert box_mean > bg_mean > shadow_mean
            checked += 1
    assert checked >= 6


def test_every_object_has_learnable_window():
    # the placement clearance rule must leave a high-IoU in-FOV window
    cfg = SceneConfig(count_min=1, count_max=1, seed=21)
    wins = enumerate_windows(cfg.fan, cfg.width, cfg.height, WindowConfig())
    for i in range(25):
        frame = generate_frame(cfg, str(i))
        for box in frame.boxes:
            best = max(iou(w, box) for w in wins)
            assert best >= 0.5, f"frame {i}: best window IoU {best:.3f}"


def test_objects_do_not_overlap():
    cfg = SceneConfig.large()
    cfg.seed = 9
    for i in range(10):
        frame = generate_frame(cfg, str(i))
        for j, a in enumerate(frame.boxes):
            for b in frame.boxes[j + 1 :]:
                assert iou(a, b) == 0.0


def test_object_count_stays_in_range():
    cfg = _roomy_cfg(count_min=1, count_max=2, seed=13)
    counts = [len(generate_frame(cfg, str(i)).boxes) for i in range(30)]
    assert all(1 <= c <= 2 for c in counts)
    assert len(set(counts)) > 1, "count range should actually vary"


def test_count_weights_bias_sampling():
    cfg = SceneConfig(count_min=0, count_max=1, count_weights=(1.0, 0.0), seed=17)
    assert all(len(plan_frame(cfg, str(i)).objects) == 0 for i in range(10))


def test_infeasible_placement_reports_advice():
    # fan budget admits the size but leaves no valid in-image spot
    fan = FanGeometry(
        origin_x=64.0, origin_y=400.0, r_min=250.0, r_max=400.0,
        half_angle=0.12, axis_angle=-np.pi / 2,
    )
    cfg = SceneConfig(
        width=128, height=128, fan=fan, count_min=2, count_max=2,
        size_min=90, size_max=96, seed=1,
    )
    with pytest.raises(DataError, match="fewer or smaller"):
        plan_frame(cfg, "0")


def test_config_json_roundtrip():
    cfg = SceneConfig.large()
    back = SceneConfig.from_json(cfg.to_json())
    assert back == cfg


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        SceneConfig(size_min=0)
    with pytest.raises(ValueError):
        SceneConfig(count_min=2, count_max=1)
    with pytest.raises(ValueError):
        SceneConfig(shadow_factor=1.0)
    with pytest.raises(ValueError):
        SceneConfig(count_weights=(0.5,))
    with pytest.raises(DataError):
        SceneConfig.from_json("{broken")


def test_generate_dataset_roundtrip(tmp_path):
    cfg = SceneConfig(count_min=0, count_max=2, seed=4)
    frames = generate_dataset(cfg, 10, tmp_path)
    assert [f.frame_id for f in frames] == [str(i) for i in range(10)]
    back = load_dataset(tmp_path)
    assert len(back) == 10
    for orig, got in zip(frames, back):
        assert np.array_equal(orig.image, got.image)
        assert orig.boxes == got.boxes
    assert (tmp_path / "scene_config.json").is_file()


def test_generate_dataset_rejects_zero_frames(tmp_path):
    with pytest.raises(ValueError):
        generate_dataset(SceneConfig(), 0, tmp_path)
