"""Synthetic forward-looking-sonar scene generator.

Produces labeled frames with the three signatures the detector cares about:
a fan-shaped field of view (pixels outside are exactly zero), multiplicative
gamma speckle over a low-mean background, and bright elliptical object
highlights that cast attenuated shadow sectors radially away from the sonar
apex. This is a test fixture, not a physics simulator: shadow length is a
sampled parameter and speckle is a clipped gamma factor.

Placement comes in two classes. Interior objects keep enough clearance from
the fan edges that every stride-aligned default-size window around them lies
fully inside the field of view, so dozens of windows overlap each one well.
Edge objects sit against the FOV boundary where all but one or two of those
windows are clipped away; they make window density alone insufficient for
recall, which is what separates a learned scorer from random scoring.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dataset import LabeledFrame, save_dataset
from .errors import DataError
from .geometry import BoundingBox, FanGeometry, WindowConfig, enumerate_windows, iou_matrix
from .rngutil import derive_rng

# margin that makes the best default window around a box provably in-FOV:
# the window strays at most (96 - s)/2 + stride from the box on each side
_CLEARANCE_PAD = 24
_EDGE_MARGIN = 16


@dataclass
class SceneConfig:
    """Everything needed to generate frames reproducibly."""

    width: int = 224
    height: int = 224
    fan: FanGeometry = field(
        default_factory=lambda: FanGeometry(
            origin_x=112.0, origin_y=250.0, r_min=40.0, r_max=252.0,
            half_angle=0.93, axis_angle=-np.pi / 2,
        )
    )
    count_min: int = 0
    count_max: int = 1
    count_weights: Optional[Tuple[float, ...]] = None
    size_min: int = 84
    size_max: int = 96
    edge_fraction: float = 0.0
    edge_windows_min: int = 1
    edge_windows_max: int = 2
    highlight_lo: float = 0.75
    highlight_hi: float = 0.95
    background_mean: float = 0.15
    shadow_factor: float = 0.35
    shadow_len_min: int = 24
    shadow_len_max: int = 64
    speckle_shape: float = 4.0
    speckle_clip: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 96 or self.height < 96:
            raise ValueError("image dims must be at least the default window size")
        if not (0 <= self.count_min <= self.count_max):
            raise ValueError("invalid object count range")
        if self.count_weights is not None:
            self.count_weights = tuple(float(w) for w in self.count_weights)
            if len(self.count_weights) != self.count_max - self.count_min + 1:
                raise ValueError("count_weights length must match the count range")
            if any(w < 0 for w in self.count_weights) or sum(self.count_weights) <= 0:
                raise ValueError("count_weights must be nonnegative and sum > 0")
        if not (0 < self.size_min <= self.size_max):
            raise ValueError("invalid object size range")
        if not (0.0 <= self.edge_fraction <= 1.0):
            raise ValueError("edge_fraction must be in [0, 1]")
        if not (1 <= self.edge_windows_min <= self.edge_windows_max):
            raise ValueError("need 1 <= edge_windows_min <= edge_windows_max")
        if self.size_max > min(self.width, self.height) - 2 * _EDGE_MARGIN:
            raise ValueError("object size range does not fit the image")
        if self.size_max + _CLEARANCE_PAD > self.fan.r_max - self.fan.r_min:
            raise ValueError("object size range does not fit the fan")
        if not (0.0 < self.highlight_lo <= self.highlight_hi <= 1.0):
            raise ValueError("highlight range must be within (0, 1]")
        if not (0.0 < self.background_mean < self.highlight_lo):
            raise ValueError("background mean must sit below the highlight range")
        if not (0.0 <= self.shadow_factor < 1.0):
            raise ValueError("shadow factor must be in [0, 1)")
        if not (0 < self.shadow_len_min <= self.shadow_len_max):
            raise ValueError("invalid shadow length range")
        if self.speckle_shape <= 0 or self.speckle_clip <= 1.0:
            raise ValueError("speckle shape must be > 0 and clip > 1")

    def to_dict(self) -> dict:
        d = {
            "width": self.width, "height": self.height,
            "fan": self.fan.to_dict(),
            "count_min": self.count_min, "count_max": self.count_max,
            "count_weights": list(self.count_weights) if self.count_weights else None,
            "size_min": self.size_min, "size_max": self.size_max,
            "edge_fraction": self.edge_fraction,
            "edge_windows_min": self.edge_windows_min,
            "edge_windows_max": self.edge_windows_max,
            "highlight_lo": self.highlight_lo, "highlight_hi": self.highlight_hi,
            "background_mean": self.background_mean,
            "shadow_factor": self.shadow_factor,
            "shadow_len_min": self.shadow_len_min, "shadow_len_max": self.shadow_len_max,
            "speckle_shape": self.speckle_shape, "speckle_clip": self.speckle_clip,
            "seed": self.seed,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        d = dict(d)
        d["fan"] = FanGeometry.from_dict(d["fan"])
        if d.get("count_weights") is not None:
            d["count_weights"] = tuple(d["count_weights"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_json(cls, text: str) -> "SceneConfig":
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise DataError(f"invalid scene config: {e}") from e

    @classmethod
    def default(cls) -> "SceneConfig":
        """Sparse single-object scenes sized for quick end-to-end runs."""
        return cls()

    @classmethod
    def large(cls) -> "SceneConfig":
        """Larger frames with on the order of 1400 in-FOV windows."""
        return cls(
            width=480, height=480,
            fan=FanGeometry(
                origin_x=240.0, origin_y=540.0, r_min=70.0, r_max=500.0,
                half_angle=0.75, axis_angle=-np.pi / 2,
            ),
            count_min=1, count_max=3,
            size_min=80, size_max=112,
        )


@dataclass
class PlannedObject:
    """One placed object: box, appearance, and its shadow sector in polar form."""

    box: BoundingBox
    highlight: float
    shadow_len: int
    shadow_theta_lo: float
    shadow_theta_hi: float
    shadow_r_lo: float
    shadow_r_hi: float


@dataclass
class ScenePlan:
    frame_id: str
    objects: List[PlannedObject]


def _rect_min_dist(ox: float, oy: float, x0: float, y0: float, x1: float, y1: float) -> float:
    nx = min(max(ox, x0), x1)
    ny = min(max(oy, y0), y1)
    return float(np.hypot(ox - nx, oy - ny))


def _wrap(angle):
    return np.mod(angle + np.pi, 2.0 * np.pi) - np.pi


def _rect_in_fan(fan: FanGeometry, x0: float, y0: float, x1: float, y1: float) -> bool:
    """True if the whole rectangle lies inside the fan sector.

    Convexity makes corner checks sufficient for max radius and bearing
    extremes; min radius needs the closest point, not a corner.
    """
    if _rect_min_dist(fan.origin_x, fan.origin_y, x0, y0, x1, y1) < fan.r_min:
        return False
    cx = np.array([x0, x1, x1, x0]) - fan.origin_x
    cy = np.array([y0, y0, y1, y1]) - fan.origin_y
    if np.any(np.hypot(cx, cy) > fan.r_max):
        return False
    rel = _wrap(np.arctan2(cy, cx) - fan.axis_angle)
    return bool(np.all(np.abs(rel) <= fan.half_angle))


def _rects_overlap(a, b) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _shadow_sector(fan: FanGeometry, box: BoundingBox, length: int):
    """Polar extent of the shadow cast radially behind a box."""
    cx = np.array([box.x, box.x2, box.x2, box.x], dtype=np.float64) - fan.origin_x
    cy = np.array([box.y, box.y, box.y2, box.y2], dtype=np.float64) - fan.origin_y
    rel = _wrap(np.arctan2(cy, cx) - fan.axis_angle)
    r = np.hypot(cx, cy)
    r_lo = float(r.max())
    return float(rel.min()), float(rel.max()), r_lo, r_lo + float(length)


def _sector_bbox(fan: FanGeometry, theta_lo, theta_hi, r_lo, r_hi, pad=8.0):
    thetas = np.linspace(theta_lo, theta_hi, 7) + fan.axis_angle
    xs = fan.origin_x + np.outer([r_lo, r_hi], np.cos(thetas)).ravel()
    ys = fan.origin_y + np.outer([r_lo, r_hi], np.sin(thetas)).ravel()
    return xs.min() - pad, ys.min() - pad, xs.max() + pad, ys.max() + pad


def plan_frame(cfg: SceneConfig, frame_id: str, max_attempts: int = 200) -> ScenePlan:
    """Choose object placements and appearance for one frame.

    Placement rules: boxes stay _EDGE_MARGIN away from image borders, the
    padded clearance square around each box lies fully inside the fan, and
    no clearance square may touch another object's clearance or shadow
    extent. Bounded rejection sampling; a crowded draw redraws the whole
    frame a few times before failing with advice. All draws come from the
    (seed, frame id) stream, so the result is deterministic.
    """
    frame_id = str(frame_id)  # int 3 and "3" must plan the same frame
    rng = derive_rng(cfg.seed, frame_id, "plan")
    last_error = None
    for _ in range(3):
        try:
            return _plan_once(cfg, frame_id, rng, max_attempts)
        except DataError as e:
            last_error = e
    raise last_error


def _plan_once(cfg, frame_id, rng, max_attempts) -> ScenePlan:
    counts = np.arange(cfg.count_min, cfg.count_max + 1)
    if cfg.count_weights is None:
        n_objects = int(rng.choice(counts))
    else:
        p = np.asarray(cfg.count_weights, dtype=np.float64)
        n_objects = int(rng.choice(counts, p=p / p.sum()))

    fov_windows = None
    if cfg.edge_fraction > 0.0:
        fov_windows = enumerate_windows(cfg.fan, cfg.width, cfg.height, WindowConfig())

    objects: List[PlannedObject] = []
    clearances = []
    shadows = []
    for k in range(n_objects):
        is_edge = bool(rng.random() < cfg.edge_fraction)
        # the edge band (1-2 surviving windows) is a thin shell along the
        # FOV boundary, so edge draws get extra rejection-sampling budget
        attempts = max_attempts * 3 if is_edge else max_attempts
        placed = False
        for _ in range(attempts):
            w = int(rng.integers(cfg.size_min, cfg.size_max + 1))
            h = int(rng.integers(cfg.size_min, cfg.size_max + 1))
            x_hi = cfg.width - w - _EDGE_MARGIN
            y_hi = cfg.height - h - _EDGE_MARGIN
            if x_hi < _EDGE_MARGIN or y_hi < _EDGE_MARGIN:
                continue
            x = int(rng.integers(_EDGE_MARGIN, x_hi + 1))
            y = int(rng.integers(_EDGE_MARGIN, y_hi + 1))
            box = BoundingBox(x, y, w, h)
            side = max(w, h, WindowConfig().window_size) + _CLEARANCE_PAD
            ccx, ccy = x + w / 2.0, y + h / 2.0
            clearance = (ccx - side / 2, ccy - side / 2, ccx + side / 2, ccy + side / 2)
            if is_edge:
                # count in-FOV windows overlapping the box at IoU >= 0.5,
                # the same qualifying rule recall matching uses
                n_qual = int(np.count_nonzero(iou_matrix(fov_windows, [box]) >= 0.5))
                if not (cfg.edge_windows_min <= n_qual <= cfg.edge_windows_max):
                    continue
            elif not _rect_in_fan(cfg.fan, *clearance):
                continue
            shadow_len = int(rng.integers(cfg.shadow_len_min, cfg.shadow_len_max + 1))
            t_lo, t_hi, r_lo, r_hi = _shadow_sector(cfg.fan, box, shadow_len)
            sb = _sector_bbox(cfg.fan, t_lo, t_hi, r_lo, r_hi)
            # shadows may overlap each other (both stay dark) but never a
            # clearance square, so no highlight lands in a shadow sector
            if any(_rects_overlap(clearance, c) for c in clearances):
                continue
            if any(_rects_overlap(clearance, s) for s in shadows):
                continue
            if any(_rects_overlap(sb, c) for c in clearances):
                continue
            highlight = float(rng.uniform(cfg.highlight_lo, cfg.highlight_hi))
            objects.append(
                PlannedObject(
                    box=box, highlight=highlight, shadow_len=shadow_len,
                    shadow_theta_lo=t_lo, shadow_theta_hi=t_hi,
                    shadow_r_lo=r_lo, shadow_r_hi=r_hi,
                )
            )
            clearances.append(clearance)
            shadows.append(sb)
            placed = True
            break
        if not placed:
            raise DataError(
                f"frame {frame_id}: could not place object {k + 1} of {n_objects} "
                f"after {max_attempts} attempts; use fewer or smaller objects"
            )
    return ScenePlan(frame_id=frame_id, objects=objects)


def render_frame(cfg: SceneConfig, plan: ScenePlan) -> LabeledFrame:
    """Rasterize a plan: background, shadows, highlights, speckle, fan mask."""
    xs = np.arange(cfg.width, dtype=np.float64) + 0.5
    ys = np.arange(cfg.height, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)
    dx = px - cfg.fan.origin_x
    dy = py - cfg.fan.origin_y
    radius = np.hypot(dx, dy)
    rel = _wrap(np.arctan2(dy, dx) - cfg.fan.axis_angle)
    fan_mask = (
        (radius >= cfg.fan.r_min)
        & (radius <= cfg.fan.r_max)
        & (np.abs(rel) <= cfg.fan.half_angle)
    )

    intensity = np.full((cfg.height, cfg.width), cfg.background_mean, dtype=np.float64)
    for obj in plan.objects:
        shadow = (
            (rel >= obj.shadow_theta_lo)
            & (rel <= obj.shadow_theta_hi)
            & (radius > obj.shadow_r_lo)
            & (radius <= obj.shadow_r_hi)
        )
        intensity[shadow] *= cfg.shadow_factor
    for obj in plan.objects:
        b = obj.box
        ex = (px - (b.x + b.w / 2.0)) / (b.w / 2.0)
        ey = (py - (b.y + b.h / 2.0)) / (b.h / 2.0)
        intensity[ex * ex + ey * ey <= 1.0] = obj.highlight

    rng = derive_rng(cfg.seed, plan.frame_id, "speckle")
    speckle = rng.gamma(cfg.speckle_shape, 1.0 / cfg.speckle_shape, size=intensity.shape)
    speckle = np.minimum(speckle, cfg.speckle_clip)
    pixels = np.clip(intensity * speckle, 0.0, 1.0)
    img = np.round(pixels * 255.0).astype(np.uint8)
    img[~fan_mask] = 0
    return LabeledFrame(
        frame_id=plan.frame_id,
        image=img,
        fan=cfg.fan,
        boxes=[o.box for o in plan.objects],
    )


def generate_frame(cfg: SceneConfig, frame_id: str) -> LabeledFrame:
    """Deterministic frame for (cfg.seed, frame_id)."""
    return render_frame(cfg, plan_frame(cfg, frame_id))


def generate_dataset(cfg: SceneConfig, n_frames: int, out_dir) -> List[LabeledFrame]:
    """Generate frames with ids 0..n-1 and save them as a dataset directory."""
    if n_frames < 1:
        raise ValueError(f"n_frames must be >= 1, got {n_frames}")
    frames = [generate_frame(cfg, str(i)) for i in range(n_frames)]
    save_dataset(frames, out_dir)
    (Path(out_dir) / "scene_config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    return frames
