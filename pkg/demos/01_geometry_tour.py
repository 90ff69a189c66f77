"""Tour of the sonar fan geometry and the sliding-window grid.

Shows how the fan footprint masks the window grid and how IoU behaves
between neighbouring windows. Writes a fan mask image to demos/output/.
"""

from pathlib import Path

import numpy as np

from sonarprop.geometry import BoundingBox, FanGeometry, WindowConfig, enumerate_windows, fan_contains, iou
from sonarprop.pgm import write_pgm

OUT = Path(__file__).parent / "output"

fan = FanGeometry(
    origin_x=112.0, origin_y=250.0,
    r_min=40.0, r_max=252.0,
    half_angle=0.93, axis_angle=-np.pi / 2,
)
width = height = 224

# rasterize the footprint: 255 inside the fan, 0 outside
ys, xs = np.mgrid[0:height, 0:width]
mask = fan_contains(fan, xs.astype(float), ys.astype(float))
OUT.mkdir(exist_ok=True)
write_pgm(OUT / "fan_mask.pgm", np.where(mask, 255, 0).astype(np.uint8))
print(f"fan covers {mask.mean():.1%} of the {width}x{height} frame")

cfg = WindowConfig()
full_grid = (1 + (width - cfg.window_size) // cfg.stride) ** 2
windows = enumerate_windows(fan, width, height, cfg)
print(f"window grid: {full_grid} positions, {len(windows)} with all four corners in the fan")

# stride 8 on a 96 px window: one step of overlap costs ~8% IoU
a = windows[0]
for k in (1, 2, 4, 8):
    b = BoundingBox(a.x + k * cfg.stride, a.y, a.w, a.h)
    print(f"  shift {k * cfg.stride:3d}px sideways: IoU = {iou(a, b):.4f}")

print(f"wrote {OUT / 'fan_mask.pgm'}")
