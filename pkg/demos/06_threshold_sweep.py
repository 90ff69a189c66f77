"""Recall / proposal-count trade-off: learned scores vs a random baseline.

Needs the checkpoint from 04_training_loop.py. Sweeps the objectness
threshold over fresh frames the model never saw and prints both curves;
the learned scorer should reach high recall with far fewer proposals.
"""

from pathlib import Path

from sonarprop.evaluate import (
    default_threshold_grid,
    random_baseline_sweep,
    threshold_sweep,
    write_curve_csv,
)
from sonarprop.nn import load_checkpoint
from sonarprop.synth import SceneConfig, generate_frame

OUT = Path(__file__).parent / "output"
ckpt = OUT / "demo.ckpt"
if not ckpt.exists():
    raise SystemExit("run 04_training_loop.py first")

net, _ = load_checkpoint(ckpt)
scene = SceneConfig(count_min=1, count_max=1, seed=43)
frames = [generate_frame(scene, i) for i in range(8)]

grid = default_threshold_grid(step=0.1)
learned = threshold_sweep(net, frames, grid)
baseline = random_baseline_sweep(frames, grid, seed=0)

print(f"{'T_o':>5} {'recall':>8} {'mean#':>8} | {'rand rec':>8} {'rand#':>8}")
for lr, br in zip(learned, baseline):
    print(f"{lr.threshold:5.2f} {lr.recall:8.3f} {lr.mean_proposals:8.1f} | "
          f"{br.recall:8.3f} {br.mean_proposals:8.1f}")

write_curve_csv(learned, OUT / "curve_learned.csv")
write_curve_csv(baseline, OUT / "curve_baseline.csv")
print(f"wrote curve CSVs to {OUT}")
