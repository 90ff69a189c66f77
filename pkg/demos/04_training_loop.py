"""Train the objectness network on a small synthetic set (about a minute).

Walks the whole supervision pipeline: window labels from IoU, negative
sampling, flip augmentation, minibatch Adam with early stopping. Saves a
checkpoint that the later demos reuse.
"""

import time
from pathlib import Path

from sonarprop.dataset import split_frames
from sonarprop.nn import TrainConfig, save_checkpoint
from sonarprop.pipeline import train_pipeline
from sonarprop.synth import SceneConfig, generate_frame

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

scene = SceneConfig(count_min=1, count_max=1, seed=42)
frames = [generate_frame(scene, i) for i in range(16)]
train_f, val_f, test_f = split_frames(frames, seed=0)
print(f"{len(frames)} frames -> {len(train_f)} train / {len(val_f)} val / {len(test_f)} test")

config = TrainConfig(learning_rate=0.002, max_epochs=3, seed=0)
t0 = time.time()
model = train_pipeline(frames, config)
print(f"trained on {model.n_train_crops} crops in {time.time() - t0:.0f}s")
for s in model.history:
    print(f"  epoch {s.epoch}: train loss {s.train_loss:.5f}, val loss {s.val_loss:.5f}")

path = OUT / "demo.ckpt"
save_checkpoint(model.net, path, epochs_run=len(model.history), final_val_loss=model.best_val_loss)
print(f"wrote {path}")
