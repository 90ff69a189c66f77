"""Anatomy of the objectness network: parameters, shapes, and raw speed.

The architecture is fixed (96x96 in, scalar out), so this is mostly a
sanity tour: where the 1.38M parameters live and what a forward pass costs.
"""

import time

import numpy as np

from sonarprop.nn import init_params

net = init_params(seed=0)

groups = {}
for key, arr in net.parameters().items():
    layer = key.split("/")[0]
    groups[layer] = groups.get(layer, 0) + arr.size
for layer, n in groups.items():
    print(f"  {layer:8s} {n:9,d} params")
print(f"  total    {net.parameter_count():9,d}")

# spatial chain: valid 5x5 convs shrink by 4, pools halve
side = 96
for step in ("conv 5x5", "pool 2x2", "conv 5x5", "pool 2x2"):
    side = side - 4 if step.startswith("conv") else side // 2
    print(f"  after {step}: {side}x{side}")

rng = np.random.default_rng(0)
crops = rng.random((64, 96, 96))
net.predict(crops[:1])  # warm the BLAS threads before timing
t0 = time.time()
scores = net.predict(crops)
dt = time.time() - t0
print(f"scored {len(crops)} windows in {dt:.2f}s ({1000 * dt / len(crops):.1f} ms/window)")
print(f"score range on noise: [{scores.min():.3f}, {scores.max():.3f}]")
