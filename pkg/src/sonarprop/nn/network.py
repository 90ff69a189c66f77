"""The objectness network: fixed 96x96 architecture, scoring, and gradients.

Architecture (valid convolutions, so 96 -> 92 -> 46 -> 42 -> 21):

    Conv(32, 5x5) -> ReLU -> MaxPool 2x2 -> BatchNorm
    Conv(32, 5x5) -> ReLU -> MaxPool 2x2 -> BatchNorm
    Flatten -> Dense(96) -> ReLU -> BatchNorm -> Dense(1) -> Sigmoid

1,381,729 trainable parameters. Inference always runs in fixed-size chunks of
32 (zero-padded), so a crop's score never depends on what else shares its
batch, down to the last bit.
"""

from __future__ import annotations

from typing import Dict, List, Tuple

import numpy as np

from .layers import BatchNorm, Conv2D, Dense, Flatten, MaxPool2, ReLU, Sigmoid

INPUT_SIZE = 96
FLAT_FEATURES = 32 * 21 * 21
PREDICT_CHUNK = 32


class ObjectnessNet:
    """Scores 96x96 single-channel windows with a scalar objectness in (0,1)."""

    def __init__(self):
        self.conv1 = Conv2D(1, 32)
        self.bn1 = BatchNorm(32)
        self.conv2 = Conv2D(32, 32)
        self.bn2 = BatchNorm(32)
        self.dense1 = Dense(FLAT_FEATURES, 96)
        self.bn3 = BatchNorm(96)
        self.dense2 = Dense(96, 1)
        self._order: List[Tuple[str, object]] = [
            ("conv1", self.conv1),
            ("relu1", ReLU()),
            ("pool1", MaxPool2()),
            ("bn1", self.bn1),
            ("conv2", self.conv2),
            ("relu2", ReLU()),
            ("pool2", MaxPool2()),
            ("bn2", self.bn2),
            ("flatten", Flatten()),
            ("dense1", self.dense1),
            ("relu3", ReLU()),
            ("bn3", self.bn3),
            ("dense2", self.dense2),
            ("sigmoid", Sigmoid()),
        ]

    # parameter bookkeeping

    def parameters(self) -> Dict[str, np.ndarray]:
        """Live references to every trainable array, keyed layer/name."""
        out = {}
        for lname, layer in self._order:
            for pname, arr in layer.params().items():
                out[f"{lname}/{pname}"] = arr
        return out

    def gradients(self) -> Dict[str, np.ndarray]:
        out = {}
        for lname, layer in self._order:
            for pname, arr in layer.grads().items():
                out[f"{lname}/{pname}"] = arr
        return out

    def running_stats(self) -> Dict[str, np.ndarray]:
        out = {}
        for lname, layer in (("bn1", self.bn1), ("bn2", self.bn2), ("bn3", self.bn3)):
            out[f"{lname}/running_mean"] = layer.running_mean
            out[f"{lname}/running_var"] = layer.running_var
        return out

    def parameter_count(self) -> int:
        return sum(arr.size for arr in self.parameters().values())

    def state_snapshot(self) -> Dict[str, np.ndarray]:
        snap = {k: v.copy() for k, v in self.parameters().items()}
        snap.update({k: v.copy() for k, v in self.running_stats().items()})
        return snap

    def load_state(self, snap: Dict[str, np.ndarray]) -> None:
        params = self.parameters()
        stats = self.running_stats()
        for name, value in snap.items():
            if name in params:
                np.copyto(params[name], value)
            elif name in stats:
                np.copyto(stats[name], value)
            else:
                raise ValueError(f"unknown state entry {name}")

    # forward / backward

    @staticmethod
    def _to_batch(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim == 2:
            x = x[None, None]
        elif x.ndim == 3:
            x = x[:, None]
        if x.ndim != 4 or x.shape[1] != 1 or x.shape[2:] != (INPUT_SIZE, INPUT_SIZE):
            raise ValueError(
                f"expected crops shaped (B,1,{INPUT_SIZE},{INPUT_SIZE}), got {x.shape}"
            )
        return x

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """Scores for a batch of crops (B,1,96,96) -> (B,)."""
        x = self._to_batch(x)
        h = np.ascontiguousarray(x.transpose(0, 2, 3, 1))
        for _, layer in self._order:
            h = layer.forward(h, train=train)
        return h[:, 0]

    def backward(self, dscores: np.ndarray) -> None:
        """Backpropagate d(loss)/d(scores); parameter grads land in the layers."""
        g = np.asarray(dscores)[:, None]
        for i, (_, layer) in enumerate(reversed(self._order)):
            last = i == len(self._order) - 1
            g = layer.backward(g, need_dx=not last)

    def predict(self, crops: np.ndarray) -> np.ndarray:
        """Inference scores in (0,1), one per crop.

        Runs fixed chunks of PREDICT_CHUNK rows, zero-padding the tail, so
        results are bitwise independent of batch composition.
        """
        x = self._to_batch(crops).astype(np.float32, copy=False)
        n = x.shape[0]
        out = np.empty(n, dtype=np.float32)
        for start in range(0, n, PREDICT_CHUNK):
            chunk = x[start : start + PREDICT_CHUNK]
            if chunk.shape[0] < PREDICT_CHUNK:
                pad = np.zeros(
                    (PREDICT_CHUNK - chunk.shape[0], 1, INPUT_SIZE, INPUT_SIZE),
                    dtype=np.float32,
                )
                chunk = np.concatenate([chunk, pad], axis=0)
            scores = self.forward(chunk, train=False)
            out[start : start + PREDICT_CHUNK] = scores[: n - start]
        return out


def init_params(seed: int) -> ObjectnessNet:
    """Fresh network, weights uniform within +-sqrt(6/(fan_in+fan_out)).

    Biases and batch-norm shifts start at zero, batch-norm scales at one.
    Draw order is conv1, conv2, dense1, dense2, so a given seed always
    produces the same parameters.
    """
    rng = np.random.default_rng(seed)
    net = ObjectnessNet()

    def glorot(shape, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape).astype(np.float32)

    k = net.conv1.ksize
    net.conv1.w = glorot(net.conv1.w.shape, 1 * k * k, 32 * k * k)
    net.conv2.w = glorot(net.conv2.w.shape, 32 * k * k, 32 * k * k)
    net.dense1.w = glorot(net.dense1.w.shape, FLAT_FEATURES, 96)
    net.dense2.w = glorot(net.dense2.w.shape, 96, 1)
    return net
