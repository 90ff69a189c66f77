"""Mini-batch training loop with early stopping on validation loss."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..errors import NumericError
from .adam import Adam
from .layers import mse_loss
from .network import ObjectnessNet


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 10
    patience: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must be in (0, 1)")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


def _check_set(name: str, data: Tuple[np.ndarray, np.ndarray]):
    x, y = data
    if len(x) == 0:
        raise ValueError(f"{name} set is empty")
    if len(x) != len(y):
        raise ValueError(f"{name} set: {len(x)} inputs vs {len(y)} labels")
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError(f"{name} labels must be in [0, 1]")
    return np.asarray(x, dtype=np.float32), np.asarray(y, dtype=np.float32)


def train(
    net: ObjectnessNet,
    train_set: Tuple[np.ndarray, np.ndarray],
    val_set: Tuple[np.ndarray, np.ndarray],
    config: TrainConfig,
) -> Tuple[ObjectnessNet, List[EpochStats]]:
    """Fit the network; returns it holding the best-validation-epoch state.

    Each epoch shuffles with the seeded rng and steps Adam per mini batch
    (a trailing batch of size 1 is dropped: train-mode batch norm needs at
    least 2 samples). Validation loss is measured in inference mode after
    each epoch; training stops once it has not improved for `patience`
    consecutive epochs, and the best epoch's parameters and running
    statistics are restored before returning.
    """
    x_train, y_train = _check_set("train", train_set)
    x_val, y_val = _check_set("validation", val_set)

    rng = np.random.default_rng(config.seed)
    opt = Adam(alpha=config.learning_rate, beta1=config.beta1,
               beta2=config.beta2, eps=config.eps)
    params = net.parameters()

    history: List[EpochStats] = []
    best_val = np.inf
    best_state = None
    stale = 0
    n = len(x_train)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        sq_sum = 0.0
        seen = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            if len(idx) < 2:
                continue
            xb = x_train[idx]
            yb = y_train[idx]
            scores = net.forward(xb, train=True)
            loss, dscores = mse_loss(scores, yb)
            if not np.isfinite(loss):
                raise NumericError(
                    f"non-finite training loss at epoch {epoch}, batch "
                    f"{start // config.batch_size}; try a lower learning rate"
                )
            net.backward(dscores)
            opt.step(params, net.gradients())
            sq_sum += loss * len(idx)
            seen += len(idx)

        train_loss = sq_sum / max(seen, 1)
        val_scores = net.predict(x_val)
        val_loss, _ = mse_loss(val_scores, y_val)
        if not np.isfinite(val_loss):
            raise NumericError(
                f"non-finite validation loss after epoch {epoch}; "
                f"try a lower learning rate"
            )
        history.append(EpochStats(epoch=epoch, train_loss=train_loss, val_loss=val_loss))

        if val_loss < best_val:
            best_val = val_loss
            best_state = net.state_snapshot()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    if best_state is not None:
        net.load_state(best_state)
    return net, history
