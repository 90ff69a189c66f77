"""Layer forward/backward passes, written against plain numpy arrays.

Layer classes run batched with channels last, (B, H, W, C), which keeps the
im2col matrices and gemm calls copy-free on the hot path. The module-level
functions mirror the classes on single channel-first samples, (C, H, W), for
convenience and for direct value checks.

Layers are dtype-polymorphic: training runs float32, gradient checks push
float64 through the identical code path.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Conv2D:
    """Valid (unpadded) cross-correlation, stride 1, square kernels."""

    def __init__(self, c_in: int, c_out: int, ksize: int = 5):
        self.c_in = c_in
        self.c_out = c_out
        self.ksize = ksize
        self.w = np.zeros((c_out, c_in, ksize, ksize), dtype=np.float32)
        self.b = np.zeros(c_out, dtype=np.float32)
        self.dw = None
        self.db = None
        self._col = None
        self._x_shape = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        B, H, W, C = x.shape
        k = self.ksize
        if C != self.c_in:
            raise ValueError(f"expected {self.c_in} input channels, got {C}")
        if H < k or W < k:
            raise ValueError(f"spatial dims {H}x{W} smaller than kernel {k}")
        ho, wo = H - k + 1, W - k + 1
        # im2col with (k, k, C) innermost so the reshape copy reads k*C-float
        # contiguous runs instead of scattered elements
        patches = sliding_window_view(x, (k, k), axis=(1, 2))
        col = patches.transpose(0, 1, 2, 4, 5, 3).reshape(B * ho * wo, k * k * C)
        wmat = np.ascontiguousarray(self.w.transpose(0, 2, 3, 1)).reshape(
            self.c_out, k * k * C
        )
        y = col @ wmat.T
        y += self.b
        if train:
            self._col = col
            self._x_shape = x.shape
        return y.reshape(B, ho, wo, self.c_out)

    def backward(self, dy: np.ndarray, need_dx: bool = True):
        B, ho, wo, F = dy.shape
        k = self.ksize
        dym = dy.reshape(B * ho * wo, F)
        dwflat = dym.T @ self._col
        self.dw = np.ascontiguousarray(
            dwflat.reshape(F, k, k, self.c_in).transpose(0, 3, 1, 2)
        )
        self.db = dym.sum(axis=0)
        dx = None
        if need_dx:
            # dx is the full correlation of dy with the rotated kernels,
            # which runs as one gemm over a zero-padded dy
            p = k - 1
            pad = np.zeros((B, ho + 2 * p, wo + 2 * p, F), dtype=dy.dtype)
            pad[:, p : p + ho, p : p + wo, :] = dy
            patches = sliding_window_view(pad, (k, k), axis=(1, 2))
            col = patches.transpose(0, 1, 2, 4, 5, 3).reshape(
                B * (ho + p) * (wo + p), k * k * F
            )
            wrot = np.ascontiguousarray(self.w.transpose(1, 2, 3, 0)[:, ::-1, ::-1, :])
            dx = (col @ wrot.reshape(self.c_in, k * k * F).T).reshape(
                B, ho + p, wo + p, self.c_in
            )
        self._col = None
        return dx

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class MaxPool2:
    """Non-overlapping 2x2 max pooling; ties go to the first position in scan order."""

    def __init__(self):
        self._idx = None
        self._shape = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        B, H, W, C = x.shape
        if H % 2 or W % 2:
            raise ValueError(f"spatial dims must be even for 2x2 pooling, got {H}x{W}")
        a = x[:, 0::2, 0::2, :]
        b = x[:, 0::2, 1::2, :]
        c = x[:, 1::2, 0::2, :]
        d = x[:, 1::2, 1::2, :]
        ab = np.maximum(a, b)
        cd = np.maximum(c, d)
        y = np.maximum(ab, cd)
        if train:
            # block scan order is a, b, c, d; >= keeps the earlier position
            # on ties, matching argmax over the flattened 2x2 block
            sab = (a >= b).astype(np.uint8)
            scd = (c >= d).astype(np.uint8)
            self._idx = np.where(ab >= cd, 1 - sab, 3 - scd)
            self._shape = x.shape
        return y

    def backward(self, dy: np.ndarray, need_dx: bool = True):
        if not need_dx:
            self._idx = None
            return None
        B, H, W, C = self._shape
        dblocks = np.zeros((B, H // 2, W // 2, C, 4), dtype=dy.dtype)
        np.put_along_axis(
            dblocks, self._idx[..., None].astype(np.intp), dy[..., None], axis=-1
        )
        dx = (
            dblocks.reshape(B, H // 2, W // 2, C, 2, 2)
            .transpose(0, 1, 4, 2, 5, 3)
            .reshape(B, H, W, C)
        )
        self._idx = None
        return dx

    def params(self):
        return {}

    def grads(self):
        return {}


class BatchNorm:
    """Batch normalization over all axes but the last (channels/features).

    Works for both conv maps (B, H, W, C) and dense features (B, N): stats
    reduce over every leading axis, one scale/shift pair per trailing channel.
    Batch variance is the biased estimator; running stats follow
    running = momentum * running + (1 - momentum) * batch.
    """

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.scale = np.ones(channels, dtype=np.float32)
        self.shift = np.zeros(channels, dtype=np.float32)
        self.running_mean = np.zeros(channels, dtype=np.float32)
        self.running_var = np.ones(channels, dtype=np.float32)
        self.dscale = None
        self.dshift = None
        self._xhat = None
        self._inv_std = None
        self._axes = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.shape[-1] != self.channels:
            raise ValueError(f"expected {self.channels} channels, got {x.shape[-1]}")
        axes = tuple(range(x.ndim - 1))
        if train:
            if x.shape[0] < 2:
                raise ValueError("batch norm in train mode needs batch size >= 2")
            mean = x.mean(axis=axes)
            xhat = x - mean
            var = np.mean(xhat * xhat, axis=axes)
            inv_std = 1.0 / np.sqrt(var + self.eps)
            xhat *= inv_std
            m = self.momentum
            self.running_mean = (m * self.running_mean + (1.0 - m) * mean).astype(
                self.running_mean.dtype
            )
            self.running_var = (m * self.running_var + (1.0 - m) * var).astype(
                self.running_var.dtype
            )
            self._xhat = xhat
            self._inv_std = inv_std
            self._axes = axes
            return self.scale * xhat + self.shift
        a = self.scale / np.sqrt(self.running_var + self.eps)
        return a * x + (self.shift - a * self.running_mean)

    def backward(self, dy: np.ndarray, need_dx: bool = True):
        axes = self._axes
        xhat = self._xhat
        self.dscale = (dy * xhat).sum(axis=axes)
        self.dshift = dy.sum(axis=axes)
        dx = None
        if need_dx:
            n = dy.size // dy.shape[-1]
            dx = dy - self.dshift / n
            dx -= xhat * (self.dscale / n)
            dx *= self.scale * self._inv_std
        self._xhat = None
        self._inv_std = None
        return dx

    def params(self):
        return {"scale": self.scale, "shift": self.shift}

    def grads(self):
        return {"scale": self.dscale, "shift": self.dshift}


class Dense:
    """Affine map y = x W^T + b with weights shaped (n_out, n_in)."""

    def __init__(self, n_in: int, n_out: int):
        self.n_in = n_in
        self.n_out = n_out
        self.w = np.zeros((n_out, n_in), dtype=np.float32)
        self.b = np.zeros(n_out, dtype=np.float32)
        self.dw = None
        self.db = None
        self._x = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if x.shape[-1] != self.n_in:
            raise ValueError(f"expected {self.n_in} input features, got {x.shape[-1]}")
        if train:
            self._x = x
        return x @ self.w.T + self.b

    def backward(self, dy: np.ndarray, need_dx: bool = True):
        self.dw = dy.T @ self._x
        self.db = dy.sum(axis=0)
        dx = dy @ self.w if need_dx else None
        self._x = None
        return dx

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.dw, "b": self.db}


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        y = np.maximum(x, 0)
        if train:
            self._mask = x > 0
        return y

    def backward(self, dy: np.ndarray, need_dx: bool = True):
        dx = dy * self._mask if need_dx else None
        self._mask = None
        return dx

    def params(self):
        return {}

    def grads(self):
        return {}


class Sigmoid:
    def __init__(self):
        self._y = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        # split by sign so exp never overflows
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        if train:
            self._y = y
        return y

    def backward(self, dy: np.ndarray, need_dx: bool = True):
        dx = dy * self._y * (1.0 - self._y) if need_dx else None
        self._y = None
        return dx

    def params(self):
        return {}

    def grads(self):
        return {}


class Flatten:
    def __init__(self):
        self._shape = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if train:
            self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy: np.ndarray, need_dx: bool = True):
        dx = dy.reshape(self._shape) if need_dx else None
        self._shape = None
        return dx

    def params(self):
        return {}

    def grads(self):
        return {}


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient with respect to pred."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, grad


# single-sample channel-first wrappers around the batched cores


def _chw_call(layer, x):
    batched = x.ndim == 4
    xb = x if batched else x[None]
    y = layer.forward(np.ascontiguousarray(xb.transpose(0, 2, 3, 1)))
    y = y.transpose(0, 3, 1, 2)
    return y if batched else y[0]


def conv2d(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Valid cross-correlation on (C,H,W) or (B,C,H,W) input."""
    c_out, c_in, k, _ = kernels.shape
    layer = Conv2D(c_in, c_out, k)
    layer.w = kernels
    layer.b = bias
    return _chw_call(layer, np.asarray(x))


def maxpool2(x: np.ndarray) -> np.ndarray:
    """2x2 max pooling on (C,H,W) or (B,C,H,W) input."""
    return _chw_call(MaxPool2(), np.asarray(x))


def dense(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map on (N,) or (B,N) input with (M,N) weights."""
    layer = Dense(weights.shape[1], weights.shape[0])
    layer.w = weights
    layer.b = bias
    x = np.asarray(x)
    if x.ndim == 1:
        return layer.forward(x[None])[0]
    return layer.forward(x)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x), 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return Sigmoid().forward(np.asarray(x, dtype=np.result_type(x, np.float32)))
