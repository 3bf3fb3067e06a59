"""Layer implementations: forward, backward, and static shape algebra.

Data layout is (batch, features) for dense layers and
(batch, channels, height, width) for spatial ones. Shapes reported by
``output_shape`` exclude the batch axis, so networks can be shape-checked
at construction time before any data flows.

Weight initialization follows the activation each layer feeds: He-uniform
in front of ReLU, Glorot-uniform in front of the sigmoid output.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from ..exceptions import ShapeError

__all__ = [
    "Layer",
    "Dense",
    "Conv3x3",
    "MaxPool2x2",
    "Upsample2x2",
    "BatchNorm",
    "ReLU",
    "Sigmoid",
    "Crop",
    "Pad",
    "Flatten",
    "Reshape",
]

BN_MOMENTUM = 0.99
BN_EPS = 1e-8


def _init_weights(shape, fan_in, fan_out, init, rng):
    if rng is None:
        return np.zeros(shape)
    if init == "he":
        limit = math.sqrt(6.0 / fan_in)
    elif init == "glorot":
        limit = math.sqrt(6.0 / (fan_in + fan_out))
    else:
        raise ValueError(f"unknown init {init!r}")
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    """Base layer: parameter arrays, their gradients, and non-trained buffers."""

    def __init__(self):
        self.params: list[np.ndarray] = []
        self.grads: list[np.ndarray] = []
        self.buffers: list[np.ndarray] = []
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def config(self) -> tuple:
        """(kind, int args...) record used for serialization."""
        raise NotImplementedError

    def clear_cache(self):
        self._cache = None

    def _require_spatial(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(
                f"{type(self).__name__} expects (channels, h, w) input, got {in_shape}"
            )


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, init: str = "he", rng=None):
        super().__init__()
        self.n_in = n_in
        self.n_out = n_out
        weight = _init_weights((n_in, n_out), n_in, n_out, init, rng)
        bias = np.zeros(n_out)
        self.params = [weight, bias]
        self.grads = [np.zeros_like(weight), np.zeros_like(bias)]

    def forward(self, x, train):
        if train:
            self._cache = x
        weight, bias = self.params
        return x @ weight + bias

    def backward(self, dy):
        x = self._cache
        weight, _ = self.params
        self.grads[0][...] = x.T @ dy
        self.grads[1][...] = dy.sum(axis=0)
        return dy @ weight.T

    def output_shape(self, in_shape):
        if in_shape != (self.n_in,):
            raise ShapeError(f"dense({self.n_in},{self.n_out}) got input shape {in_shape}")
        return (self.n_out,)

    def config(self):
        return ("dense", self.n_in, self.n_out)


class Conv3x3(Layer):
    """3x3 convolution, stride 1, zero same-padding.

    Runs as im2col plus one batched GEMM in both directions; the column
    matrix is cached during training for the weight-gradient GEMM.
    """

    def __init__(self, c_in: int, c_out: int, init: str = "he", rng=None):
        super().__init__()
        self.c_in = c_in
        self.c_out = c_out
        weight = _init_weights((c_out, c_in, 3, 3), c_in * 9, c_out * 9, init, rng)
        bias = np.zeros(c_out)
        self.params = [weight, bias]
        self.grads = [np.zeros_like(weight), np.zeros_like(bias)]

    @staticmethod
    def _im2col(xp, h, w):
        b, c = xp.shape[:2]
        s0, s1, s2, s3 = xp.strides
        view = np.lib.stride_tricks.as_strided(
            xp, shape=(b, c, 3, 3, h, w), strides=(s0, s1, s2, s3, s2, s3)
        )
        return view.reshape(b, c * 9, h * w)  # copies into contiguous columns

    def forward(self, x, train):
        weight, bias = self.params
        b, _, h, w = x.shape
        xp = np.zeros((b, self.c_in, h + 2, w + 2))
        xp[:, :, 1:-1, 1:-1] = x
        cols = self._im2col(xp, h, w)
        if train:
            self._cache = (cols, (h, w))
        y = np.matmul(weight.reshape(self.c_out, -1), cols)
        return y.reshape(b, self.c_out, h, w) + bias[None, :, None, None]

    def backward(self, dy):
        cols, (h, w) = self._cache
        weight, _ = self.params
        b = dy.shape[0]
        dy_mat = dy.reshape(b, self.c_out, h * w)
        dweight = np.matmul(dy_mat, cols.transpose(0, 2, 1)).sum(axis=0)
        self.grads[0][...] = dweight.reshape(weight.shape)
        self.grads[1][...] = dy.sum(axis=(0, 2, 3))
        dcols = np.matmul(weight.reshape(self.c_out, -1).T, dy_mat)
        dcols = dcols.reshape(b, self.c_in, 3, 3, h, w)
        dxp = np.zeros((b, self.c_in, h + 2, w + 2))
        for di in range(3):
            for dj in range(3):
                dxp[:, :, di:di + h, dj:dj + w] += dcols[:, :, di, dj]
        return dxp[:, :, 1:-1, 1:-1]

    def output_shape(self, in_shape):
        self._require_spatial(in_shape)
        if in_shape[0] != self.c_in:
            raise ShapeError(f"conv3x3 expects {self.c_in} channels, got {in_shape[0]}")
        return (self.c_out, in_shape[1], in_shape[2])

    def config(self):
        return ("conv3x3", self.c_in, self.c_out)


class MaxPool2x2(Layer):
    """2x2 max pooling with ceil semantics: 13x15 pools to 7x8."""

    def forward(self, x, train):
        b, c, h, w = x.shape
        h2, w2 = -(-h // 2), -(-w // 2)
        xp = np.full((b, c, 2 * h2, 2 * w2), -np.inf)
        xp[:, :, :h, :w] = x
        windows = (
            xp.reshape(b, c, h2, 2, w2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h2, w2, 4)
        )
        idx = windows.argmax(axis=4)
        if train:
            self._cache = (idx, (h, w))
        return np.take_along_axis(windows, idx[..., None], axis=4)[..., 0]

    def backward(self, dy):
        idx, (h, w) = self._cache
        b, c, h2, w2 = dy.shape
        dwin = np.zeros((b, c, h2, w2, 4))
        np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=4)
        dxp = (
            dwin.reshape(b, c, h2, w2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, 2 * h2, 2 * w2)
        )
        return dxp[:, :, :h, :w]

    def output_shape(self, in_shape):
        self._require_spatial(in_shape)
        c, h, w = in_shape
        return (c, -(-h // 2), -(-w // 2))

    def config(self):
        return ("maxpool2x2",)


class Upsample2x2(Layer):
    """Nearest-neighbor 2x upsampling."""

    def forward(self, x, train):
        return x.repeat(2, axis=2).repeat(2, axis=3)

    def backward(self, dy):
        b, c, h2, w2 = dy.shape
        return dy.reshape(b, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))

    def output_shape(self, in_shape):
        self._require_spatial(in_shape)
        c, h, w = in_shape
        return (c, 2 * h, 2 * w)

    def config(self):
        return ("upsample2x2",)


class BatchNorm(Layer):
    """Per-channel batch normalization with learned scale and shift.

    Train mode normalizes with batch statistics and tracks running
    statistics (momentum 0.99); inference normalizes with the running
    statistics. Works on (b, features) and (b, c, h, w) inputs alike,
    normalizing over every axis except the channel one.
    """

    def __init__(self, channels: int):
        super().__init__()
        self.channels = channels
        gamma = np.ones(channels)
        beta = np.zeros(channels)
        self.params = [gamma, beta]
        self.grads = [np.zeros_like(gamma), np.zeros_like(beta)]
        self.buffers = [np.zeros(channels), np.ones(channels)]  # running mean, var

    def _axes_and_view(self, ndim):
        if ndim == 2:
            return (0,), (1, self.channels)
        if ndim == 4:
            return (0, 2, 3), (1, self.channels, 1, 1)
        raise ShapeError(f"batchnorm supports 2d or 4d input, got {ndim}d")

    def forward(self, x, train):
        axes, view = self._axes_and_view(x.ndim)
        gamma, beta = self.params
        running_mean, running_var = self.buffers
        if train:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (x - mean.reshape(view)) * inv_std.reshape(view)
            running_mean *= BN_MOMENTUM
            running_mean += (1.0 - BN_MOMENTUM) * mean
            running_var *= BN_MOMENTUM
            running_var += (1.0 - BN_MOMENTUM) * var
            self._cache = (xhat, inv_std, axes, view)
        else:
            inv_std = 1.0 / np.sqrt(running_var + BN_EPS)
            xhat = (x - running_mean.reshape(view)) * inv_std.reshape(view)
        return gamma.reshape(view) * xhat + beta.reshape(view)

    def backward(self, dy):
        xhat, inv_std, axes, view = self._cache
        gamma, _ = self.params
        n = dy.size // self.channels
        self.grads[0][...] = (dy * xhat).sum(axis=axes)
        self.grads[1][...] = dy.sum(axis=axes)
        dxhat = dy * gamma.reshape(view)
        # Batch-statistics backward, folded into the standard 3-term form.
        term = (
            dxhat
            - dxhat.mean(axis=axes).reshape(view)
            - xhat * (dxhat * xhat).mean(axis=axes).reshape(view)
        )
        return term * inv_std.reshape(view)

    def output_shape(self, in_shape):
        if in_shape[0] != self.channels:
            raise ShapeError(
                f"batchnorm({self.channels}) got {in_shape[0]} channels"
            )
        return in_shape

    def config(self):
        return ("batchnorm", self.channels)


class ReLU(Layer):
    def forward(self, x, train):
        if train:
            self._cache = x > 0
        return np.maximum(x, 0.0)

    def backward(self, dy):
        return dy * self._cache

    def output_shape(self, in_shape):
        return in_shape

    def config(self):
        return ("relu",)


class Sigmoid(Layer):
    def forward(self, x, train):
        y = expit(x)
        if train:
            self._cache = y
        return y

    def backward(self, dy):
        y = self._cache
        return dy * y * (1.0 - y)

    def output_shape(self, in_shape):
        return in_shape

    def config(self):
        return ("sigmoid",)


class Crop(Layer):
    """Center-crop spatial dims down to (target_h, target_w)."""

    def __init__(self, target_h: int, target_w: int):
        super().__init__()
        self.target_h = target_h
        self.target_w = target_w

    def _offsets(self, h, w):
        return (h - self.target_h) // 2, (w - self.target_w) // 2

    def forward(self, x, train):
        h, w = x.shape[2], x.shape[3]
        top, left = self._offsets(h, w)
        if train:
            self._cache = (h, w)
        return x[:, :, top:top + self.target_h, left:left + self.target_w]

    def backward(self, dy):
        h, w = self._cache
        top, left = self._offsets(h, w)
        dx = np.zeros((dy.shape[0], dy.shape[1], h, w))
        dx[:, :, top:top + self.target_h, left:left + self.target_w] = dy
        return dx

    def output_shape(self, in_shape):
        self._require_spatial(in_shape)
        c, h, w = in_shape
        if h < self.target_h or w < self.target_w:
            raise ShapeError(f"cannot crop {h}x{w} to {self.target_h}x{self.target_w}")
        return (c, self.target_h, self.target_w)

    def config(self):
        return ("crop", self.target_h, self.target_w)


class Pad(Layer):
    """Replicate-pad spatial dims up to (target_h, target_w).

    The source block is placed at offset (floor(dh/2), floor(dw/2)), the
    mirror of Crop's offsets, so pad(H',W') followed by crop(H,W) is the
    identity on the original cells.
    """

    def __init__(self, target_h: int, target_w: int):
        super().__init__()
        self.target_h = target_h
        self.target_w = target_w

    def _pads(self, h, w):
        top = (self.target_h - h) // 2
        left = (self.target_w - w) // 2
        return top, self.target_h - h - top, left, self.target_w - w - left

    def forward(self, x, train):
        h, w = x.shape[2], x.shape[3]
        top, bottom, left, right = self._pads(h, w)
        if train:
            self._cache = (h, w)
        return np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)), mode="edge")

    def backward(self, dy):
        h, w = self._cache
        top, _, left, _ = self._pads(h, w)
        rows = np.clip(np.arange(self.target_h) - top, 0, h - 1)
        cols = np.clip(np.arange(self.target_w) - left, 0, w - 1)
        # Replicated cells all feed gradient back into their source edge cell.
        by_col = dy.transpose(3, 0, 1, 2)  # (tw, b, c, th)
        col_sum = np.zeros((w,) + by_col.shape[1:])
        np.add.at(col_sum, cols, by_col)
        by_row = col_sum.transpose(3, 1, 2, 0)  # (th, b, c, w)
        row_sum = np.zeros((h,) + by_row.shape[1:])
        np.add.at(row_sum, rows, by_row)
        return row_sum.transpose(1, 2, 0, 3)

    def output_shape(self, in_shape):
        self._require_spatial(in_shape)
        c, h, w = in_shape
        if h > self.target_h or w > self.target_w:
            raise ShapeError(f"cannot pad {h}x{w} to {self.target_h}x{self.target_w}")
        return (c, self.target_h, self.target_w)

    def config(self):
        return ("pad", self.target_h, self.target_w)


class Flatten(Layer):
    def forward(self, x, train):
        if train:
            self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._cache)

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def config(self):
        return ("flatten",)


class Reshape(Layer):
    """(b, features) -> (b, c, h, w)."""

    def __init__(self, channels: int, height: int, width: int):
        super().__init__()
        self.shape = (channels, height, width)

    def forward(self, x, train):
        return x.reshape((x.shape[0],) + self.shape)

    def backward(self, dy):
        return dy.reshape(dy.shape[0], -1)

    def output_shape(self, in_shape):
        if int(np.prod(in_shape)) != int(np.prod(self.shape)):
            raise ShapeError(f"cannot reshape {in_shape} to {self.shape}")
        return self.shape

    def config(self):
        return ("reshape",) + self.shape
