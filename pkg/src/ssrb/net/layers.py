"""Trainable layers with explicit forward/backward passes on numpy arrays.

Convolutions are cross-correlations (kernel not flipped), computed either
directly or via FFT depending on size; the FFT route matters because the
first two kernels span 101 and 51 samples.  Every backward pass caches what
it needs during forward, so layers are single-use per step but stateless
across steps.
"""

from __future__ import annotations

import numpy as np
from scipy import fft as sfft

from ..errors import ShapeMismatchError


def _complex_dtype(dtype) -> np.dtype:
    return np.dtype(np.complex64) if np.dtype(dtype) == np.float32 else np.dtype(np.complex128)


class Layer:
    """Base class: parameter-less layers only implement forward/backward."""

    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, gy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv1D(Layer):
    """Valid (no padding), stride-1 cross-correlation over (B, C, L) inputs."""

    # Below this kernel*length product the im2col route beats FFT setup cost.
    _FFT_MIN_WORK = 16 * 128

    def __init__(self, in_channels: int, out_channels: int, kernel: int, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.W = np.zeros((out_channels, in_channels, kernel), dtype=dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def init_weights(self, rng: np.random.Generator) -> None:
        fan_in = self.in_channels * self.kernel
        std = np.sqrt(2.0 / fan_in)
        self.W[...] = rng.standard_normal(self.W.shape) * std
        self.b[...] = 0.0

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.dW, self.db]

    def _use_fft(self, length: int) -> bool:
        return self.kernel * length >= self._FFT_MIN_WORK and self.kernel >= 8

    def forward(self, x, training=False):
        B, C, L = x.shape
        if C != self.in_channels:
            raise ShapeMismatchError(
                f"conv expected {self.in_channels} channels, got {C}"
            )
        if L < self.kernel:
            raise ShapeMismatchError(
                f"input length {L} shorter than kernel {self.kernel}"
            )
        l_out = L - self.kernel + 1
        if self._use_fft(L):
            lf = sfft.next_fast_len(L)
            xh = sfft.rfft(x, lf, axis=2)                       # (B, Ci, F)
            wh = np.conj(sfft.rfft(self.W, lf, axis=2))         # (Co, Ci, F)
            yh = np.matmul(xh.transpose(2, 0, 1), wh.transpose(2, 1, 0))
            y = sfft.irfft(yh.transpose(1, 2, 0), lf, axis=2)[:, :, :l_out]
            self._cache = (x, xh, lf)
        else:
            win = np.lib.stride_tricks.sliding_window_view(x, self.kernel, axis=2)
            y = np.einsum("bclk,ock->bol", win, self.W, optimize=True)
            self._cache = (x, None, None)
        y = np.ascontiguousarray(y, dtype=x.dtype)
        y += self.b[:, None]
        return y

    def backward(self, gy):
        x, xh, lf = self._cache
        B, C, L = x.shape
        self.db[...] = gy.sum(axis=(0, 2))
        if xh is not None:
            gyh = sfft.rfft(gy, lf, axis=2)                     # (B, Co, F)
            # dW[o,c,k] = sum_{b,l} gy[b,o,l] x[b,c,l+k]  (correlation of x with gy)
            dwh = np.matmul(xh.transpose(2, 1, 0), np.conj(gyh).transpose(2, 0, 1))
            dw_full = sfft.irfft(dwh.transpose(2, 1, 0), lf, axis=2)
            self.dW[...] = dw_full[:, :, : self.kernel].transpose(1, 0, 2)
            # dx[b,c,j] = sum_{o,k} gy[b,o,j-k] W[o,c,k]  (full convolution)
            wh = sfft.rfft(self.W, lf, axis=2)
            dxh = np.matmul(gyh.transpose(2, 0, 1), wh.transpose(2, 0, 1))
            dx = sfft.irfft(dxh.transpose(1, 2, 0), lf, axis=2)[:, :, :L]
        else:
            win = np.lib.stride_tricks.sliding_window_view(x, self.kernel, axis=2)
            self.dW[...] = np.einsum("bclk,bol->ock", win, gy, optimize=True)
            pad = self.kernel - 1
            gp = np.pad(gy, ((0, 0), (0, 0), (pad, pad)))
            gwin = np.lib.stride_tricks.sliding_window_view(gp, self.kernel, axis=2)
            dx = np.einsum("bolk,ock->bcl", gwin, self.W[:, :, ::-1], optimize=True)
        return np.ascontiguousarray(dx, dtype=x.dtype)


class ReLU(Layer):
    def forward(self, x, training=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, gy):
        return np.where(self._mask, gy, 0)


class MaxPool1D(Layer):
    """Non-overlapping max pooling with stride == size; remainder samples at
    the end are dropped (floor division)."""

    def __init__(self, size: int):
        if size < 1:
            raise ValueError(f"pool size must be >= 1, got {size}")
        self.size = size

    def forward(self, x, training=False):
        B, C, L = x.shape
        l_out = L // self.size
        if l_out < 1:
            raise ShapeMismatchError(f"length {L} too short for pool size {self.size}")
        blocks = x[:, :, : l_out * self.size].reshape(B, C, l_out, self.size)
        self._argmax = blocks.argmax(axis=3)
        self._in_shape = x.shape
        return np.take_along_axis(blocks, self._argmax[..., None], axis=3)[..., 0]

    def backward(self, gy):
        B, C, L = self._in_shape
        l_out = L // self.size
        dx = np.zeros((B, C, L), dtype=gy.dtype)
        blocks = dx[:, :, : l_out * self.size].reshape(B, C, l_out, self.size)
        np.put_along_axis(blocks, self._argmax[..., None], gy[..., None], axis=3)
        return dx


class Flatten(Layer):
    def forward(self, x, training=False):
        self._in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, gy):
        return gy.reshape(self._in_shape)


class Dense(Layer):
    def __init__(self, in_features: int, out_features: int, dtype=np.float32):
        self.in_features = in_features
        self.out_features = out_features
        self.W = np.zeros((in_features, out_features), dtype=dtype)
        self.b = np.zeros(out_features, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)

    def init_weights(self, rng: np.random.Generator) -> None:
        std = np.sqrt(2.0 / self.in_features)
        self.W[...] = rng.standard_normal(self.W.shape) * std
        self.b[...] = 0.0

    def params(self):
        return [self.W, self.b]

    def grads(self):
        return [self.dW, self.db]

    def forward(self, x, training=False):
        if x.shape[1] != self.in_features:
            raise ShapeMismatchError(
                f"dense expected {self.in_features} features, got {x.shape[1]}"
            )
        self._x = x
        return x @ self.W + self.b

    def backward(self, gy):
        self.dW[...] = self._x.T @ gy
        self.db[...] = gy.sum(axis=0)
        return gy @ self.W.T


class Dropout(Layer):
    """Inverted dropout after dense layers; inactive at rate 0 or inference."""

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
        self.rate = rate
        self.rng: np.random.Generator | None = None
        self._mask = None

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        if self.rng is None:
            raise RuntimeError("dropout needs an RNG bound before training")
        keep = 1.0 - self.rate
        self._mask = (self.rng.random(x.shape) < keep).astype(x.dtype) / keep
        return x * self._mask

    def backward(self, gy):
        if self._mask is None:
            return gy
        return gy * self._mask


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, onehot: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy and its gradient w.r.t. the logits."""
    if logits.shape != onehot.shape:
        raise ShapeMismatchError(
            f"logits shape {logits.shape} != labels shape {onehot.shape}"
        )
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(lse - (z * onehot).sum(axis=1)))
    p = softmax(logits)
    grad = (p - onehot).astype(logits.dtype) / logits.shape[0]
    return loss, grad
