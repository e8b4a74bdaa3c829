"""From-scratch network layers (float64, NCHW) with explicit backward passes."""

from __future__ import annotations

import numpy as np


class Conv2D:
    """Stride-1 convolution with same padding, implemented via im2col."""

    def __init__(self, in_ch: int, out_ch: int, ksize: int, rng: np.random.Generator):
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.ksize = ksize
        scale = np.sqrt(2.0 / (in_ch * ksize * ksize))  # He init
        self.w = rng.normal(0.0, scale, size=(out_ch, in_ch, ksize, ksize))
        self.b = np.zeros(out_ch)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)
        self._cols = None
        self._in_shape = None

    def _im2col(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        k = self.ksize
        pad = k // 2
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        cols = np.empty((n, c * k * k, h * w))
        idx = 0
        for ci in range(c):
            for i in range(k):
                for j in range(k):
                    cols[:, idx, :] = padded[:, ci, i:i + h, j:j + w].reshape(n, h * w)
                    idx += 1
        return cols

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        if c != self.in_ch:
            raise ValueError(f"expected {self.in_ch} input channels, got {c}")
        cols = self._im2col(x)
        self._cols = cols
        self._in_shape = x.shape
        w_mat = self.w.reshape(self.out_ch, -1)
        out = np.matmul(w_mat[None, :, :], cols) + self.b[None, :, None]
        return out.reshape(n, self.out_ch, h, w)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        n, c, h, w = self._in_shape
        k = self.ksize
        pad = k // 2
        go = grad_out.reshape(n, self.out_ch, h * w)
        self.gb = go.sum(axis=(0, 2))
        self.gw = (
            np.matmul(go, self._cols.transpose(0, 2, 1))
            .sum(axis=0)
            .reshape(self.w.shape)
        )
        w_mat = self.w.reshape(self.out_ch, -1)
        gcols = np.matmul(w_mat.T[None, :, :], go)  # (n, c*k*k, h*w)
        gpad = np.zeros((n, c, h + 2 * pad, w + 2 * pad))
        idx = 0
        for ci in range(c):
            for i in range(k):
                for j in range(k):
                    gpad[:, ci, i:i + h, j:j + w] += gcols[:, idx, :].reshape(n, h, w)
                    idx += 1
        return gpad[:, :, pad:pad + h, pad:pad + w]

    def params(self):
        return [("w", self.w, self.gw), ("b", self.b, self.gb)]


class ReLU:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * self._mask


class MaxPool2:
    """2x2 max pooling, stride 2; gradients route to exactly one (the first)
    maximal position per window."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ValueError(f"pooling needs even spatial dims, got {h}x{w}")
        windows = (
            x.reshape(n, c, h // 2, 2, w // 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h // 2, w // 2, 4)
        )
        self._argmax = windows.argmax(axis=-1)
        self._in_shape = x.shape
        return np.take_along_axis(windows, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        n, c, h, w = self._in_shape
        scattered = np.zeros((n, c, h // 2, w // 2, 4))
        np.put_along_axis(scattered, self._argmax[..., None], grad_out[..., None], axis=-1)
        return (
            scattered.reshape(n, c, h // 2, w // 2, 2, 2)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )


class GlobalAvgPool:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._in_shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        n, c, h, w = self._in_shape
        return np.broadcast_to(grad_out[:, :, None, None], (n, c, h, w)) / (h * w)


class Dense:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        scale = np.sqrt(2.0 / in_dim)
        self.w = rng.normal(0.0, scale, size=(in_dim, out_dim))
        self.b = np.zeros(out_dim)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        self.gw = self._x.T @ grad_out
        self.gb = grad_out.sum(axis=0)
        return grad_out @ self.w.T

    def params(self):
        return [("w", self.w, self.gw), ("b", self.b, self.gb)]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy loss and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    probs = softmax(logits)
    eps = 1e-300  # guards log(0) for saturated wrong-class rows
    loss = float(-np.log(probs[np.arange(n), labels] + eps).mean())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n
