"""The desk-scale convolutional classifier.

conv(3x3, 8) -> relu -> maxpool(2) -> conv(3x3, 16) -> relu -> maxpool(2)
-> conv(3x3, 32) -> relu -> global-average-pool -> dense(32 -> k) -> softmax.

Per-conv ReLU outputs are cached on every forward pass so Grad-CAM can read
them back; parameter count stays well under 10^5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import NormStats
from .layers import Conv2D, Dense, GlobalAvgPool, MaxPool2, ReLU, softmax

CONV_LAYERS = ("conv1", "conv2", "conv3")


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")

    def to_dict(self) -> dict:
        return {
            "lr": self.lr,
            "momentum": self.momentum,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


class ToyCnn:
    def __init__(self, num_classes: int, seed: int = 0, in_channels: int = 1):
        if num_classes < 2:
            raise ValueError(f"need >= 2 classes, got {num_classes}")
        self.num_classes = num_classes
        self.in_channels = in_channels
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.conv1 = Conv2D(in_channels, 8, 3, rng)
        self.conv2 = Conv2D(8, 16, 3, rng)
        self.conv3 = Conv2D(16, 32, 3, rng)
        self.dense = Dense(32, num_classes, rng)
        self.relu1, self.relu2, self.relu3 = ReLU(), ReLU(), ReLU()
        self.pool1, self.pool2 = MaxPool2(), MaxPool2()
        self.gap = GlobalAvgPool()
        self.norm_stats: NormStats | None = None

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """Return (logits, cache); cache holds each conv block's ReLU output."""
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(
                f"expected input of shape (N, {self.in_channels}, H, W), got {x.shape}"
            )
        a1 = self.relu1.forward(self.conv1.forward(x))
        p1 = self.pool1.forward(a1)
        a2 = self.relu2.forward(self.conv2.forward(p1))
        p2 = self.pool2.forward(a2)
        a3 = self.relu3.forward(self.conv3.forward(p2))
        pooled = self.gap.forward(a3)
        logits = self.dense.forward(pooled)
        return logits, {"conv1": a1, "conv2": a2, "conv3": a3}

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        """Full backward pass; fills each layer's parameter gradients and
        returns the gradient w.r.t. the network input."""
        g = self.gap.backward(self.dense.backward(grad_logits))
        g = self.conv3.backward(self.relu3.backward(g))
        g = self.pool2.backward(g)
        g = self.conv2.backward(self.relu2.backward(g))
        g = self.pool1.backward(g)
        return self.conv1.backward(self.relu1.backward(g))

    def backward_to_activation(self, grad_logits: np.ndarray, layer: str) -> np.ndarray:
        """Gradient of the given logit combination w.r.t. a cached conv
        activation (the conv block's ReLU output)."""
        if layer not in CONV_LAYERS:
            raise ValueError(f"unknown conv layer {layer!r}; expected one of {CONV_LAYERS}")
        g = self.gap.backward(self.dense.backward(grad_logits))
        if layer == "conv3":
            return g
        g = self.conv3.backward(self.relu3.backward(g))
        g = self.pool2.backward(g)
        if layer == "conv2":
            return g
        g = self.conv2.backward(self.relu2.backward(g))
        g = self.pool1.backward(g)
        return g

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits, _ = self.forward(x)
        return softmax(logits)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Argmax class per row; ties break toward the lowest class index."""
        logits, _ = self.forward(x)
        return logits.argmax(axis=1)

    def parameters(self) -> list[tuple[str, np.ndarray, np.ndarray]]:
        """(name, value, gradient) for every trainable tensor, in fixed order."""
        out = []
        for lname in ("conv1", "conv2", "conv3", "dense"):
            layer = getattr(self, lname)
            for pname, value, grad in layer.params():
                out.append((f"{lname}.{pname}", value, grad))
        return out

    def param_count(self) -> int:
        return sum(v.size for _, v, _ in self.parameters())
