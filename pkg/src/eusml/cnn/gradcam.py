"""Grad-CAM heatmaps and pseudo-color overlays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..imaging import ImageBuffer, resize_bilinear, to_grayscale
from .model import ToyCnn


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Non-negative class-activation map at feature-map resolution,
    max-normalized to 1 unless identically zero."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise ValueError("heatmap values shape mismatch")

    def upsample(self, out_h: int, out_w: int) -> np.ndarray:
        return resize_bilinear(self.values, out_h, out_w)


def grad_cam(
    model: ToyCnn, x: np.ndarray, target_class: int, layer: str = "conv3"
) -> Heatmap:
    """Gradient-weighted class activation map for one input.

    Channel weights are the spatial means of d(target logit)/d(activation);
    the heatmap is the ReLU of the weighted activation sum, max-normalized.
    """
    if x.ndim == 3:
        x = x[None]
    if x.shape[0] != 1:
        raise ValueError("grad_cam explains a single input at a time")
    logits, cache = model.forward(x)
    k = logits.shape[1]
    if not 0 <= target_class < k:
        raise ValueError(f"target_class must be in [0, {k}), got {target_class}")
    if layer not in cache:
        raise ValueError(f"unknown conv layer {layer!r}; expected one of {tuple(cache)}")
    activation = cache[layer][0]  # (C, h, w)
    seed = np.zeros_like(logits)
    seed[0, target_class] = 1.0
    grads = model.backward_to_activation(seed, layer)[0]
    alphas = grads.mean(axis=(1, 2))
    cam = np.maximum(0.0, np.einsum("c,chw->hw", alphas, activation))
    peak = cam.max()
    if peak > 0:
        cam = cam / peak
    return Heatmap(width=cam.shape[1], height=cam.shape[0], values=cam)


def overlay(heatmap: Heatmap, image: ImageBuffer, alpha: float = 0.4) -> ImageBuffer:
    """Alpha-blend a blue-to-red rendering of the heatmap over the grayscale image."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    values = heatmap.upsample(image.height, image.width)
    values = np.clip(values, 0.0, 1.0)
    gray = to_grayscale(image).data[:, :, 0].astype(np.float64)
    color = np.stack(
        [255.0 * values, np.zeros_like(values), 255.0 * (1.0 - values)], axis=-1
    )
    blended = (1.0 - alpha) * gray[:, :, None] + alpha * color
    out = np.floor(np.clip(blended, 0, 255) + 0.5).astype(np.uint8)
    return ImageBuffer(image.width, image.height, 3, out)
