"""Pixel-raster primitives and the histogram measures the cleaning stage depends on.

Everything here is a pure function of immutable 8-bit rasters. Histograms are
per-channel and probability-normalized so that intersection scores live in
[0, channels] and Bhattacharyya distances in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

DEFAULT_BINS = 64


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """8-bit raster. ``data`` has shape (height, width, channels), dtype uint8, read-only."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"(height={self.height}, width={self.width}, channels={self.channels})"
            )
        if self.data.dtype != np.uint8:
            raise ValueError(f"data must be uint8, got {self.data.dtype}")
        self.data.setflags(write=False)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        """Build from an (H, W) or (H, W, C) array; values are cast to uint8."""
        arr = np.asarray(arr)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected 2- or 3-dimensional array, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr.astype(np.uint8, copy=True))
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr)

    def as_float(self) -> "FloatImage":
        return FloatImage(self.width, self.height, self.channels, self.data.astype(np.float64))


@dataclass(frozen=True, eq=False)
class FloatImage:
    """Real-valued raster used as the intermediate for enhancement and FFT math."""

    width: int
    height: int
    channels: int
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {self.data.shape} does not match declared dimensions"
            )

    def to_uint8(self) -> ImageBuffer:
        """Clamp to [0, 255] and quantize (round half up)."""
        out = _round_half_up(np.clip(self.data, 0.0, 255.0)).astype(np.uint8)
        return ImageBuffer(self.width, self.height, self.channels, out)


@dataclass(frozen=True, eq=False)
class ChannelHistograms:
    """Per-channel probability-normalized intensity histograms.

    ``hist`` has shape (channels, bins_per_channel); every row sums to 1.
    """

    bins_per_channel: int
    hist: np.ndarray

    @property
    def channels(self) -> int:
        return self.hist.shape[0]


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """BT.601 luma conversion; 1-channel input is returned unchanged."""
    if img.channels == 1:
        return img
    r, g, b = (img.data[:, :, i].astype(np.float64) for i in range(3))
    luma = LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
    gray = _round_half_up(luma).astype(np.uint8)
    return ImageBuffer(img.width, img.height, 1, gray[:, :, None])


def compute_histogram(img: ImageBuffer, bins: int = DEFAULT_BINS) -> ChannelHistograms:
    """Per-channel histogram with half-open bins [b*256/bins, (b+1)*256/bins).

    For integer intensities this is exactly ``bin = value * bins // 256``.
    """
    if not 1 <= bins <= 256:
        raise ValueError(f"bins must be in [1, 256], got {bins}")
    n = img.width * img.height
    hist = np.empty((img.channels, bins), dtype=np.float64)
    for c in range(img.channels):
        idx = img.data[:, :, c].astype(np.int64) * bins // 256
        hist[c] = np.bincount(idx.ravel(), minlength=bins) / n
    return ChannelHistograms(bins_per_channel=bins, hist=hist)


def _check_shapes(a: ChannelHistograms, b: ChannelHistograms) -> None:
    if a.hist.shape != b.hist.shape:
        raise ValueError(
            f"histogram shapes differ: {a.hist.shape} vs {b.hist.shape}"
        )


def hist_intersection(a: ChannelHistograms, b: ChannelHistograms) -> float:
    """Sum of per-bin minima over all channels; in [0, channels]."""
    _check_shapes(a, b)
    return float(np.minimum(a.hist, b.hist).sum())


def hist_bhattacharyya(a: ChannelHistograms, b: ChannelHistograms) -> float:
    """Mean over channels of sqrt(1 - sum(sqrt(p*q))); in [0, 1]."""
    _check_shapes(a, b)
    coeff = np.sqrt(a.hist * b.hist).sum(axis=1)
    dist = np.sqrt(np.maximum(0.0, 1.0 - coeff))
    return float(dist.mean())


def mean_intensity(img: ImageBuffer) -> float:
    """Arithmetic mean of the grayscale pixel values, in [0, 255]."""
    return float(to_grayscale(img).data.mean())


def resize_bilinear(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resampling of a 2-D float array using half-pixel-center mapping."""
    in_h, in_w = plane.shape
    plane = plane.astype(np.float64)
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    top = plane[y0][:, x0] * (1 - wx) + plane[y0][:, x1] * wx
    bot = plane[y1][:, x0] * (1 - wx) + plane[y1][:, x1] * wx
    return top * (1 - wy) + bot * wy


def read_png(path: str | Path) -> ImageBuffer:
    """Read an 8-bit PNG as a 1- or 3-channel buffer (palette/alpha collapsed to RGB)."""
    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im)
        elif im.mode == "RGB":
            arr = np.asarray(im)
        else:
            arr = np.asarray(im.convert("RGB"))
    return ImageBuffer.from_array(arr)


def write_png(img: ImageBuffer, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    Image.fromarray(arr).save(path, format="PNG")
