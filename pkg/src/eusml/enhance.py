"""The five frame-enhancement transforms, selectable by name.

Methods: none, clahe, gaussian, quantile_cap, nlm, fft_lowpass. All are pure
image->image functions; intermediate math stays in float64 and quantization
to 8 bits happens exactly once, at the output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import ImageBuffer, to_grayscale

METHODS = ("none", "clahe", "gaussian", "quantile_cap", "nlm", "fft_lowpass")


@dataclass(frozen=True)
class EnhanceConfig:
    method: str = "none"
    clahe_clip: float = 2.0
    clahe_grid: int = 8
    gaussian_sigma: float = 1.0
    gaussian_ksize: int = 5
    q_low: float = 0.01
    q_high: float = 0.99
    nlm_h: float = 10.0
    nlm_patch: int = 7
    nlm_window: int = 21
    fft_cutoff_frac: float = 0.12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown enhance method {self.method!r}; expected one of {METHODS}")
        for name in ("gaussian_ksize", "nlm_patch", "nlm_window"):
            v = getattr(self, name)
            if v < 1 or v % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 1, got {v}")
        if not 0.0 <= self.q_low < self.q_high <= 1.0:
            raise ValueError(f"require 0 <= q_low < q_high <= 1, got ({self.q_low}, {self.q_high})")
        if not 0.0 < self.fft_cutoff_frac <= 1.0:
            raise ValueError(f"fft_cutoff_frac must be in (0, 1], got {self.fft_cutoff_frac}")

    def to_dict(self) -> dict:
        d = {
            "method": self.method,
            "clahe_clip": None if math.isinf(self.clahe_clip) else self.clahe_clip,
            "clahe_grid": self.clahe_grid,
            "gaussian_sigma": self.gaussian_sigma,
            "gaussian_ksize": self.gaussian_ksize,
            "q_low": self.q_low,
            "q_high": self.q_high,
            "nlm_h": self.nlm_h,
            "nlm_patch": self.nlm_patch,
            "nlm_window": self.nlm_window,
            "fft_cutoff_frac": self.fft_cutoff_frac,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnhanceConfig":
        d = dict(d)
        if d.get("clahe_clip") is None:
            d["clahe_clip"] = math.inf
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown enhance config keys: {sorted(unknown)}")
        return cls(**d)


# ---------------------------------------------------------------------------
# CLAHE
# ---------------------------------------------------------------------------

def _equalization_lut(hist: np.ndarray, total: int) -> np.ndarray:
    cdf = np.cumsum(hist) / total
    return np.floor(255.0 * cdf + 0.5)


def _clipped_hist(hist: np.ndarray, clip: float, tile_pixels: int) -> np.ndarray:
    if math.isinf(clip):
        return hist.astype(np.float64)
    limit = clip * tile_pixels / 256.0
    clipped = np.minimum(hist, limit).astype(np.float64)
    excess = hist.sum() - clipped.sum()
    return clipped + excess / 256.0


def clahe(img: ImageBuffer, clip: float = 2.0, grid: int = 8) -> ImageBuffer:
    """Contrast-limited adaptive histogram equalization on the luminance channel.

    The image is divided into grid x grid tiles; each tile's 256-bin histogram
    is clipped at clip * (tile_pixels / 256) with the excess redistributed
    uniformly, and the per-tile equalization mappings are blended bilinearly
    between the four nearest tile centers. With grid=1 and clip=inf this
    reduces to plain global histogram equalization.

    For color images the mapping is computed on BT.601 luminance and each
    channel is rescaled by the luminance ratio.
    """
    if grid < 1 or grid > img.height or grid > img.width:
        raise ValueError(
            f"grid {grid} out of range for a {img.width}x{img.height} image"
        )
    if clip <= 0:
        raise ValueError(f"clip must be positive, got {clip}")

    gray = to_grayscale(img).data[:, :, 0]
    h, w = gray.shape

    edges_y = [round(i * h / grid) for i in range(grid + 1)]
    edges_x = [round(i * w / grid) for i in range(grid + 1)]
    centers_y = np.array([(edges_y[i] + edges_y[i + 1] - 1) / 2 for i in range(grid)])
    centers_x = np.array([(edges_x[i] + edges_x[i + 1] - 1) / 2 for i in range(grid)])

    luts = np.empty((grid, grid, 256))
    for ty in range(grid):
        for tx in range(grid):
            tile = gray[edges_y[ty]:edges_y[ty + 1], edges_x[tx]:edges_x[tx + 1]]
            hist = np.bincount(tile.ravel(), minlength=256)
            luts[ty, tx] = _equalization_lut(_clipped_hist(hist, clip, tile.size), tile.size)

    ys = np.arange(h, dtype=np.float64)
    xs = np.arange(w, dtype=np.float64)
    iy0 = np.clip(np.searchsorted(centers_y, ys, side="right") - 1, 0, grid - 1)
    ix0 = np.clip(np.searchsorted(centers_x, xs, side="right") - 1, 0, grid - 1)
    iy1 = np.minimum(iy0 + 1, grid - 1)
    ix1 = np.minimum(ix0 + 1, grid - 1)
    span_y = np.where(iy1 > iy0, centers_y[iy1] - centers_y[iy0], 1.0)
    span_x = np.where(ix1 > ix0, centers_x[ix1] - centers_x[ix0], 1.0)
    wy = np.clip((ys - centers_y[iy0]) / span_y, 0.0, 1.0)
    wx = np.clip((xs - centers_x[ix0]) / span_x, 0.0, 1.0)

    gy0 = np.broadcast_to(iy0[:, None], (h, w))
    gy1 = np.broadcast_to(iy1[:, None], (h, w))
    gx0 = np.broadcast_to(ix0[None, :], (h, w))
    gx1 = np.broadcast_to(ix1[None, :], (h, w))
    v = gray.astype(np.int64)
    m00 = luts[gy0, gx0, v]
    m01 = luts[gy0, gx1, v]
    m10 = luts[gy1, gx0, v]
    m11 = luts[gy1, gx1, v]
    wyc = wy[:, None]
    wxc = wx[None, :]
    mapped = (
        (1 - wyc) * (1 - wxc) * m00
        + (1 - wyc) * wxc * m01
        + wyc * (1 - wxc) * m10
        + wyc * wxc * m11
    )

    if img.channels == 1:
        out = np.floor(np.clip(mapped, 0, 255) + 0.5).astype(np.uint8)[:, :, None]
        return ImageBuffer(img.width, img.height, 1, out)

    # color: scale channels by the luminance ratio, gray where luminance is 0
    gray_f = gray.astype(np.float64)
    ratio = np.where(gray_f > 0, mapped / np.maximum(gray_f, 1e-12), 0.0)
    scaled = img.data.astype(np.float64) * ratio[:, :, None]
    scaled[gray == 0] = mapped[gray == 0, None]
    out = np.floor(np.clip(scaled, 0, 255) + 0.5).astype(np.uint8)
    return ImageBuffer(img.width, img.height, 3, out)


def global_hist_equalize(img: ImageBuffer) -> ImageBuffer:
    """Plain global histogram equalization (the textbook mapping CLAHE reduces to)."""
    return clahe(img, clip=math.inf, grid=1)


# ---------------------------------------------------------------------------
# Gaussian smoothing
# ---------------------------------------------------------------------------

def _gaussian_kernel_1d(sigma: float, ksize: int) -> np.ndarray:
    x = np.arange(ksize, dtype=np.float64) - ksize // 2
    k = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def gaussian_kernel_2d(sigma: float, ksize: int) -> np.ndarray:
    """Sampled exp(-(x^2+y^2)/(2 sigma^2)) kernel, normalized to sum 1."""
    x = np.arange(ksize, dtype=np.float64) - ksize // 2
    xx, yy = np.meshgrid(x, x)
    k = np.exp(-(xx ** 2 + yy ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


def gaussian_smooth(img: ImageBuffer, sigma: float = 1.0, ksize: int = 5) -> ImageBuffer:
    """Per-channel convolution with a normalized Gaussian kernel, reflect borders."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if ksize < 1 or ksize % 2 == 0:
        raise ValueError(f"ksize must be odd and >= 1, got {ksize}")
    k1 = _gaussian_kernel_1d(sigma, ksize)
    pad = ksize // 2
    out = np.empty_like(img.data)
    for c in range(img.channels):
        plane = img.data[:, :, c].astype(np.float64)
        padded = np.pad(plane, pad, mode="symmetric")
        h, w = plane.shape
        tmp = np.zeros((h, w + 2 * pad))
        for i in range(ksize):
            tmp += k1[i] * padded[i:i + h, :]
        res = np.zeros((h, w))
        for j in range(ksize):
            res += k1[j] * tmp[:, j:j + w]
        out[:, :, c] = np.floor(np.clip(res, 0, 255) + 0.5).astype(np.uint8)
    return ImageBuffer(img.width, img.height, img.channels, out)


# ---------------------------------------------------------------------------
# Quantile capping
# ---------------------------------------------------------------------------

def _nearest_rank(sorted_vals: np.ndarray, q: float) -> float:
    n = sorted_vals.size
    idx = min(n - 1, max(0, math.ceil(q * n) - 1))
    return float(sorted_vals[idx])


def quantile_cap(img: ImageBuffer, q_low: float = 0.01, q_high: float = 0.99) -> ImageBuffer:
    """Clamp each channel to its nearest-rank [q_low, q_high] quantiles and
    rescale linearly to [0, 255]; a constant channel passes through unchanged."""
    if not 0.0 <= q_low < q_high <= 1.0:
        raise ValueError(f"require 0 <= q_low < q_high <= 1, got ({q_low}, {q_high})")
    out = np.empty_like(img.data)
    for c in range(img.channels):
        plane = img.data[:, :, c]
        sorted_vals = np.sort(plane, axis=None)
        v_low = _nearest_rank(sorted_vals, q_low)
        v_high = _nearest_rank(sorted_vals, q_high)
        if v_low == v_high:
            out[:, :, c] = plane
            continue
        scaled = (np.clip(plane.astype(np.float64), v_low, v_high) - v_low) / (v_high - v_low)
        out[:, :, c] = np.floor(scaled * 255.0 + 0.5).astype(np.uint8)
    return ImageBuffer(img.width, img.height, img.channels, out)


# ---------------------------------------------------------------------------
# Non-local means
# ---------------------------------------------------------------------------

_LAPLACIAN = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])


def estimate_noise_sigma(plane: np.ndarray) -> float:
    """Robust noise estimate: median absolute deviation of the Laplacian response.

    For i.i.d. Gaussian noise the 4-neighbor Laplacian response has variance
    20 sigma^2, and MAD/0.6745 estimates its std, hence the denominator.
    """
    padded = np.pad(plane.astype(np.float64), 1, mode="symmetric")
    lap = (
        padded[:-2, 1:-1] + padded[2:, 1:-1] + padded[1:-1, :-2] + padded[1:-1, 2:]
        - 4.0 * padded[1:-1, 1:-1]
    )
    return float(np.median(np.abs(lap)) / (0.6745 * math.sqrt(20.0)))


def _box_sum(arr: np.ndarray, k: int) -> np.ndarray:
    """Valid-mode k x k box sums via a summed-area table."""
    sat = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1))
    sat[1:, 1:] = arr.cumsum(axis=0).cumsum(axis=1)
    return sat[k:, k:] - sat[:-k, k:] - sat[k:, :-k] + sat[:-k, :-k]


def _nlm_plane(plane: np.ndarray, h: float, patch: int, window: int) -> np.ndarray:
    height, width = plane.shape
    pr = patch // 2
    wr = window // 2
    big = wr + pr
    padded = np.pad(plane, big, mode="symmetric")
    n_patch = patch * patch
    sigma = estimate_noise_sigma(plane)
    noise_floor = 2.0 * sigma * sigma
    h2 = h * h

    accum = np.zeros((height, width))
    wsum = np.zeros((height, width))
    base = padded[wr:wr + height + 2 * pr, wr:wr + width + 2 * pr]
    for oy in range(-wr, wr + 1):
        for ox in range(-wr, wr + 1):
            shifted = padded[wr + oy:wr + oy + height + 2 * pr, wr + ox:wr + ox + width + 2 * pr]
            d2 = _box_sum((base - shifted) ** 2, patch) / n_patch
            w = np.exp(-np.maximum(0.0, d2 - noise_floor) / h2)
            accum += w * padded[big + oy:big + oy + height, big + ox:big + ox + width]
            wsum += w
    return accum / wsum


def nlm_denoise(img: ImageBuffer, h: float = 10.0, patch: int = 7, window: int = 21) -> ImageBuffer:
    """Non-local means: each pixel becomes a patch-similarity-weighted average
    over its search window. The patch distance is the mean squared difference
    with the estimated noise variance (2 sigma^2) subtracted before weighting."""
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    for name, v in (("patch", patch), ("window", window)):
        if v < 1 or v % 2 == 0:
            raise ValueError(f"{name} must be odd and >= 1, got {v}")
    if window < patch:
        raise ValueError(f"search window ({window}) smaller than patch ({patch})")
    out = np.empty_like(img.data)
    for c in range(img.channels):
        res = _nlm_plane(img.data[:, :, c].astype(np.float64), h, patch, window)
        out[:, :, c] = np.floor(np.clip(res, 0, 255) + 0.5).astype(np.uint8)
    return ImageBuffer(img.width, img.height, img.channels, out)


# ---------------------------------------------------------------------------
# FFT low-pass
# ---------------------------------------------------------------------------

def _fft_filter_plane(plane: np.ndarray, d0: float | None) -> np.ndarray:
    """Centered 2D FFT, optional Gaussian low-pass mask, inverse transform.

    d0=None applies no mask (pure round trip). Returns the real part without
    quantization.
    """
    spectrum = np.fft.fftshift(np.fft.fft2(plane))
    if d0 is not None:
        h, w = plane.shape
        cy, cx = h // 2, w // 2  # DC position after fftshift
        yy = (np.arange(h) - cy)[:, None]
        xx = (np.arange(w) - cx)[None, :]
        mask = np.exp(-(yy ** 2 + xx ** 2) / (2.0 * d0 * d0))
        spectrum = spectrum * mask
    return np.real(np.fft.ifft2(np.fft.ifftshift(spectrum)))


def fft_lowpass(img: ImageBuffer, cutoff_frac: float = 0.12) -> ImageBuffer:
    """Per-channel Gaussian low-pass in the frequency domain.

    The mask is H(u,v) = exp(-D^2 / (2 D0^2)) with D measured in bins from the
    centered DC component and D0 = cutoff_frac * min(height, width); the DC
    gain is exactly 1.
    """
    if not 0.0 < cutoff_frac <= 1.0:
        raise ValueError(f"cutoff_frac must be in (0, 1], got {cutoff_frac}")
    d0 = cutoff_frac * min(img.height, img.width)
    out = np.empty_like(img.data)
    for c in range(img.channels):
        res = _fft_filter_plane(img.data[:, :, c].astype(np.float64), d0)
        out[:, :, c] = np.floor(np.clip(res, 0, 255) + 0.5).astype(np.uint8)
    return ImageBuffer(img.width, img.height, img.channels, out)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def apply(img: ImageBuffer, cfg: EnhanceConfig) -> ImageBuffer:
    """Run the transform named by cfg.method; method "none" is the identity."""
    if cfg.method == "none":
        return img
    if cfg.method == "clahe":
        return clahe(img, cfg.clahe_clip, cfg.clahe_grid)
    if cfg.method == "gaussian":
        return gaussian_smooth(img, cfg.gaussian_sigma, cfg.gaussian_ksize)
    if cfg.method == "quantile_cap":
        return quantile_cap(img, cfg.q_low, cfg.q_high)
    if cfg.method == "nlm":
        return nlm_denoise(img, cfg.nlm_h, cfg.nlm_patch, cfg.nlm_window)
    if cfg.method == "fft_lowpass":
        return fft_lowpass(img, cfg.fft_cutoff_frac)
    raise ValueError(f"unknown enhance method {cfg.method!r}")
