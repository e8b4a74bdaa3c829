"""Frame cleaning: 1-FPS sampling, noise classification, pointer inpainting.

A frame stream passes through four ordered checks (blackened, pink, gui,
green pointer); gui/pink/blackened frames are dropped, green-pointer frames
are repaired by diffusion inpainting, everything else flows through.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from scipy import ndimage

from .imaging import (
    ChannelHistograms,
    ImageBuffer,
    compute_histogram,
    hist_bhattacharyya,
    hist_intersection,
    mean_intensity,
    read_png,
    write_png,
)

VERDICT_KINDS = ("clean", "gui", "pink", "blackened", "green_pointer")

_CROSS = ndimage.generate_binary_structure(2, 1)  # 4-connected dilation element
_EIGHT = ndimage.generate_binary_structure(2, 2)  # 8-connected components


@dataclass(frozen=True, eq=False)
class FrameSample:
    procedure_id: str
    t: float  # seconds from capture start
    image: ImageBuffer
    source_index: int

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"frame timestamp must be non-negative, got {self.t}")


@dataclass(frozen=True)
class CleaningThresholds:
    """Decision thresholds for the noise detectors.

    The intersection/Bhattacharyya pairs assume 64-bin per-channel
    probability-normalized histograms (intersection range [0, 3] for color).
    """

    pink_intersection_max: float = 1.031
    pink_bhattacharyya_min: float = 0.95
    gui_intersection_min: float = 1.42
    gui_bhattacharyya_max: float = 0.18
    black_mean_max: float = 12.0
    # green-pointer detector knobs (no published values; tuned for synthetic frames)
    pointer_green_min: float = 100.0
    pointer_dominance: float = 1.4
    pointer_min_component: int = 25
    pointer_dilate: int = 2

    def __post_init__(self):
        vals = (
            self.pink_intersection_max,
            self.pink_bhattacharyya_min,
            self.gui_intersection_min,
            self.gui_bhattacharyya_max,
            self.black_mean_max,
        )
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("thresholds must be finite")
        if not self.pink_intersection_max < self.gui_intersection_min:
            raise ValueError("pink_intersection_max must be < gui_intersection_min")


@dataclass(frozen=True)
class NoiseVerdict:
    """Classification of one frame; score fields are None when the short-circuit
    order meant that measurement was never taken."""

    kind: str
    intersection: float | None
    bhattacharyya: float | None
    mean_intensity: float
    pointer_pixels: int | None

    def __post_init__(self):
        if self.kind not in VERDICT_KINDS:
            raise ValueError(f"unknown verdict kind {self.kind!r}")


@dataclass
class CleaningReport:
    counts: dict[str, int] = field(default_factory=lambda: {k: 0 for k in VERDICT_KINDS})
    frames_in: int = 0
    frames_out: int = 0
    dropped_indices: list[int] = field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "counts": self.counts,
            "frames_in": self.frames_in,
            "frames_out": self.frames_out,
            "dropped_indices": self.dropped_indices,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def sample_frames(
    source: Iterable[FrameSample], target_fps: float = 1.0
) -> Iterator[FrameSample]:
    """Emit the first source frame at or after each multiple of 1/target_fps.

    Timestamps must be strictly increasing; each frame is emitted at most once.
    """
    if target_fps <= 0:
        raise ValueError(f"target_fps must be positive, got {target_fps}")
    period = 1.0 / target_fps
    eps = 1e-9
    next_tick = 0  # index of the next period multiple to serve
    last_t = None
    for frame in source:
        if last_t is not None and frame.t <= last_t:
            raise ValueError(
                f"non-monotonic timestamps: {frame.t} after {last_t} "
                f"(source index {frame.source_index})"
            )
        last_t = frame.t
        if frame.t >= next_tick * period - eps:
            yield frame
            next_tick = int(np.floor((frame.t + eps) / period)) + 1


def detect_green_pointer(
    img: ImageBuffer,
    *,
    green_min: float = 100.0,
    dominance: float = 1.4,
    min_component: int = 25,
    dilate: int = 2,
) -> np.ndarray:
    """Boolean mask of screen-pointer pixels.

    A pixel is flagged when G >= green_min and G dominates both R and B by
    the given ratio. The mask is dilated (4-connected, `dilate` iterations)
    and components smaller than min_component pixels are discarded.
    """
    if img.channels != 3:
        raise ValueError("green-pointer detection requires a 3-channel image")
    rgb = img.data.astype(np.float64)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    mask = (g >= green_min) & (g >= dominance * r) & (g >= dominance * b)
    if mask.any() and dilate > 0:
        mask = ndimage.binary_dilation(mask, structure=_CROSS, iterations=dilate)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    if n == 0:
        return mask
    sizes = np.bincount(labels.ravel())
    small = np.flatnonzero(sizes < min_component)
    mask[np.isin(labels, small[small > 0])] = False
    return mask


def inpaint(img: ImageBuffer, mask: np.ndarray) -> ImageBuffer:
    """Replace masked pixels by iterative 4-neighbor diffusion.

    Each masked pixel is repeatedly set to the mean of its in-bounds
    neighbors (unmasked pixels stay fixed) until the largest per-pixel change
    drops below 0.5 intensity or 500 iterations pass. Unmasked pixels are
    bit-identical to the input.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (img.height, img.width):
        raise ValueError(
            f"mask shape {mask.shape} does not match image {(img.height, img.width)}"
        )
    if not mask.any():
        return img
    if mask.all():
        raise ValueError("mask covers the entire image; nothing to diffuse from")

    work = img.data.astype(np.float64).copy()
    work[mask] = work[~mask].mean(axis=0)  # seed estimate: mean of known pixels

    h, w = img.height, img.width
    nb_count = np.full((h, w), 4.0)
    nb_count[0, :] -= 1
    nb_count[-1, :] -= 1
    nb_count[:, 0] -= 1
    nb_count[:, -1] -= 1
    nb_count_masked = nb_count[mask][:, None]

    for _ in range(500):
        padded = np.pad(work, ((1, 1), (1, 1), (0, 0)))
        nb_sum = (
            padded[:-2, 1:-1]
            + padded[2:, 1:-1]
            + padded[1:-1, :-2]
            + padded[1:-1, 2:]
        )
        new_vals = nb_sum[mask] / nb_count_masked
        delta = np.abs(new_vals - work[mask]).max()
        work[mask] = new_vals
        if delta < 0.5:
            break

    out = img.data.copy()
    out[mask] = np.floor(np.clip(work[mask], 0.0, 255.0) + 0.5).astype(np.uint8)
    return ImageBuffer(img.width, img.height, img.channels, out)


def classify_noise(
    frame: FrameSample,
    reference: ImageBuffer,
    th: CleaningThresholds,
    _ref_hist: ChannelHistograms | None = None,
) -> NoiseVerdict:
    """Apply the detector rules in order: blackened, pink, gui, green pointer, clean."""
    img = frame.image
    if img.channels != reference.channels:
        raise ValueError(
            f"frame has {img.channels} channels but reference has {reference.channels}"
        )
    mean = mean_intensity(img)
    if mean < th.black_mean_max:
        return NoiseVerdict("blackened", None, None, mean, None)

    ref_hist = _ref_hist if _ref_hist is not None else compute_histogram(reference)
    h = compute_histogram(img, ref_hist.bins_per_channel)
    inter = hist_intersection(h, ref_hist)
    bhat = hist_bhattacharyya(h, ref_hist)
    if inter <= th.pink_intersection_max and bhat >= th.pink_bhattacharyya_min:
        return NoiseVerdict("pink", inter, bhat, mean, None)
    if inter >= th.gui_intersection_min and bhat <= th.gui_bhattacharyya_max:
        return NoiseVerdict("gui", inter, bhat, mean, None)

    if img.channels == 3:
        mask = detect_green_pointer(
            img,
            green_min=th.pointer_green_min,
            dominance=th.pointer_dominance,
            min_component=th.pointer_min_component,
            dilate=th.pointer_dilate,
        )
        pixels = int(mask.sum())
        if pixels >= th.pointer_min_component:
            return NoiseVerdict("green_pointer", inter, bhat, mean, pixels)
        return NoiseVerdict("clean", inter, bhat, mean, pixels)
    return NoiseVerdict("clean", inter, bhat, mean, None)


def clean_stream(
    frames: Iterable[FrameSample],
    reference: ImageBuffer,
    th: CleaningThresholds,
) -> tuple[list[FrameSample], CleaningReport]:
    """Drop gui/pink/blackened frames, inpaint green-pointer frames, keep the rest.

    Returns the surviving frames in input order plus a report whose counts
    reconcile: frames_in = frames_out + len(dropped_indices).
    """
    ref_hist = compute_histogram(reference)
    report = CleaningReport()
    out: list[FrameSample] = []
    for i, frame in enumerate(frames):
        report.frames_in += 1
        try:
            verdict = classify_noise(frame, reference, th, _ref_hist=ref_hist)
            if verdict.kind == "green_pointer":
                mask = detect_green_pointer(
                    frame.image,
                    green_min=th.pointer_green_min,
                    dominance=th.pointer_dominance,
                    min_component=th.pointer_min_component,
                    dilate=th.pointer_dilate,
                )
                frame = replace(frame, image=inpaint(frame.image, mask))
        except ValueError as exc:
            raise ValueError(f"frame {i}: {exc}") from exc
        report.counts[verdict.kind] += 1
        if verdict.kind in ("gui", "pink", "blackened"):
            report.dropped_indices.append(i)
        else:
            out.append(frame)
    report.frames_out = len(out)
    return out, report


# ---------------------------------------------------------------------------
# Frame-source directory layout: <procedure_id>/frames/%06d.png + meta.json
# ---------------------------------------------------------------------------

def load_frame_source(proc_dir: str | Path) -> Iterator[FrameSample]:
    """Yield frames from a `<proc>/frames/%06d.png` + `meta.json` directory."""
    proc_dir = Path(proc_dir)
    meta_path = proc_dir / "meta.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"missing {meta_path}")
    meta = json.loads(meta_path.read_text())
    fps = float(meta["fps"])
    if fps <= 0:
        raise ValueError(f"fps must be positive, got {fps}")
    frames_dir = proc_dir / "frames"
    for path in sorted(frames_dir.glob("*.png")):
        idx = int(path.stem)
        yield FrameSample(
            procedure_id=proc_dir.name,
            t=idx / fps,
            image=read_png(path),
            source_index=idx,
        )


def save_frame_source(
    proc_dir: str | Path,
    images: Iterable[ImageBuffer],
    fps: float,
    capture_start: str = "1970-01-01T00:00:00Z",
) -> int:
    """Write a frame-source directory; returns the number of frames written."""
    proc_dir = Path(proc_dir)
    frames_dir = proc_dir / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    n = 0
    for i, img in enumerate(images):
        write_png(img, frames_dir / f"{i:06d}.png")
        n += 1
    meta = {"fps": fps, "capture_start": capture_start}
    (proc_dir / "meta.json").write_text(json.dumps(meta, sort_keys=True) + "\n")
    return n
