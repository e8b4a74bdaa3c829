"""Synthetic corpora: station-textured frames, planted noise frames, and the
quadrant dataset for the Grad-CAM experiment.

The clinical recordings are not redistributable, so every experiment and test
in this repo runs on constructions from this module. Noise frames are planted
to *satisfy the detector definitions by measurement*: each generator checks
the produced frame against the histogram/intensity zones it is supposed to
occupy and raises if a construction drifts.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Station, StationInterval, write_labels_csv
from .imaging import (
    ImageBuffer,
    compute_histogram,
    hist_bhattacharyya,
    hist_intersection,
    mean_intensity,
    write_png,
)
from .pipeline import FrameSample, detect_green_pointer, save_frame_source

FRAME_SIZE = 64


def _gray3(plane: np.ndarray) -> ImageBuffer:
    plane = np.clip(plane, 0, 255)
    return ImageBuffer.from_array(np.repeat(plane[:, :, None], 3, axis=2))


def station_frame(station: Station, rng: np.random.Generator, size: int = FRAME_SIZE) -> ImageBuffer:
    """A texture distinct per station: vertical stripes, horizontal stripes,
    or a centered disk, with per-frame jitter. Intensities stay in the
    mid-range so frames land in neither the blackened nor the pink/gui
    histogram zones."""
    ys, xs = np.mgrid[0:size, 0:size]
    phase = rng.uniform(0, 2 * np.pi)
    base = rng.uniform(80, 110)
    amp = rng.uniform(25, 35)
    if station is Station.S1:
        plane = base + amp * np.sin(2 * np.pi * xs / 8.0 + phase)
    elif station is Station.S2:
        plane = base + amp * np.sin(2 * np.pi * ys / 8.0 + phase)
    else:
        r = np.hypot(ys - size / 2, xs - size / 2)
        plane = base + amp * np.cos(2 * np.pi * r / 12.0 + phase)
    plane = plane + rng.normal(0, 6, size=(size, size))
    return _gray3(np.clip(plane, 28, 155))


def reference_gui(size: int = FRAME_SIZE) -> ImageBuffer:
    """Deterministic stand-in for the endoscopy machine's GUI template frame.

    Every value sits on a 64-bin histogram-bin center (2 mod 4) so that the
    sub-bin pixel noise of a live GUI capture cannot move histogram mass."""
    img = np.full((size, size, 3), 38.0)
    img[: size // 8, :] = (122, 98, 62)            # header bar
    img[-size // 8 :, :] = (62, 98, 122)           # footer bar
    img[size // 8 : -size // 8, : size // 6] = (98, 122, 98)  # side panel
    ys, xs = np.mgrid[0:size, 0:size]
    center = (
        102 + 28 * np.sin(2 * np.pi * xs / 9.0) * np.cos(2 * np.pi * ys / 11.0)
    )
    region = (slice(size // 8, -size // 8), slice(size // 6, None))
    for c in range(3):
        img[region[0], region[1], c] = center[region]
    img = 4.0 * np.floor(np.clip(img, 0, 155) / 4.0) + 2.0
    return ImageBuffer.from_array(img)


def gui_frame(reference: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
    """A near-copy of the reference (high intersection, low distance)."""
    noise = np.clip(rng.normal(0, 0.8, reference.data.shape), -1.9, 1.9)
    img = ImageBuffer.from_array(np.clip(reference.data.astype(np.float64) + noise, 0, 255))
    _assert_zone(img, reference, "gui")
    return img


def pink_frame(reference: ImageBuffer, rng: np.random.Generator, size: int = FRAME_SIZE) -> ImageBuffer:
    """Saturated pink (white-light artifact): histograms disjoint from the
    reference so intersection is tiny and distance near 1."""
    plane = np.empty((size, size, 3))
    plane[:, :, 0] = 243 + rng.normal(0, 2, (size, size))
    plane[:, :, 1] = 22 + rng.normal(0, 1, (size, size))
    plane[:, :, 2] = 198 + rng.normal(0, 2, (size, size))
    img = ImageBuffer.from_array(np.clip(plane, 0, 255))
    _assert_zone(img, reference, "pink")
    return img


def blackened_frame(rng: np.random.Generator, size: int = FRAME_SIZE) -> ImageBuffer:
    plane = rng.uniform(0, 9, size=(size, size))
    img = _gray3(plane)
    assert mean_intensity(img) < 12.0
    return img


def pointer_frame(
    station: Station, reference: ImageBuffer, rng: np.random.Generator, size: int = FRAME_SIZE
) -> tuple[ImageBuffer, np.ndarray]:
    """A clean station frame with a green pointer blob; returns (frame, blob mask)."""
    base = station_frame(station, rng, size)
    data = base.data.copy()
    side = int(rng.integers(6, 10))
    y0 = int(rng.integers(4, size - side - 4))
    x0 = int(rng.integers(4, size - side - 4))
    data[y0 : y0 + side, x0 : x0 + side] = (30, 205, 40)
    img = ImageBuffer(size, size, 3, data)
    blob = np.zeros((size, size), dtype=bool)
    blob[y0 : y0 + side, x0 : x0 + side] = True
    mask = detect_green_pointer(img)
    assert mask.sum() >= 25, "constructed pointer blob did not survive detection"
    _assert_zone(img, reference, "clean")
    return img, blob


def clean_frame(station: Station, reference: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
    img = station_frame(station, rng)
    _assert_zone(img, reference, "clean")
    return img


def _assert_zone(img: ImageBuffer, reference: ImageBuffer, zone: str) -> None:
    """Check by measurement that a constructed frame occupies its intended
    detector zone (construction failed loudly otherwise)."""
    ref_hist = compute_histogram(reference)
    h = compute_histogram(img)
    inter = hist_intersection(h, ref_hist)
    bhat = hist_bhattacharyya(h, ref_hist)
    mean = mean_intensity(img)
    if zone == "gui":
        ok = inter >= 1.42 and bhat <= 0.18 and mean >= 12
    elif zone == "pink":
        ok = inter <= 1.031 and bhat >= 0.95 and mean >= 12
    elif zone == "clean":
        ok = 0.18 < bhat < 0.95 and mean >= 12
    else:
        raise ValueError(zone)
    if not ok:
        raise AssertionError(
            f"constructed {zone} frame measured inter={inter:.3f} "
            f"bhat={bhat:.3f} mean={mean:.1f}"
        )


def build_noise_corpus(
    n: int, seed: int = 0
) -> tuple[list[FrameSample], list[str], ImageBuffer]:
    """n frames with planted verdicts in a deterministic shuffled order.

    Roughly 60% clean and 10% of each noise kind. Returns (frames, planted
    verdict kinds, reference image).
    """
    rng = np.random.default_rng(seed)
    reference = reference_gui()
    kinds = (["clean"] * (n - 4 * (n // 10))
             + ["gui"] * (n // 10) + ["pink"] * (n // 10)
             + ["blackened"] * (n // 10) + ["green_pointer"] * (n // 10))
    order = rng.permutation(len(kinds))
    frames: list[FrameSample] = []
    planted: list[str] = []
    stations = list(Station)
    for i, pos in enumerate(order):
        kind = kinds[pos]
        station = stations[int(rng.integers(0, 3))]
        if kind == "clean":
            img = clean_frame(station, reference, rng)
        elif kind == "gui":
            img = gui_frame(reference, rng)
        elif kind == "pink":
            img = pink_frame(reference, rng)
        elif kind == "blackened":
            img = blackened_frame(rng)
        else:
            img, _ = pointer_frame(station, reference, rng)
        frames.append(FrameSample("noise_corpus", float(i), img, i))
        planted.append(kind)
    return frames, planted, reference


# ---------------------------------------------------------------------------
# full corpus on disk (for the CLI pipeline)
# ---------------------------------------------------------------------------

def write_synthetic_corpus(
    root: str | Path,
    n_procedures: int = 4,
    fps: float = 3.0,
    seconds_per_station: float = 10.0,
    seed: int = 0,
) -> dict[str, Path]:
    """Write a frames_root/labels/reference triple ready for the pipeline.

    Each procedure visits Station1..3 back to back with a little unlabeled
    tail, and a few noise frames are planted inside the stream.
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    reference = reference_gui()
    frames_root = root / "frames"
    labels_dir = root / "labels"
    labels_dir.mkdir(parents=True, exist_ok=True)
    ref_path = root / "reference.png"
    write_png(reference, ref_path)

    n_frames = int(3 * seconds_per_station * fps)
    for p in range(n_procedures):
        proc = f"proc{p:03d}"
        intervals = [
            StationInterval(s, i * seconds_per_station, (i + 1) * seconds_per_station)
            for i, s in enumerate(Station)
        ]
        noise_at = set(rng.choice(np.arange(2, n_frames), size=4, replace=False).tolist())
        images = []
        for idx in range(n_frames):
            t = idx / fps
            station = next((iv.station for iv in intervals if iv.contains(t)), Station.S3)
            if idx in noise_at:
                roll = rng.integers(0, 3)
                if roll == 0:
                    images.append(gui_frame(reference, rng))
                elif roll == 1:
                    images.append(pink_frame(reference, rng))
                else:
                    images.append(blackened_frame(rng))
            elif idx % 17 == 5:
                images.append(pointer_frame(station, reference, rng)[0])
            else:
                images.append(clean_frame(station, reference, rng))
        save_frame_source(frames_root / proc, images, fps=fps)
        write_labels_csv(intervals, labels_dir / f"{proc}.csv")

    return {"frames_root": frames_root, "labels": labels_dir, "reference": ref_path}


def write_pipeline_config(
    root: str | Path,
    paths: dict[str, Path],
    method: str = "none",
    *,
    target_fps: float = 1.0,
    seed: int = 0,
    test_frac: float = 0.25,
    epochs: int = 4,
    out_name: str = "out",
) -> Path:
    """Write a pipeline.json next to a synthetic corpus; returns its path."""
    root = Path(root)
    doc = {
        "paths": {
            "frames_root": str(paths["frames_root"]),
            "labels": str(paths["labels"]),
            "reference": str(paths["reference"]),
            "out_dir": str(root / out_name),
        },
        "cleaning": {"target_fps": target_fps},
        "enhance": {"method": method},
        "split": {"seed": seed, "test_frac": test_frac},
        "train": {"epochs": epochs, "seed": seed},
    }
    path = root / f"{out_name}.pipeline.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    return path


# ---------------------------------------------------------------------------
# quadrant dataset for the Grad-CAM experiment
# ---------------------------------------------------------------------------

QUADRANT_CENTERS = ((12, 12), (12, 52), (52, 12), (52, 52))


def make_quadrant_dataset(
    n: int, seed: int = 0, size: int = FRAME_SIZE
) -> tuple[list[ImageBuffer], np.ndarray]:
    """Grayscale images with one bright Gaussian blob; the label is the blob's
    quadrant (0 TL, 1 TR, 2 BL, 3 BR).

    Blobs sit toward the outer corner of their quadrant with tails reaching
    the two nearest image borders; those border interactions are what makes
    the quadrant recoverable by a translation-invariant conv + global-pool
    network (and they keep the class evidence inside the blob's quadrant).
    """
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size]
    images: list[ImageBuffer] = []
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        q = int(rng.integers(0, 4))
        cy, cx = QUADRANT_CENTERS[q]
        cy += rng.uniform(-3, 3)
        cx += rng.uniform(-3, 3)
        sigma = rng.uniform(7, 10)
        peak = rng.uniform(200, 250)
        blob = peak * np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2 * sigma**2))
        plane = 40.0 + rng.normal(0, 12, size=(size, size)) + blob
        images.append(ImageBuffer.from_array(np.clip(plane, 0, 255)))
        labels[i] = q
    return images, labels


def quadrant_of_mass(values: np.ndarray) -> np.ndarray:
    """Fraction of heatmap mass in each quadrant (TL, TR, BL, BR)."""
    h, w = values.shape
    total = values.sum()
    if total <= 0:
        return np.zeros(4)
    halves_y, halves_x = h // 2, w // 2
    quads = np.array(
        [
            values[:halves_y, :halves_x].sum(),
            values[:halves_y, halves_x:].sum(),
            values[halves_y:, :halves_x].sum(),
            values[halves_y:, halves_x:].sum(),
        ]
    )
    return quads / total
