"""Labeled frames, patient-level splits, train-only normalization, manifests.

Whole procedures (= patients) go to exactly one split so near-duplicate
neighboring frames can never leak across the train/test boundary, and the
normalization statistics are computed from train pixels only.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .enhance import EnhanceConfig
from .imaging import FloatImage, ImageBuffer
from .pipeline import FrameSample

STD_FLOOR = 1e-6


class Station(str, Enum):
    S1 = "Station1"
    S2 = "Station2"
    S3 = "Station3"

    @property
    def index(self) -> int:
        return _STATION_ORDER[self]


STATIONS = tuple(Station)
_STATION_ORDER = {s: i for i, s in enumerate(STATIONS)}


@dataclass(frozen=True)
class StationInterval:
    station: Station
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(
                f"interval must satisfy t_start < t_end, got [{self.t_start}, {self.t_end})"
            )

    def contains(self, t: float) -> bool:
        return self.t_start <= t < self.t_end


def check_intervals_disjoint(intervals: Iterable[StationInterval]) -> None:
    """Raise naming the offending pair if any two intervals overlap."""
    ordered = sorted(intervals, key=lambda iv: iv.t_start)
    for a, b in zip(ordered, ordered[1:]):
        if b.t_start < a.t_end:
            raise ValueError(
                f"overlapping intervals: {a.station.value}[{a.t_start}, {a.t_end}) "
                f"and {b.station.value}[{b.t_start}, {b.t_end})"
            )


@dataclass(frozen=True)
class SplitAssignment:
    train: frozenset[str]
    test: frozenset[str]
    seed: int

    def __post_init__(self):
        if self.train & self.test:
            raise ValueError(f"procedures in both splits: {sorted(self.train & self.test)}")

    def split_of(self, procedure_id: str) -> str:
        if procedure_id in self.train:
            return "train"
        if procedure_id in self.test:
            return "test"
        raise KeyError(f"procedure {procedure_id!r} not in either split")


@dataclass(frozen=True)
class NormStats:
    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise ValueError("mean and std must have the same channel count")
        if any(s < STD_FLOOR for s in self.std):
            raise ValueError(f"std entries must be >= {STD_FLOOR}")


@dataclass(frozen=True)
class LabeledFrame:
    """One manifest row: a frame file, its station, and its procedure."""

    procedure_id: str
    path: str
    station: Station


def station_for_t(intervals: list[StationInterval], t: float) -> Station | None:
    """Station whose [t_start, t_end) contains t, or None. Intervals must be disjoint."""
    for iv in intervals:
        if iv.contains(t):
            return iv.station
    return None


def label_frames(
    frames: Iterable[FrameSample], intervals: list[StationInterval]
) -> list[tuple[FrameSample, Station]]:
    """Attach the station whose [t_start, t_end) interval contains each frame;
    frames outside every interval are dropped."""
    check_intervals_disjoint(intervals)
    labeled = []
    for frame in frames:
        station = station_for_t(intervals, frame.t)
        if station is not None:
            labeled.append((frame, station))
    return labeled


def split_imbalance(
    per_procedure: Mapping[str, Mapping[Station, int]],
    test_procs: set[str],
    test_frac: float,
) -> tuple[float, float]:
    """(worst, sum) of per-station |test fraction - target| for a candidate split.

    Compared lexicographically: first bound the worst station, then the total.
    """
    worst = 0.0
    total_err = 0.0
    for s in STATIONS:
        total = sum(c.get(s, 0) for c in per_procedure.values())
        if total == 0:
            continue
        in_test = sum(per_procedure[p].get(s, 0) for p in test_procs)
        dev = abs(in_test / total - test_frac)
        worst = max(worst, dev)
        total_err += dev
    return worst, total_err


def assign_splits(
    per_procedure: Mapping[str, Mapping[Station, int]],
    test_frac: float = 0.2,
    seed: int = 0,
) -> SplitAssignment:
    """Greedy seeded patient-level split balancing per-station test fractions.

    Procedures are shuffled by seed and each goes to whichever split keeps
    every station's cumulative test fraction closest to test_frac (ties go to
    train); a deterministic single-move improvement pass then repairs what the
    online pass could not see, and both splits are forced non-empty. Whole
    procedures only; every procedure lands in exactly one split.
    """
    if len(per_procedure) < 2:
        raise ValueError(f"need at least 2 procedures to split, got {len(per_procedure)}")
    if not 0.0 < test_frac < 1.0:
        raise ValueError(f"test_frac must be in (0, 1), got {test_frac}")
    for proc, counts in per_procedure.items():
        if sum(counts.values()) < 1:
            raise ValueError(f"procedure {proc!r} has no labeled frames")

    order = sorted(per_procedure)
    random.Random(seed).shuffle(order)

    test_counts = {s: 0 for s in STATIONS}
    total_counts = {s: 0 for s in STATIONS}
    test: set[str] = set()

    def online_err(counts: Mapping[Station, int], to_test: bool) -> float:
        err = 0.0
        for s in STATIONS:
            total = total_counts[s] + counts.get(s, 0)
            if total == 0:
                continue
            in_test = test_counts[s] + (counts.get(s, 0) if to_test else 0)
            err += abs(in_test / total - test_frac)
        return err

    for proc in order:
        counts = per_procedure[proc]
        if online_err(counts, to_test=True) < online_err(counts, to_test=False):
            test.add(proc)
            for s in STATIONS:
                test_counts[s] += counts.get(s, 0)
        for s in STATIONS:
            total_counts[s] += counts.get(s, 0)

    # repair pass: apply the best strictly-improving move or swap until none
    # exists (deterministic: candidates enumerated in sorted order)
    all_procs = sorted(per_procedure)

    def candidates(current_test: set[str]):
        for proc in all_procs:
            moved = current_test ^ {proc}
            if moved and len(moved) < len(all_procs):
                yield moved
        inside = sorted(current_test)
        outside = [p for p in all_procs if p not in current_test]
        for a in inside:
            for b in outside:
                yield (current_test - {a}) | {b}

    current = split_imbalance(per_procedure, test, test_frac)
    for _ in range(6 * len(all_procs)):
        best: tuple[tuple[float, float], frozenset[str]] | None = None
        for moved in candidates(test):
            err = split_imbalance(per_procedure, moved, test_frac)
            if err < current and (best is None or err < best[0]):
                best = (err, frozenset(moved))
        if best is None:
            break
        current, test = best[0], set(best[1])

    # both splits must be usable downstream
    if not test:
        _, forced = min(
            (split_imbalance(per_procedure, {p}, test_frac), p) for p in all_procs
        )
        test = {forced}
    if len(test) == len(all_procs):
        _, forced = min(
            (split_imbalance(per_procedure, test - {p}, test_frac), p) for p in all_procs
        )
        test -= {forced}

    train = set(all_procs) - test
    return SplitAssignment(train=frozenset(train), test=frozenset(test), seed=seed)


def compute_norm_stats(images: Iterable[ImageBuffer]) -> NormStats:
    """Per-channel mean/std over all pixels scaled to [0, 1]; population std,
    floored at 1e-6. Must be fed train-split images only."""
    n = 0
    total = None
    total_sq = None
    channels = None
    for img in images:
        if channels is None:
            channels = img.channels
            total = np.zeros(channels)
            total_sq = np.zeros(channels)
        elif img.channels != channels:
            raise ValueError("all images must have the same channel count")
        scaled = img.data.reshape(-1, channels).astype(np.float64) / 255.0
        total += scaled.sum(axis=0)
        total_sq += (scaled ** 2).sum(axis=0)
        n += scaled.shape[0]
    if n == 0:
        raise ValueError("cannot compute normalization statistics from an empty train set")
    mean = total / n
    var = np.maximum(0.0, total_sq / n - mean ** 2)
    std = np.maximum(np.sqrt(var), STD_FLOOR)
    return NormStats(mean=tuple(float(m) for m in mean), std=tuple(float(s) for s in std))


def normalize(img: ImageBuffer, stats: NormStats) -> FloatImage:
    """Per channel: (pixel/255 - mean) / std."""
    if img.channels != len(stats.mean):
        raise ValueError(
            f"image has {img.channels} channels but stats cover {len(stats.mean)}"
        )
    mean = np.asarray(stats.mean)
    std = np.asarray(stats.std)
    data = (img.data.astype(np.float64) / 255.0 - mean) / std
    return FloatImage(img.width, img.height, img.channels, data)


@dataclass(frozen=True)
class DatasetManifest:
    splits: SplitAssignment
    frames: tuple[LabeledFrame, ...]
    frame_splits: tuple[str, ...]  # aligned with frames
    counts: dict
    norm: NormStats
    enhance: EnhanceConfig

    def frames_of_split(self, split: str) -> list[LabeledFrame]:
        return [f for f, s in zip(self.frames, self.frame_splits) if s == split]

    def to_json(self) -> str:
        doc = {
            "seed": self.splits.seed,
            "splits": {
                "train": sorted(self.splits.train),
                "test": sorted(self.splits.test),
            },
            "norm": {"mean": list(self.norm.mean), "std": list(self.norm.std)},
            "enhance": self.enhance.to_dict(),
            "frames": [
                {"proc": f.procedure_id, "path": f.path, "station": f.station.value, "split": s}
                for f, s in zip(self.frames, self.frame_splits)
            ],
            "counts": self.counts,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        doc = json.loads(text)
        splits = SplitAssignment(
            train=frozenset(doc["splits"]["train"]),
            test=frozenset(doc["splits"]["test"]),
            seed=doc["seed"],
        )
        frames = tuple(
            LabeledFrame(r["proc"], r["path"], Station(r["station"])) for r in doc["frames"]
        )
        frame_splits = tuple(r["split"] for r in doc["frames"])
        norm = NormStats(mean=tuple(doc["norm"]["mean"]), std=tuple(doc["norm"]["std"]))
        enhance = EnhanceConfig.from_dict(doc["enhance"])
        return cls(splits, frames, frame_splits, doc["counts"], norm, enhance)


def build_manifest(
    labeled: Iterable[LabeledFrame],
    splits: SplitAssignment,
    stats: NormStats,
    enhance_cfg: EnhanceConfig,
) -> DatasetManifest:
    """Tie frames, splits, stats, and the enhancement config into one record.

    Serialization is byte-stable for fixed inputs; counts are recomputed from
    the frame list, never supplied.
    """
    frames = tuple(labeled)
    seen: set[str] = set()
    frame_splits = []
    counts = {
        "train": {s.value: 0 for s in STATIONS},
        "test": {s.value: 0 for s in STATIONS},
    }
    for f in frames:
        if f.path in seen:
            raise ValueError(f"frame listed twice: {f.path}")
        seen.add(f.path)
        try:
            split = splits.split_of(f.procedure_id)
        except KeyError as exc:
            raise ValueError(str(exc)) from exc
        frame_splits.append(split)
        counts[split][f.station.value] += 1
    if sum(counts["test"].values()) == 0:
        raise ValueError("manifest has an empty test split")
    if sum(counts["train"].values()) == 0:
        raise ValueError("manifest has an empty train split")
    return DatasetManifest(
        splits=splits,
        frames=frames,
        frame_splits=tuple(frame_splits),
        counts=counts,
        norm=stats,
        enhance=enhance_cfg,
    )


# ---------------------------------------------------------------------------
# labels.csv: header `station,t_start,t_end`, seconds with 3 decimals
# ---------------------------------------------------------------------------

def read_labels_csv(path: str | Path) -> list[StationInterval]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["station", "t_start", "t_end"]
        if reader.fieldnames != expected:
            raise ValueError(
                f"{path}: expected header {','.join(expected)}, got {reader.fieldnames}"
            )
        return [
            StationInterval(Station(row["station"]), float(row["t_start"]), float(row["t_end"]))
            for row in reader
        ]


def write_labels_csv(intervals: Iterable[StationInterval], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["station", "t_start", "t_end"])
        for iv in intervals:
            writer.writerow([iv.station.value, f"{iv.t_start:.3f}", f"{iv.t_end:.3f}"])
