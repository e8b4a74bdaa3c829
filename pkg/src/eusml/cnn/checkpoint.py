"""Versioned binary model checkpoints.

Layout: magic "EUSM", uint32 version, uint32 header length, UTF-8 JSON header
(class count, seed, parameter names/shapes, normalization stats), then the
parameter blobs as little-endian float64 in header order. Loading refuses any
version other than the writer's.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..dataset import NormStats
from .model import ToyCnn

MAGIC = b"EUSM"
VERSION = 1


def save_checkpoint(model: ToyCnn, path: str | Path) -> None:
    params = model.parameters()
    header = {
        "num_classes": model.num_classes,
        "in_channels": model.in_channels,
        "seed": model.seed,
        "params": [{"name": name, "shape": list(value.shape)} for name, value, _ in params],
        "norm": None
        if model.norm_stats is None
        else {"mean": list(model.norm_stats.mean), "std": list(model.norm_stats.std)},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for _, value, _ in params:
            fh.write(value.astype("<f8").tobytes())


def load_checkpoint(path: str | Path) -> ToyCnn:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (bad magic {magic!r})")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise ValueError(
                f"{path}: checkpoint version {version} unsupported (expected {VERSION})"
            )
        header = json.loads(fh.read(header_len).decode("utf-8"))
        model = ToyCnn(
            num_classes=header["num_classes"],
            seed=header["seed"],
            in_channels=header["in_channels"],
        )
        by_name = {name: value for name, value, _ in model.parameters()}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape))
            blob = fh.read(count * 8)
            if len(blob) != count * 8:
                raise ValueError(f"{path}: truncated checkpoint")
            value = np.frombuffer(blob, dtype="<f8").reshape(shape)
            target = by_name.get(entry["name"])
            if target is None or target.shape != shape:
                raise ValueError(f"{path}: unexpected parameter {entry['name']} {shape}")
            target[...] = value
        if header["norm"] is not None:
            model.norm_stats = NormStats(
                mean=tuple(header["norm"]["mean"]), std=tuple(header["norm"]["std"])
            )
    return model
