"""Training loop, finite-difference gradient checking, and manifest-backed
prediction."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..dataset import DatasetManifest, NormStats
from ..imaging import ImageBuffer, read_png, resize_bilinear, to_grayscale
from .layers import cross_entropy
from .model import ToyCnn, TrainConfig

INPUT_SIZE = 64


def train(
    model: ToyCnn, x: np.ndarray, y: np.ndarray, cfg: TrainConfig
) -> tuple[ToyCnn, list[dict]]:
    """SGD with momentum over seeded-shuffle minibatches.

    Returns the trained model and a per-epoch history of mean loss and
    accuracy (measured on the shuffled training batches as they are seen).
    Identical seeds give bit-identical parameters and history.
    """
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if np.unique(y).size < 2:
        raise ValueError("training set must contain at least 2 classes")
    rng = np.random.default_rng(cfg.seed)
    velocity = {name: np.zeros_like(value) for name, value, _ in model.parameters()}
    history: list[dict] = []
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        correct = 0
        for start in range(0, n, cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            xb, yb = x[batch], y[batch]
            logits, _ = model.forward(xb)
            loss, grad = cross_entropy(logits, yb)
            model.backward(grad)
            losses.append(loss)
            correct += int((logits.argmax(axis=1) == yb).sum())
            for name, value, g in model.parameters():
                v = velocity[name]
                v *= cfg.momentum
                v -= cfg.lr * g
                value += v
        history.append(
            {
                "epoch": epoch,
                "loss": float(np.mean(losses)),
                "accuracy": correct / n,
            }
        )
    return model, history


def gradient_check(
    model: ToyCnn,
    x: np.ndarray,
    y: np.ndarray,
    n_checks: int = 200,
    step: float = 1e-4,
    seed: int = 0,
) -> float:
    """Max relative error between backprop and central finite differences,
    over >= n_checks randomly chosen coordinates spread across every
    parameter tensor."""
    logits, _ = model.forward(x)
    _, grad = cross_entropy(logits, y)
    model.backward(grad)
    analytic = {name: g.copy() for name, _, g in model.parameters()}

    def loss_only() -> float:
        logits, _ = model.forward(x)
        loss, _ = cross_entropy(logits, y)
        return loss

    rng = np.random.default_rng(seed)
    params = model.parameters()
    per_tensor = max(1, -(-n_checks // len(params)))  # ceil division
    worst = 0.0
    for name, value, _ in params:
        flat = value.reshape(-1)
        k = min(per_tensor, flat.size)
        picks = rng.choice(flat.size, size=k, replace=False)
        for idx in picks:
            orig = flat[idx]
            flat[idx] = orig + step
            up = loss_only()
            flat[idx] = orig - step
            down = loss_only()
            flat[idx] = orig
            numeric = (up - down) / (2.0 * step)
            a = analytic[name].reshape(-1)[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# Manifest-backed data loading and prediction
# ---------------------------------------------------------------------------

def image_to_input(img: ImageBuffer, stats: NormStats) -> np.ndarray:
    """Grayscale, resize to the network input size, then standardize."""
    gray = to_grayscale(img)
    plane = gray.data[:, :, 0].astype(np.float64)
    if plane.shape != (INPUT_SIZE, INPUT_SIZE):
        plane = resize_bilinear(plane, INPUT_SIZE, INPUT_SIZE)
        plane = np.floor(np.clip(plane, 0, 255) + 0.5)
    return (plane / 255.0 - stats.mean[0]) / stats.std[0]


def load_split(
    manifest: DatasetManifest, split: str, root: str | Path | None = None
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Tensorize one manifest split: (N,1,64,64) inputs, int labels, paths.

    Frame order follows the manifest exactly.
    """
    frames = manifest.frames_of_split(split)
    if not frames:
        raise ValueError(f"manifest has no frames in split {split!r}")
    root = Path(root) if root is not None else None
    xs = np.empty((len(frames), 1, INPUT_SIZE, INPUT_SIZE))
    ys = np.empty(len(frames), dtype=np.int64)
    paths = []
    for i, f in enumerate(frames):
        path = Path(f.path)
        if root is not None and not path.is_absolute():
            path = root / path
        xs[i, 0] = image_to_input(read_png(path), manifest.norm)
        ys[i] = f.station.index
        paths.append(str(f.path))
    return xs, ys, paths


def predict_frames(
    model: ToyCnn, manifest: DatasetManifest, split: str = "test",
    root: str | Path | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(true labels, argmax predictions) for one split, in manifest order."""
    n_stations = len({f.station for f in manifest.frames})
    if model.num_classes < n_stations:
        raise ValueError(
            f"model has {model.num_classes} classes but manifest uses {n_stations} stations"
        )
    x, y, _ = load_split(manifest, split, root)
    preds = model.predict(x)
    return y, preds
