#!/usr/bin/env python3
"""The desk-scale explainability experiment: train the toy CNN on the
quadrant dataset, report holdout accuracy and Grad-CAM localization, and
write a few heatmap overlays."""

import argparse
from pathlib import Path

import numpy as np

from eusml.cnn import ToyCnn, TrainConfig, grad_cam, overlay, train
from eusml.dataset import compute_norm_stats
from eusml.imaging import write_png
from eusml.synth import make_quadrant_dataset, quadrant_of_mass


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--train-size", type=int, default=600)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="data/quadrant")
    p.add_argument("--overlays", type=int, default=8)
    args = p.parse_args()

    train_imgs, train_y = make_quadrant_dataset(args.train_size, seed=args.seed + 10)
    hold_imgs, hold_y = make_quadrant_dataset(100, seed=args.seed + 11)
    eval_imgs, eval_y = make_quadrant_dataset(100, seed=args.seed + 12)
    stats = compute_norm_stats(train_imgs)

    def tensorize(images):
        arr = np.stack(
            [
                (im.data[:, :, 0].astype(np.float64) / 255 - stats.mean[0]) / stats.std[0]
                for im in images
            ]
        )
        return arr[:, None]

    x_train, x_hold, x_eval = map(tensorize, (train_imgs, hold_imgs, eval_imgs))
    model = ToyCnn(num_classes=4, seed=args.seed)
    model.norm_stats = stats
    model, history = train(model, x_train, train_y, TrainConfig(epochs=args.epochs, seed=args.seed))
    for h in history:
        print(f"epoch {h['epoch']:2d}  loss {h['loss']:.4f}  acc {h['accuracy']:.3f}")

    accuracy = float((model.predict(x_hold) == hold_y).mean())
    fractions = []
    for i in range(len(eval_imgs)):
        cam = grad_cam(model, x_eval[i : i + 1], int(eval_y[i]))
        fractions.append(quadrant_of_mass(np.maximum(cam.upsample(64, 64), 0))[eval_y[i]])
    print(f"\nholdout accuracy: {accuracy:.3f}")
    print(f"mean Grad-CAM mass in the correct quadrant: {np.mean(fractions):.3f}")

    out = Path(args.out)
    for i in range(min(args.overlays, len(eval_imgs))):
        pred = int(model.predict(x_eval[i : i + 1])[0])
        cam = grad_cam(model, x_eval[i : i + 1], pred)
        write_png(overlay(cam, eval_imgs[i]), out / f"overlay_{i:02d}_true{eval_y[i]}_pred{pred}.png")
    print(f"wrote overlays to {out}")


if __name__ == "__main__":
    main()
