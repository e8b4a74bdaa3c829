#!/usr/bin/env python3
"""Run the full pipeline once per enhancement method and print the
comparison table (one row per method: BA, weighted precision, weighted
recall), on a synthetic corpus."""

import argparse
import json
from pathlib import Path

from eusml.cli import main as eusml
from eusml.enhance import METHODS
from eusml.metrics import TABLE_HEADER
from eusml.synth import write_pipeline_config, write_synthetic_corpus


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--root", default="data/grid")
    p.add_argument("--procedures", type=int, default=5)
    p.add_argument("--seconds-per-station", type=float, default=10.0)
    p.add_argument("--fps", type=float, default=3.0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    root = Path(args.root)
    paths = write_synthetic_corpus(
        root, n_procedures=args.procedures, fps=args.fps,
        seconds_per_station=args.seconds_per_station, seed=args.seed,
    )
    rows = []
    for method in METHODS:
        config = write_pipeline_config(
            root, paths, method=method, seed=args.seed,
            epochs=args.epochs, out_name=f"out_{method}",
        )
        for stage in ("clean", "enhance", "split", "train", "eval"):
            code = eusml([stage, "--config", str(config)])
            if code != 0:
                raise SystemExit(f"{method}/{stage} exited {code}")
        doc = json.loads((root / f"out_{method}" / "eval.json").read_text())
        rows.append(doc)

    print()
    print(TABLE_HEADER)
    for doc in rows:
        print(
            f"{doc['method']:<14s} {100 * doc['balanced_accuracy']:5.1f} "
            f"{100 * doc['weighted_precision']:5.1f} {100 * doc['weighted_recall']:5.1f}"
        )


if __name__ == "__main__":
    main()
