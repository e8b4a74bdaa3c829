#!/usr/bin/env python3
"""Generate a synthetic EUS-style corpus plus a ready-to-run pipeline config.

The clinical recordings are private, so experiments run on frames with
station-distinct textures and planted noise frames.
"""

import argparse
from pathlib import Path

from eusml.synth import write_pipeline_config, write_synthetic_corpus


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--root", default="data/synthetic", help="output directory")
    p.add_argument("--procedures", type=int, default=6)
    p.add_argument("--fps", type=float, default=3.0)
    p.add_argument("--seconds-per-station", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default="none", help="enhance method for the config")
    p.add_argument("--epochs", type=int, default=12)
    args = p.parse_args()

    root = Path(args.root)
    paths = write_synthetic_corpus(
        root,
        n_procedures=args.procedures,
        fps=args.fps,
        seconds_per_station=args.seconds_per_station,
        seed=args.seed,
    )
    config = write_pipeline_config(
        root, paths, method=args.method, seed=args.seed, epochs=args.epochs
    )
    print(f"corpus under {root}")
    print(f"pipeline config: {config}")
    print(f"next: eusml clean --config {config}")


if __name__ == "__main__":
    main()
