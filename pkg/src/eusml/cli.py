"""Single entry point for the whole pipeline.

    eusml <clean|enhance|split|train|eval|gradcam|serve> --config pipeline.json
          [--jobs N] [--force]

Stages chain through content hashes: every stage writes a small manifest
recording the hash of the config sections it depends on; the next stage
refuses to consume an artifact whose recorded hash no longer matches the
current config (override with --force).

Exit codes: 0 success, 2 validation, 3 missing/stale prerequisite, 4 runtime.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .cnn import (
    ToyCnn,
    TrainConfig,
    grad_cam,
    image_to_input,
    load_checkpoint,
    load_split,
    overlay,
    predict_frames,
    save_checkpoint,
    train,
)
from .dataset import (
    DatasetManifest,
    LabeledFrame,
    STATIONS,
    assign_splits,
    build_manifest,
    check_intervals_disjoint,
    compute_norm_stats,
    read_labels_csv,
    station_for_t,
)
from .enhance import EnhanceConfig, apply as apply_enhance
from .imaging import read_png, write_png
from .metrics import TABLE_HEADER, confusion_matrix, evaluate, format_table_row
from .pipeline import (
    CleaningThresholds,
    clean_stream,
    load_frame_source,
    sample_frames,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PREREQUISITE = 3
EXIT_RUNTIME = 4

STAGE_DEPENDS = {
    "clean": None,
    "enhance": "clean",
    "split": "enhance",
    "train": "split",
    "eval": "train",
    "gradcam": "train",
}

# which config sections each stage's output depends on (cumulative)
STAGE_SCOPE = {
    "clean": ("cleaning",),
    "enhance": ("cleaning", "enhance"),
    "split": ("cleaning", "enhance", "split"),
    "train": ("cleaning", "enhance", "split", "train"),
    "eval": ("cleaning", "enhance", "split", "train"),
    "gradcam": ("cleaning", "enhance", "split", "train"),
}


class MissingPrerequisite(Exception):
    pass


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_tree(root: Path) -> str:
    """Hash of a directory: sorted (relative path, file hash) pairs."""
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(sha256_file(path).encode())
    return h.hexdigest()


def canonical_hash(obj) -> str:
    return sha256_bytes(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode())


@dataclass(frozen=True)
class PipelineConfig:
    frames_root: Path
    labels_dir: Path
    reference: Path
    out_dir: Path
    target_fps: float
    thresholds: CleaningThresholds
    enhance: EnhanceConfig
    split_seed: int
    test_frac: float
    train: TrainConfig
    raw: dict

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ValueError(f"config file not found: {path}")
        doc = json.loads(path.read_text())
        try:
            paths = doc["paths"]
            cleaning = dict(doc.get("cleaning", {}))
            target_fps = float(cleaning.pop("target_fps", 1.0))
            split = doc.get("split", {})
            cfg = cls(
                frames_root=Path(paths["frames_root"]),
                labels_dir=Path(paths["labels"]),
                reference=Path(paths["reference"]),
                out_dir=Path(paths["out_dir"]),
                target_fps=target_fps,
                thresholds=CleaningThresholds(**cleaning),
                enhance=EnhanceConfig.from_dict(doc.get("enhance", {"method": "none"})),
                split_seed=int(split.get("seed", 0)),
                test_frac=float(split.get("test_frac", 0.2)),
                train=TrainConfig(**doc.get("train", {})),
                raw=doc,
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"bad pipeline config {path}: {exc}") from exc
        if target_fps <= 0:
            raise ValueError(f"target_fps must be positive, got {target_fps}")
        return cfg

    def scope_sections(self, stage: str) -> dict:
        sections = {}
        for name in STAGE_SCOPE[stage]:
            sections[name] = self.raw.get(name, {})
        return sections

    def stage_config_hash(self, stage: str) -> str:
        return canonical_hash(self.scope_sections(stage))


def write_stage_manifest(cfg: PipelineConfig, stage: str, input_hashes: dict) -> None:
    doc = {
        "stage": stage,
        "config_hash": cfg.stage_config_hash(stage),
        "input_hashes": input_hashes,
        "tool_version": __version__,
    }
    path = cfg.out_dir / f"{stage}.stage.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def check_prerequisite(cfg: PipelineConfig, stage: str, force: bool) -> None:
    upstream = STAGE_DEPENDS[stage]
    if upstream is None:
        return
    manifest_path = cfg.out_dir / f"{upstream}.stage.json"
    if not manifest_path.exists():
        raise MissingPrerequisite(
            f"stage '{stage}' needs the output of '{upstream}'; run `eusml {upstream}` first"
        )
    recorded = json.loads(manifest_path.read_text())
    expected = cfg.stage_config_hash(upstream)
    if recorded.get("config_hash") != expected:
        if force:
            print(f"warning: stale '{upstream}' artifact (config changed); --force given, continuing")
            return
        raise MissingPrerequisite(
            f"stage '{upstream}' output is stale (config changed since it ran); "
            f"rerun `eusml {upstream}` or pass --force"
        )


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def cmd_clean(cfg: PipelineConfig, jobs: int, force: bool) -> None:
    check_prerequisite(cfg, "clean", force)
    if not cfg.frames_root.is_dir():
        raise ValueError(f"frames root not found: {cfg.frames_root}")
    if not cfg.reference.exists():
        raise ValueError(f"reference image not found: {cfg.reference}")
    reference = read_png(cfg.reference)
    proc_dirs = sorted(p for p in cfg.frames_root.iterdir() if (p / "meta.json").exists())
    if not proc_dirs:
        raise ValueError(f"no procedure directories under {cfg.frames_root}")

    def clean_one(proc_dir: Path) -> tuple[str, dict]:
        sampled = sample_frames(load_frame_source(proc_dir), cfg.target_fps)
        frames, report = clean_stream(sampled, reference, cfg.thresholds)
        out_proc = cfg.out_dir / "clean" / proc_dir.name
        index = []
        for i, frame in enumerate(frames):
            name = f"{i:06d}.png"
            write_png(frame.image, out_proc / "frames" / name)
            index.append({"file": name, "t": frame.t, "source_index": frame.source_index})
        out_proc.mkdir(parents=True, exist_ok=True)
        (out_proc / "frames.json").write_text(json.dumps(index, sort_keys=True) + "\n")
        (out_proc / "report.json").write_text(report.to_json())
        return proc_dir.name, report.counts

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(clean_one, proc_dirs))
    for name, counts in results:
        print(f"cleaned {name}: {counts}")
    write_stage_manifest(
        cfg,
        "clean",
        {
            "frames_root": sha256_tree(cfg.frames_root),
            "reference": sha256_file(cfg.reference),
        },
    )


def cmd_enhance(cfg: PipelineConfig, jobs: int, force: bool) -> None:
    check_prerequisite(cfg, "enhance", force)
    clean_root = cfg.out_dir / "clean"
    proc_dirs = sorted(p for p in clean_root.iterdir() if (p / "frames.json").exists())

    def enhance_one(args: tuple[Path, str]) -> None:
        proc_dir, name = args
        img = read_png(proc_dir / "frames" / name)
        out = apply_enhance(img, cfg.enhance)
        write_png(out, cfg.out_dir / "enhanced" / proc_dir.name / "frames" / name)

    tasks = []
    for proc_dir in proc_dirs:
        index = json.loads((proc_dir / "frames.json").read_text())
        tasks.extend((proc_dir, row["file"]) for row in index)
        target = cfg.out_dir / "enhanced" / proc_dir.name
        target.mkdir(parents=True, exist_ok=True)
        (target / "frames.json").write_text(json.dumps(index, sort_keys=True) + "\n")
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        list(pool.map(enhance_one, tasks))
    print(f"enhanced {len(tasks)} frames with method={cfg.enhance.method}")
    write_stage_manifest(cfg, "enhance", {"clean": sha256_tree(clean_root)})


def cmd_split(cfg: PipelineConfig, jobs: int, force: bool) -> None:
    check_prerequisite(cfg, "split", force)
    enhanced_root = cfg.out_dir / "enhanced"
    proc_dirs = sorted(p for p in enhanced_root.iterdir() if (p / "frames.json").exists())
    labeled: list[LabeledFrame] = []
    per_procedure: dict[str, dict] = {}
    for proc_dir in proc_dirs:
        labels_path = cfg.labels_dir / f"{proc_dir.name}.csv"
        if not labels_path.exists():
            raise ValueError(f"no labels file for procedure {proc_dir.name}: {labels_path}")
        intervals = read_labels_csv(labels_path)
        check_intervals_disjoint(intervals)
        counts = {s: 0 for s in STATIONS}
        index = json.loads((proc_dir / "frames.json").read_text())
        for row in index:
            station = station_for_t(intervals, row["t"])
            if station is None:
                continue
            rel = str((Path("enhanced") / proc_dir.name / "frames" / row["file"]))
            labeled.append(LabeledFrame(proc_dir.name, rel, station))
            counts[station] += 1
        if sum(counts.values()):
            per_procedure[proc_dir.name] = counts
    splits = assign_splits(per_procedure, test_frac=cfg.test_frac, seed=cfg.split_seed)
    train_frames = [f for f in labeled if f.procedure_id in splits.train]
    stats = compute_norm_stats(read_png(cfg.out_dir / f.path) for f in train_frames)
    manifest = build_manifest(labeled, splits, stats, cfg.enhance)
    (cfg.out_dir / "manifest.json").write_text(manifest.to_json())
    print(
        f"split {len(per_procedure)} procedures -> "
        f"{len(splits.train)} train / {len(splits.test)} test; counts {manifest.counts}"
    )
    write_stage_manifest(
        cfg,
        "split",
        {"enhanced": sha256_tree(enhanced_root), "labels": sha256_tree(cfg.labels_dir)},
    )


def cmd_train(cfg: PipelineConfig, jobs: int, force: bool) -> None:
    check_prerequisite(cfg, "train", force)
    manifest_path = cfg.out_dir / "manifest.json"
    manifest = DatasetManifest.from_json(manifest_path.read_text())
    x, y, _ = load_split(manifest, "train", root=cfg.out_dir)
    model = ToyCnn(num_classes=len(STATIONS), seed=cfg.train.seed)
    model.norm_stats = manifest.norm
    model, history = train(model, x, y, cfg.train)
    save_checkpoint(model, cfg.out_dir / "model.ckpt")
    (cfg.out_dir / "history.json").write_text(
        json.dumps(history, sort_keys=True, indent=2) + "\n"
    )
    final = history[-1] if history else {"loss": float("nan"), "accuracy": float("nan")}
    print(
        f"trained {cfg.train.epochs} epochs on {x.shape[0]} frames; "
        f"final loss {final['loss']:.4f}, accuracy {final['accuracy']:.3f}"
    )
    write_stage_manifest(cfg, "train", {"manifest": sha256_file(manifest_path)})


def cmd_eval(cfg: PipelineConfig, jobs: int, force: bool) -> None:
    check_prerequisite(cfg, "eval", force)
    manifest = DatasetManifest.from_json((cfg.out_dir / "manifest.json").read_text())
    model = load_checkpoint(cfg.out_dir / "model.ckpt")
    y, preds = predict_frames(model, manifest, "test", root=cfg.out_dir)
    cm = confusion_matrix(y, preds, len(STATIONS))
    report = evaluate(cm)
    doc = {
        "method": cfg.enhance.method,
        "balanced_accuracy": report.balanced_accuracy,
        "weighted_precision": report.weighted_precision,
        "weighted_recall": report.weighted_recall,
        "confusion": cm.counts.tolist(),
    }
    (cfg.out_dir / "eval.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    print(TABLE_HEADER)
    print(format_table_row(cfg.enhance.method, report))
    write_stage_manifest(
        cfg,
        "eval",
        {
            "manifest": sha256_file(cfg.out_dir / "manifest.json"),
            "checkpoint": sha256_file(cfg.out_dir / "model.ckpt"),
        },
    )


def cmd_gradcam(cfg: PipelineConfig, jobs: int, force: bool, count: int = 6) -> None:
    check_prerequisite(cfg, "gradcam", force)
    manifest = DatasetManifest.from_json((cfg.out_dir / "manifest.json").read_text())
    model = load_checkpoint(cfg.out_dir / "model.ckpt")
    frames = manifest.frames_of_split("test")[:count]
    out_dir = cfg.out_dir / "gradcam"
    for i, f in enumerate(frames):
        img = read_png(cfg.out_dir / f.path)
        x = image_to_input(img, manifest.norm)[None, None]
        pred = int(model.predict(x)[0])
        cam = grad_cam(model, x, pred)
        blended = overlay(cam, img)
        write_png(blended, out_dir / f"{i:03d}_{f.station.value}_pred{pred}.png")
    print(f"wrote {len(frames)} Grad-CAM overlays to {out_dir}")
    write_stage_manifest(
        cfg,
        "gradcam",
        {
            "manifest": sha256_file(cfg.out_dir / "manifest.json"),
            "checkpoint": sha256_file(cfg.out_dir / "model.ckpt"),
        },
    )


def cmd_serve(host: str, port: int, data_dir: str | None) -> None:
    import uvicorn

    from .labeling import SessionStore, create_app

    root = data_dir or os.environ.get("EUSML_DATA_DIR")
    if not root:
        raise ValueError("set EUSML_DATA_DIR or pass --data-dir")
    app = create_app(SessionStore(root))
    uvicorn.run(app, host=host, port=port)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eusml", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("clean", "enhance", "split", "train", "eval", "gradcam"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="pipeline.json")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        p.add_argument("--force", action="store_true", help="use stale upstream artifacts")
        if name == "gradcam":
            p.add_argument("--count", type=int, default=6)
    serve = sub.add_parser("serve")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--data-dir", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            cmd_serve(args.host, args.port, args.data_dir)
            return EXIT_OK
        cfg = PipelineConfig.load(args.config)
        if args.jobs < 1:
            raise ValueError(f"--jobs must be >= 1, got {args.jobs}")
        handler = {
            "clean": cmd_clean,
            "enhance": cmd_enhance,
            "split": cmd_split,
            "train": cmd_train,
            "eval": cmd_eval,
        }
        if args.command == "gradcam":
            cmd_gradcam(cfg, args.jobs, args.force, args.count)
        else:
            handler[args.command](cfg, args.jobs, args.force)
        return EXIT_OK
    except MissingPrerequisite as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PREREQUISITE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
