"""Command-line front end: synth, train, propose, heatmap, and eval.

Each subcommand is a thin orchestration layer over the library modules and
writes a run manifest (flags, seeds, paths, tool version, wall time) next to
its outputs. Primary outputs are bit-reproducible for fixed flags and seeds;
the manifest is the one file that is not, since it records the wall clock.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, List, Optional, Sequence

from . import __version__
from .dataset import LabeledFrame, load_dataset, save_dataset, split_frames
from .errors import DataError, NumericError
from .evaluate import (
    CurveRecord,
    random_baseline_sweep,
    sweep_scored,
    validate_thresholds,
    write_curve_csv,
)
from .geometry import WindowConfig
from .nn import TrainConfig, load_checkpoint, save_checkpoint
from .pgm import read_pgm, write_pgm
from .pipeline import CropPlan, train_pipeline
from .proposals import (
    ProposalConfig,
    draw_proposals,
    render_heatmap,
    score_frame,
    threshold_proposals,
    write_proposals_csv,
)
from .synth import SceneConfig, generate_frame

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

LOSS_CSV_HEADER = "epoch trainLoss valLoss"


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad flags; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _map_frames(fn: Callable, items: Sequence, threads: int) -> List:
    """Apply fn to items, optionally on a thread pool; order is preserved.

    Work per item is independent and seeded per frame id, so the result is
    identical for any thread count.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def parse_threshold_grid(text: str) -> List[float]:
    """Parse 'start:stop:step' into an inclusive ascending grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ValueError(f"bad threshold grid {text!r}: {exc}") from exc
    if step <= 0 or stop < start:
        raise ValueError(f"bad threshold grid {text!r}: need stop >= start and step > 0")
    grid = []
    i = 0
    while True:
        t = start + i * step
        if t > stop + 1e-9:
            break
        grid.append(round(t, 10))
        i += 1
    return validate_thresholds(grid)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(path, subcommand: str, config: dict, seeds: dict,
                    inputs: dict, outputs: dict, t_start: float) -> None:
    manifest = {
        "subcommand": subcommand,
        "tool_version": __version__,
        "config": config,
        "seeds": seeds,
        "inputs": inputs,
        "outputs": outputs,
        "wall_seconds": round(time.time() - t_start, 3),
    }
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _load_frame_image(path) -> LabeledFrame:
    """A bare PGM as a frame: no fan geometry, no ground truth."""
    p = Path(path)
    return LabeledFrame(frame_id=p.stem, image=read_pgm(p), fan=None)


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    t_start = time.time()
    if args.config is not None:
        cfg_path = Path(args.config)
        try:
            text = cfg_path.read_text(encoding="utf-8")
        except OSError as exc:
            raise DataError(f"cannot read scene config {cfg_path}: {exc}") from exc
        scene = SceneConfig.from_json(text)
    else:
        scene = SceneConfig()
    if args.seed is not None:
        d = scene.to_dict()
        d["seed"] = args.seed
        scene = SceneConfig.from_dict(d)

    out = Path(args.out)
    ids = [str(i) for i in range(args.frames)]
    frames = _map_frames(lambda i: generate_frame(scene, i), ids, args.threads)
    save_dataset(frames, out)
    (out / "scene_config.json").write_text(scene.to_json() + "\n", encoding="utf-8")
    _write_manifest(
        out / "manifest.json", "synth",
        config={"scene": scene.to_dict(), "frames": args.frames, "threads": args.threads},
        seeds={"scene": scene.seed},
        inputs={"config": args.config},
        outputs={"dataset": str(out)},
        t_start=t_start,
    )
    n_objects = sum(len(f.boxes) for f in frames)
    print(f"wrote {len(frames)} frames ({n_objects} objects) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- train

def cmd_train(args) -> int:
    t_start = time.time()
    frames = load_dataset(args.dataset)
    plan = CropPlan(
        window=WindowConfig(window_size=args.window, stride=args.stride),
        negatives_per_frame=args.negatives,
    )
    config = TrainConfig(
        batch_size=args.batch,
        learning_rate=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
    )
    result = train_pipeline(frames, config, plan)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        result.net, out,
        epochs_run=len(result.history),
        final_val_loss=result.best_val_loss,
    )
    loss_path = out.parent / (out.name + ".losses.csv")
    lines = [LOSS_CSV_HEADER]
    for s in result.history:
        lines.append(f"{s.epoch} {s.train_loss:.6f} {s.val_loss:.6f}")
    loss_path.write_text("\n".join(lines) + "\n")

    _write_manifest(
        out.parent / (out.name + ".manifest.json"), "train",
        config={
            "window": args.window, "stride": args.stride, "batch": args.batch,
            "epochs": args.epochs, "patience": args.patience, "lr": args.lr,
            "negatives": args.negatives, "threads": args.threads,
        },
        seeds={"train": args.seed},
        inputs={"dataset": str(args.dataset)},
        outputs={
            "checkpoint": str(out), "losses": str(loss_path),
            "split": {
                "train": result.train_ids, "val": result.val_ids,
                "test": result.test_ids,
            },
            "epochs_run": len(result.history),
            "best_val_loss": result.best_val_loss,
        },
        t_start=t_start,
    )
    print(
        f"trained {len(result.history)} epochs on {len(result.train_ids)} frames "
        f"({result.n_train_crops} crops), best val loss {result.best_val_loss:.6f}"
    )
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------- propose

def cmd_propose(args) -> int:
    t_start = time.time()
    net, _ = load_checkpoint(args.checkpoint)
    if args.image is not None:
        frames = [_load_frame_image(args.image)]
    else:
        frames = load_dataset(args.dataset)
    wcfg = WindowConfig(window_size=args.window, stride=args.stride)
    pcfg = ProposalConfig(
        threshold=args.threshold, use_nms=args.nms, nms_iou=args.nms_iou, window=wcfg
    )

    scored_by_frame = _map_frames(
        lambda f: score_frame(net, f, wcfg), frames, args.threads
    )
    rows = []
    for frame, scored in zip(frames, scored_by_frame):
        for sw in threshold_proposals(scored, pcfg):
            rows.append((frame.frame_id, sw))

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_proposals_csv(rows, out)

    if args.overlay is not None:
        if len(frames) != 1:
            raise DataError("--overlay needs a single --image input")
        proposals = [sw for _, sw in rows]
        write_pgm(Path(args.overlay), draw_proposals(frames[0].image, proposals))

    _write_manifest(
        out.parent / (out.name + ".manifest.json"), "propose",
        config={
            "threshold": args.threshold, "nms": args.nms, "nms_iou": args.nms_iou,
            "window": args.window, "stride": args.stride, "threads": args.threads,
        },
        seeds={},
        inputs={
            "checkpoint": str(args.checkpoint),
            "checkpoint_sha256": _sha256(args.checkpoint),
            "image": args.image, "dataset": args.dataset,
        },
        outputs={"proposals": str(out), "overlay": args.overlay},
        t_start=t_start,
    )
    print(f"wrote {len(rows)} proposals from {len(frames)} frame(s) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- heatmap

def cmd_heatmap(args) -> int:
    t_start = time.time()
    net, _ = load_checkpoint(args.checkpoint)
    frame = _load_frame_image(args.image)
    wcfg = WindowConfig(window_size=args.window, stride=args.stride)
    scored = score_frame(net, frame, wcfg)
    heatmap = render_heatmap(scored, wcfg, frame.image.shape)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_pgm(out, heatmap)
    _write_manifest(
        out.parent / (out.name + ".manifest.json"), "heatmap",
        config={"window": args.window, "stride": args.stride},
        seeds={},
        inputs={
            "checkpoint": str(args.checkpoint),
            "checkpoint_sha256": _sha256(args.checkpoint),
            "image": str(args.image),
        },
        outputs={"heatmap": str(out)},
        t_start=t_start,
    )
    print(f"wrote {heatmap.shape[1]}x{heatmap.shape[0]} heatmap to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- eval

def _records_to_dicts(records: Sequence[CurveRecord]) -> List[dict]:
    return [
        {
            "threshold": r.threshold,
            "recall": r.recall,
            "mean_proposals": r.mean_proposals,
            "proposal_std": r.proposal_std,
        }
        for r in records
    ]


def cmd_eval(args) -> int:
    t_start = time.time()
    net, _ = load_checkpoint(args.checkpoint)
    frames = load_dataset(args.dataset)
    if args.split == "test":
        _, _, frames = split_frames(frames, args.seed)
    if not frames:
        raise DataError("no frames selected for evaluation")
    grid = parse_threshold_grid(args.thresholds)
    wcfg = WindowConfig(window_size=args.window, stride=args.stride)

    t_score = time.time()
    scored = _map_frames(lambda f: score_frame(net, f, wcfg), frames, args.threads)
    scoring_seconds = time.time() - t_score
    boxes = [f.boxes for f in frames]

    learned = sweep_scored(scored, boxes, grid)
    learned_nms = sweep_scored(scored, boxes, grid, use_nms=True, nms_iou=args.nms_iou)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_curve_csv(learned, out / "curve_learned.csv")
    write_curve_csv(learned_nms, out / "curve_learned_nms.csv")

    curves = {
        "learned": _records_to_dicts(learned),
        "learned_nms": _records_to_dicts(learned_nms),
    }
    if args.baseline == "random":
        baseline = random_baseline_sweep(frames, grid, window=wcfg, seed=args.seed)
        write_curve_csv(baseline, out / "curve_baseline.csv")
        curves["baseline"] = _records_to_dicts(baseline)

    per_frame = scoring_seconds / len(frames)
    summary = {
        "checkpoint": str(args.checkpoint),
        "checkpoint_sha256": _sha256(args.checkpoint),
        "dataset": str(args.dataset),
        "split": args.split,
        "seed": args.seed,
        "n_frames": len(frames),
        "n_objects": sum(len(b) for b in boxes),
        "thresholds": grid,
        "nms_iou": args.nms_iou,
        "baseline": args.baseline,
        "curves": curves,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n")

    _write_manifest(
        out / "manifest.json", "eval",
        config={
            "thresholds": args.thresholds, "split": args.split,
            "nms_iou": args.nms_iou, "baseline": args.baseline,
            "window": args.window, "stride": args.stride,
            "threads": args.threads,
        },
        seeds={"split_and_baseline": args.seed},
        inputs={
            "checkpoint": str(args.checkpoint),
            "checkpoint_sha256": summary["checkpoint_sha256"],
            "dataset": str(args.dataset),
        },
        outputs={
            "curves": sorted(p.name for p in out.glob("curve_*.csv")),
            "summary": str(out / "summary.json"),
            # informational; wall time is never part of any output contract
            "scoring_seconds_per_frame": round(per_frame, 4),
        },
        t_start=t_start,
    )
    print(f"scored {len(frames)} frames in {scoring_seconds:.1f}s ({per_frame:.2f}s/frame)")
    print(f"wrote curves and summary to {out}")
    return EXIT_OK


# ---------------------------------------------------------------- wiring

def _add_window_flags(p):
    p.add_argument("--window", type=int, default=96, help="window side in pixels")
    p.add_argument("--stride", type=int, default=8, help="window stride in pixels")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sonarprop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", default=None, help="scene config JSON (defaults built in)")
    p.add_argument("--frames", type=int, required=True, help="number of frames")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override the scene seed")
    p.add_argument("--threads", type=int, default=1, help="worker thread cap")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the window scorer on a dataset")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--lr", type=float, default=0.1, help="Adam learning rate")
    p.add_argument("--batch", type=int, default=32, help="mini-batch size")
    p.add_argument("--epochs", type=int, default=10, help="epoch cap")
    p.add_argument("--patience", type=int, default=3, help="early-stopping patience")
    p.add_argument("--negatives", type=int, default=20, help="negative crops per frame")
    p.add_argument("--seed", type=int, default=0, help="split/init/shuffle seed")
    p.add_argument("--threads", type=int, default=1, help="worker thread cap")
    _add_window_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("propose", help="write thresholded proposals as CSV")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", default=None, help="single PGM image")
    src.add_argument("--dataset", default=None, help="dataset directory")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--threshold", type=float, default=0.5, help="objectness threshold")
    p.add_argument("--nms", action="store_true", help="apply non-maximum suppression")
    p.add_argument("--nms-iou", type=float, default=0.5, help="NMS IoU threshold")
    p.add_argument("--overlay", default=None, help="write an outline overlay PGM (single image)")
    p.add_argument("--threads", type=int, default=1, help="worker thread cap")
    _add_window_flags(p)
    p.set_defaults(func=cmd_propose)

    p = sub.add_parser("heatmap", help="render an objectness heatmap for one image")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    p.add_argument("--image", required=True, help="input PGM image")
    p.add_argument("--out", required=True, help="output PGM path")
    _add_window_flags(p)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("eval", help="recall/proposal curves for learned and baseline")
    p.add_argument("--checkpoint", required=True, help="trained checkpoint")
    p.add_argument("--dataset", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--thresholds", default="0:1:0.05", help="grid start:stop:step, inclusive")
    p.add_argument("--split", choices=["test", "all"], default="test",
                   help="evaluate the held-out split or every frame")
    p.add_argument("--seed", type=int, default=0, help="split and baseline seed")
    p.add_argument("--nms-iou", type=float, default=0.5, help="IoU for the NMS curve")
    p.add_argument("--baseline", choices=["random", "none"], default="random",
                   help="reference curve to emit alongside the learned ones")
    p.add_argument("--threads", type=int, default=1, help="worker thread cap")
    _add_window_flags(p)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericError as exc:
        print(f"sonarprop: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DataError as exc:
        print(f"sonarprop: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"sonarprop: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
