"""Batch command-line frontend.

JSON results go to standard output, diagnostics to standard error. Exit
codes: 0 success, 2 bad flags or invalid request, 3 file/format problems,
4 dimension mismatch, 5 constant image (Pearson correlation undefined).
``CELLSEG_THREADS`` caps manifest parallelism (0 or unset = auto).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    CropSpec,
    SynthSpec,
    crop_at,
    crop_offsets,
    has_instances,
    instance_bearing_crops,
    synth_instances,
    write_crop_manifest,
)
from .errors import (
    CellsegError,
    ConstantImageError,
    DimensionMismatchError,
    LabelOverflowError,
    SampleRangeError,
)
from .metrics import (
    MAP_THRESHOLDS,
    ImageRecord,
    LossInputs,
    combined_loss,
    iou,
    map_score,
    pcc,
    precision_at,
    summarize,
)
from .morphology import Connectivity, distance_map
from .pipeline import PipelineConfig, instance_segment
from .raster import (
    BinaryMask,
    LabelMap,
    ZStack,
    load_labels,
    load_raster,
    max_project,
    save_labels,
    save_raster,
)

MAP_GRID_HELP = "mAP averages detection precision over the 10 IoU thresholds 0.50, 0.55, ... 0.95"


class UsageError(Exception):
    pass


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload) + "\n")


def _out_format(path) -> str:
    return "png16" if str(path).lower().endswith(".png") else "ras"


def _pipeline_config(args) -> PipelineConfig:
    if args.h < 0:
        raise UsageError(f"--h must be non-negative, got {args.h}")
    if not 0.0 < args.threshold < 1.0:
        raise UsageError(f"--threshold must be in (0, 1), got {args.threshold}")
    return PipelineConfig(
        h=args.h,
        activation=args.activation,
        semantic_threshold=args.threshold,
        connectivity=Connectivity(args.connectivity),
        flood_on_hmax=args.flood_on_hmax,
    )


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--h", type=float, default=10.0, help="h-maxima suppression depth (default: 10)")
    p.add_argument(
        "--threshold", type=float, default=0.5, help="semantic probability cut (default: 0.5)"
    )
    p.add_argument(
        "--activation",
        choices=("standard", "shifted"),
        default="standard",
        help="semantic activation: plain sigmoid or the variant centered at 0.5 (default: standard)",
    )
    p.add_argument(
        "--connectivity",
        type=int,
        choices=(4, 8),
        default=8,
        help="pixel neighborhood (default: 8)",
    )
    p.add_argument(
        "--flood-on-hmax",
        action="store_true",
        help="flood the watershed on the h-maxima transform instead of the raw distance map",
    )


def cmd_postprocess(args) -> int:
    cfg = _pipeline_config(args)
    dist = load_raster(args.distance)
    semantic = load_raster(args.semantic)
    labels = instance_segment(dist, semantic, cfg)
    save_labels(labels, args.out, _out_format(args.out))
    _emit({"instances": len(labels.distinct_labels())})
    return 0


def _load_mask(path) -> BinaryMask:
    return BinaryMask(load_labels(path).labels > 0)


def _row_record(row: dict, metric: str, cfg: PipelineConfig):
    """Evaluate one manifest row; returns (record, iou intersection/union or None)."""
    parts = None
    rid = row["image_id"]
    if metric == "pcc":
        value = pcc(load_raster(row["gt"]), load_raster(row["pred"]))
        return ImageRecord(image_id=rid, pcc=value), parts
    gt = load_labels(row["gt"])
    if row.get("pred"):
        pred = load_labels(row["pred"])
    elif row.get("dist") and row.get("semantic"):
        pred = instance_segment(load_raster(row["dist"]), load_raster(row["semantic"]), cfg)
    else:
        raise UsageError(f"row {rid}: need a pred path, or dist and semantic paths")
    if metric == "iou":
        gm = BinaryMask(gt.labels > 0)
        pm = BinaryMask(pred.labels > 0)
        inter = int(np.count_nonzero(gm.bits & pm.bits))
        union = int(np.count_nonzero(gm.bits | pm.bits))
        return ImageRecord(image_id=rid, iou=iou(gm, pm)), (inter, union)
    precisions = {tau: precision_at(gt, pred, tau) for tau in MAP_THRESHOLDS}
    value = sum(precisions.values()) / len(precisions)
    return ImageRecord(image_id=rid, map=value, precisions=precisions), parts


def _read_manifest(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"{path}: empty manifest")
    ids = [r.get("image_id") for r in rows]
    if None in ids or len(set(ids)) != len(ids):
        raise UsageError(f"{path}: manifest needs unique image_id values")
    for row in rows:
        for key in ("gt", "pred", "dist", "semantic"):
            p = row.get(key)
            if p and not Path(p).exists():
                raise FileNotFoundError(f"{path}: row {row['image_id']}: missing file {p}")
    return rows


def _thread_count() -> int:
    raw = os.environ.get("CELLSEG_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"CELLSEG_THREADS must be an integer, got {raw!r}")
    return n if n > 0 else (os.cpu_count() or 1)


def cmd_evaluate(args) -> int:
    cfg = _pipeline_config(args)
    if args.manifest:
        rows = _read_manifest(args.manifest)
        with ThreadPoolExecutor(max_workers=min(_thread_count(), len(rows))) as pool:
            results = list(pool.map(lambda r: _row_record(r, args.metric, cfg), rows))
        report = summarize([rec for rec, _ in results])
        if args.pooled and args.metric == "iou":
            inter = sum(p[0] for _, p in results if p)
            union = sum(p[1] for _, p in results if p)
            report.aggregates["iou"]["pooled"] = 1.0 if union == 0 else inter / union
        if args.json:
            Path(args.json).write_text(report.to_json() + "\n")
        if args.csv:
            Path(args.csv).write_text(report.to_csv())
        sys.stdout.write(report.to_json() + "\n")
        return 0
    if not (args.gt and args.pred):
        raise UsageError("need --gt and --pred, or --manifest")
    if args.metric == "pcc":
        value = pcc(load_raster(args.gt), load_raster(args.pred))
    elif args.metric == "iou":
        value = iou(_load_mask(args.gt), _load_mask(args.pred))
    else:
        value = map_score(load_labels(args.gt), load_labels(args.pred))
    _emit({"metric": args.metric, "value": value})
    return 0


def cmd_loss(args) -> int:
    if args.alpha <= 0:
        raise UsageError(f"--alpha must be positive, got {args.alpha}")
    inputs = LossInputs(
        y_d=load_raster(args.pred_dist),
        y_s=load_raster(args.pred_logits),
        t_d=load_raster(args.target_dist),
        t_s=BinaryMask(load_labels(args.target_mask).labels > 0),
        alpha=args.alpha,
    )
    _emit({"metric": "combined_loss", "value": combined_loss(inputs)})
    return 0


def cmd_distmap(args) -> int:
    labels = load_labels(args.labels)
    dist = distance_map(labels, normalize=args.normalize)
    save_raster(dist, args.out, _out_format(args.out))
    _emit({"width": dist.width, "height": dist.height, "peak": float(dist.samples.max())})
    return 0


def cmd_project(args) -> int:
    stack = ZStack(tuple(load_raster(p) for p in args.planes))
    out = max_project(stack)
    save_raster(out, args.out, _out_format(args.out))
    _emit({"planes": len(stack.planes)})
    return 0


def cmd_crop(args) -> int:
    image = load_raster(args.image)
    spec = CropSpec(count=args.count, size=args.size, seed=args.seed)
    image_id = args.image_id or Path(args.image).stem
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    if args.require_instances:
        if not args.labels:
            raise UsageError("--require-instances needs --labels")
        triples = instance_bearing_crops(image, load_labels(args.labels), spec, image_id)
        for idx, (img_crop, lab_crop, (x, y)) in enumerate(triples):
            save_raster(img_crop, out_dir / f"{image_id}_crop{idx}.ras", "ras")
            save_labels(lab_crop, out_dir / f"{image_id}_crop{idx}_labels.ras", "ras")
            entries.append((image_id, idx, x, y, spec.size))
    else:
        labels = load_labels(args.labels) if args.labels else None
        if labels is not None and labels.shape != image.shape:
            raise DimensionMismatchError("image and labels must share dimensions")
        for idx, (x, y) in enumerate(crop_offsets(image.width, image.height, spec, image_id)):
            save_raster(crop_at(image, x, y, spec.size), out_dir / f"{image_id}_crop{idx}.ras", "ras")
            if labels is not None:
                save_labels(
                    crop_at(labels, x, y, spec.size),
                    out_dir / f"{image_id}_crop{idx}_labels.ras",
                    "ras",
                )
            entries.append((image_id, idx, x, y, spec.size))
    if args.manifest:
        write_crop_manifest(args.manifest, entries)
    _emit({"crops": len(entries)})
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        width=args.width,
        height=args.height,
        cells=args.cells,
        radius_range=(args.radius_min, args.radius_max),
        peak_range=(args.peak_min, args.peak_max),
        overlap=args.policy,
        seed=args.seed,
    )
    gt, dist, mask = synth_instances(spec)
    if args.out_gt:
        save_labels(gt, args.out_gt, _out_format(args.out_gt))
    if args.out_dist:
        save_raster(dist, args.out_dist, _out_format(args.out_dist))
    if args.out_mask:
        save_labels(LabelMap(mask.bits.astype(np.int32)), args.out_mask, _out_format(args.out_mask))
    _emit({"instances": len(gt.distinct_labels())})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cellseg",
        description="Instance segmentation post-processing, distance-map targets and scoring.",
        epilog=MAP_GRID_HELP + ".",
    )
    parser.add_argument("--version", action="version", version=f"cellseg {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser(
        "postprocess",
        help="split a semantic prediction into instances via h-maxima + watershed",
        description="Threshold the semantic prediction, seed from the h-maxima of the "
        "distance prediction, and split the mask with a seeded watershed.",
    )
    p.add_argument("--distance", required=True, help="predicted distance map (PNG or RAS)")
    p.add_argument("--semantic", required=True, help="predicted semantic scores (PNG or RAS)")
    p.add_argument("--out", required=True, help="output instance label map (.png or .ras)")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser(
        "evaluate",
        help="score predictions (map, iou, or pcc)",
        description="Score a single gt/pred pair, or every row of a manifest CSV "
        "(columns: image_id, gt, pred [, dist, semantic]). " + MAP_GRID_HELP + ".",
    )
    p.add_argument("--gt", help="ground-truth path")
    p.add_argument("--pred", help="prediction path")
    p.add_argument(
        "--metric",
        choices=("map", "iou", "pcc"),
        default="map",
        help="metric to compute (default: map; grid 0.50..0.95 in steps of 0.05)",
    )
    p.add_argument("--manifest", help="CSV manifest to score row by row")
    p.add_argument("--json", help="also write the report as JSON to this path")
    p.add_argument("--csv", help="also write the report as CSV to this path")
    p.add_argument(
        "--pooled",
        action="store_true",
        help="additionally pool IoU pixel counts across all images (manifest mode)",
    )
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "loss",
        help="combined MSE + alpha * BCE-with-logits loss of a prediction pair",
        description="Mean squared error on the distance channel plus alpha times "
        "binary cross-entropy with logits on the semantic channel.",
    )
    p.add_argument("--pred-dist", required=True, help="predicted distance raster")
    p.add_argument("--pred-logits", required=True, help="predicted semantic logits raster")
    p.add_argument("--target-dist", required=True, help="target distance raster")
    p.add_argument("--target-mask", required=True, help="target semantic mask (labels or 0/1)")
    p.add_argument("--alpha", type=float, default=2000.0, help="BCE weight (default: 2000)")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser(
        "distmap",
        help="per-instance Euclidean distance map of a label image",
        description="Exact distance from each instance pixel to the nearest pixel "
        "outside its instance; background stays 0.",
    )
    p.add_argument("--labels", required=True, help="instance label map")
    p.add_argument("--out", required=True, help="output raster (.png or .ras)")
    p.add_argument("--normalize", action="store_true", help="scale each instance to peak 1.0")
    p.set_defaults(func=cmd_distmap)

    p = sub.add_parser(
        "project",
        help="maximum intensity projection of a z-stack",
        description="Pixelwise maximum over equally sized focal planes.",
    )
    p.add_argument("--planes", nargs="+", required=True, help="plane rasters, in order")
    p.add_argument("--out", required=True, help="output raster (.png or .ras)")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser(
        "crop",
        help="draw deterministic random crops from an image (and paired labels)",
        description="Crop corners are drawn from a counter-based stream keyed by "
        "(seed, image id, crop index), so outputs never depend on scheduling.",
    )
    p.add_argument("--image", required=True, help="source raster")
    p.add_argument("--labels", help="paired label map cropped at identical offsets")
    p.add_argument("--size", type=int, default=512, help="square crop side (default: 512)")
    p.add_argument("--count", type=int, default=5, help="crops per image (default: 5)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default: 0)")
    p.add_argument("--image-id", help="id used in filenames and the RNG key (default: image stem)")
    p.add_argument("--out-dir", required=True, help="directory for the crop files")
    p.add_argument("--manifest", help="write a crop manifest CSV here")
    p.add_argument(
        "--require-instances",
        action="store_true",
        help="keep drawing until every crop contains at least one instance (needs --labels)",
    )
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser(
        "synth",
        help="generate a synthetic labeled image with its exact distance map",
        description="Places quasi-circular instances that may touch but never overlap; "
        "writes ground-truth labels, distance map and semantic mask.",
    )
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--cells", type=int, default=30, help="instances to place (default: 30)")
    p.add_argument("--radius-min", type=int, default=12)
    p.add_argument("--radius-max", type=int, default=24)
    p.add_argument("--peak-min", type=float, default=12.0, help="guaranteed distance peak lower bound")
    p.add_argument("--peak-max", type=float, default=25.0)
    p.add_argument("--policy", choices=("touching", "disjoint"), default="touching")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-gt", help="ground-truth label map path")
    p.add_argument("--out-dist", help="distance map path")
    p.add_argument("--out-mask", help="semantic mask path")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ConstantImageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except (SampleRangeError, LabelOverflowError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CellsegError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
