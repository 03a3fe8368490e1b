"""Quantitative kernels: Pearson correlation, Jaccard index, instance
matching with detection precision and mAP, the centered sigmoid, and the
combined distance+semantic loss used to validate external training runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from io import StringIO
from typing import Optional, Sequence

import numpy as np

from .errors import (
    ConstantImageError,
    DimensionMismatchError,
    EmptyInputError,
    ThresholdTooLowError,
)
from .raster import BinaryMask, LabelMap, Raster, check_same_shape

# Detection precision is averaged over these ten IoU thresholds. Built as
# exact decimal fractions so the grid is {0.50, 0.55, ..., 0.95} verbatim.
MAP_THRESHOLDS: tuple[float, ...] = tuple((10 + i) / 20 for i in range(10))

METRIC_NAMES = ("iou", "map", "pcc")


def pcc(x: Raster, y: Raster) -> float:
    """Pearson correlation coefficient over all pixels.

    Covariance divided by the product of standard deviations; undefined
    (raises) when either image is constant.
    """
    check_same_shape(x, y)
    xs = x.samples.astype(np.float64).ravel()
    ys = y.samples.astype(np.float64).ravel()
    xc = xs - xs.mean()
    yc = ys - ys.mean()
    den = np.sqrt(np.sum(xc * xc)) * np.sqrt(np.sum(yc * yc))
    if den == 0.0:
        raise ConstantImageError("correlation undefined for a constant image")
    return float(np.sum(xc * yc) / den)


def iou(x: BinaryMask, y: BinaryMask) -> float:
    """Intersection over union of two masks; 1.0 when both are empty."""
    check_same_shape(x, y)
    union = np.count_nonzero(x.bits | y.bits)
    if union == 0:
        return 1.0
    return np.count_nonzero(x.bits & y.bits) / union


@dataclass(frozen=True)
class MatchResult:
    """Instance-level TP/FP/FN counts at one IoU threshold."""

    threshold: float
    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[int, int, float], ...]  # (gt label, pred label, iou)


def _pair_ious(gt: LabelMap, pred: LabelMap):
    """All overlapping (gt, pred) instance pairs with their IoU.

    Returns (gt labels, pred labels, ious, #gt instances, #pred instances).
    """
    g = gt.labels.ravel().astype(np.int64)
    p = pred.labels.ravel().astype(np.int64)
    gt_ids, gt_areas = np.unique(g[g > 0], return_counts=True)
    pred_ids, pred_areas = np.unique(p[p > 0], return_counts=True)
    both = (g > 0) & (p > 0)
    if not both.any():
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0, dtype=np.float64), len(gt_ids), len(pred_ids)
    stride = p.max() + 1
    keys, inter = np.unique(g[both] * stride + p[both], return_counts=True)
    gk = keys // stride
    pk = keys % stride
    ga = gt_areas[np.searchsorted(gt_ids, gk)]
    pa = pred_areas[np.searchsorted(pred_ids, pk)]
    ious = inter / (ga + pa - inter)
    return gk, pk, ious, len(gt_ids), len(pred_ids)


def _sorted_candidates(gk, pk, ious) -> list[tuple[int, int, float]]:
    return sorted(
        ((int(g), int(p), float(v)) for g, p, v in zip(gk, pk, ious)),
        key=lambda t: (-t[2], t[0], t[1]),
    )


def _greedy_tp(candidates: list[tuple[int, int, float]], tau: float) -> list[tuple[int, int, float]]:
    """Accept candidates with iou >= tau, each label at most once.

    For tau >= 0.5 distinct pairs can share a label only in the degenerate
    exact-half-overlap tie, which the deterministic order (iou descending,
    then labels ascending) resolves; everywhere else this equals taking
    all pairs.
    """
    used_g: set[int] = set()
    used_p: set[int] = set()
    kept = []
    for g, p, v in candidates:
        if v < tau:
            break
        if g in used_g or p in used_p:
            continue
        used_g.add(g)
        used_p.add(p)
        kept.append((g, p, v))
    return kept


def match_instances(gt: LabelMap, pred: LabelMap, tau: float) -> MatchResult:
    """Match instances whose pairwise IoU reaches tau (inclusive).

    For tau >= 0.5 matches are one-to-one; lower thresholds are rejected
    because no matching rule is defined for them.
    """
    check_same_shape(gt, pred)
    if tau < 0.5:
        raise ThresholdTooLowError(f"IoU threshold must be >= 0.5, got {tau}")
    gk, pk, ious, n_gt, n_pred = _pair_ious(gt, pred)
    pairs = tuple(sorted(_greedy_tp(_sorted_candidates(gk, pk, ious), tau)))
    tp = len(pairs)
    return MatchResult(threshold=tau, tp=tp, fp=n_pred - tp, fn=n_gt - tp, pairs=pairs)


def precision_at(gt: LabelMap, pred: LabelMap, tau: float) -> float:
    """Detection precision TP / (TP + FP + FN); 1.0 when both maps are empty."""
    m = match_instances(gt, pred, tau)
    total = m.tp + m.fp + m.fn
    return 1.0 if total == 0 else m.tp / total


def map_score(gt: LabelMap, pred: LabelMap) -> float:
    """Mean detection precision over the ten IoU thresholds 0.50 .. 0.95."""
    check_same_shape(gt, pred)
    gk, pk, ious, n_gt, n_pred = _pair_ious(gt, pred)
    candidates = _sorted_candidates(gk, pk, ious)
    total = 0.0
    for tau in MAP_THRESHOLDS:
        tp = len(_greedy_tp(candidates, tau))
        denom = tp + (n_pred - tp) + (n_gt - tp)
        total += 1.0 if denom == 0 else tp / denom
    return total / len(MAP_THRESHOLDS)


def shifted_sigmoid(v):
    """Sigmoid centered at 0.5: f(0.5) = 0.5 exactly.

    Accepts scalars or arrays; scalars come back as float.
    """
    arr = np.asarray(v, dtype=np.float64)
    with np.errstate(over="ignore"):
        out = 1.0 / (1.0 + np.exp(0.5 - arr))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LossInputs:
    """Predicted and target distance/semantic channels plus the balance factor."""

    y_d: Raster
    y_s: Raster
    t_d: Raster
    t_s: BinaryMask
    alpha: float = 2000.0

    def __post_init__(self):
        check_same_shape(self.y_d, self.y_s, self.t_d, self.t_s)
        # alpha = 0 is allowed as a degenerate test-only weighting (pure MSE)
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")


def combined_loss(inputs: LossInputs) -> float:
    """Pixel-mean MSE on the distance channel plus alpha times the
    pixel-mean binary cross-entropy with logits on the semantic channel.

    The BCE uses the numerically stable form
    max(z, 0) - z*t + log(1 + exp(-|z|)).
    """
    yd = inputs.y_d.samples.astype(np.float64)
    td = inputs.t_d.samples.astype(np.float64)
    mse = float(np.mean((yd - td) ** 2))
    z = inputs.y_s.samples.astype(np.float64)
    t = inputs.t_s.bits.astype(np.float64)
    bce = float(np.mean(np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))))
    return mse + inputs.alpha * bce


@dataclass(frozen=True)
class ImageRecord:
    """Per-image metric values; missing metrics stay None."""

    image_id: str
    pcc: Optional[float] = None
    iou: Optional[float] = None
    map: Optional[float] = None
    precisions: Optional[dict[float, float]] = None


@dataclass(frozen=True)
class MetricsReport:
    """Per-image records plus mean/std/count aggregates per metric."""

    records: tuple[ImageRecord, ...]
    aggregates: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json(self) -> str:
        images = []
        for rec in self.records:
            entry: dict = {"id": rec.image_id}
            for name in METRIC_NAMES:
                value = getattr(rec, name)
                if value is not None:
                    entry[name] = value
            if rec.precisions is not None:
                entry["precisions"] = {f"{tau:.2f}": v for tau, v in sorted(rec.precisions.items())}
            images.append(entry)
        return json.dumps({"images": images, "aggregate": self.aggregates}, indent=2)

    def to_csv(self) -> str:
        taus = sorted({tau for rec in self.records if rec.precisions for tau in rec.precisions})
        header = ["id", *METRIC_NAMES, *[f"p@{tau:.2f}" for tau in taus]]
        out = StringIO()
        out.write(",".join(header) + "\n")

        def fmt(v):
            return "" if v is None else repr(float(v))

        for rec in self.records:
            row = [rec.image_id]
            row += [fmt(getattr(rec, name)) for name in METRIC_NAMES]
            row += [fmt(rec.precisions.get(tau)) if rec.precisions else "" for tau in taus]
            out.write(",".join(row) + "\n")
        for stat in ("mean", "std", "count"):
            row = [stat]
            for name in METRIC_NAMES:
                agg = self.aggregates.get(name)
                row.append(fmt(agg[stat]) if agg else "")
            for tau in taus:
                vals = [r.precisions[tau] for r in self.records if r.precisions and tau in r.precisions]
                if not vals:
                    row.append("")
                elif stat == "mean":
                    row.append(fmt(float(np.mean(vals))))
                elif stat == "std":
                    row.append(fmt(float(np.std(vals))))
                else:
                    row.append(repr(len(vals)))
            out.write(",".join(row) + "\n")
        return out.getvalue()


def summarize(records: Sequence[ImageRecord]) -> MetricsReport:
    """Aggregate per-image records into mean and population std per metric.

    Records missing a metric are skipped for that metric; the count of
    contributing records is reported alongside.
    """
    if not records:
        raise EmptyInputError("summarize needs at least one record")
    aggregates: dict[str, dict[str, float]] = {}
    for name in METRIC_NAMES:
        values = [getattr(r, name) for r in records if getattr(r, name) is not None]
        if values:
            aggregates[name] = {
                "count": len(values),
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
            }
    return MetricsReport(records=tuple(records), aggregates=aggregates)
