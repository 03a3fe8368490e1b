"""Instance segmentation post-processing.

Threshold the semantic prediction, suppress shallow maxima of the distance
prediction with an h-maxima transform, take the surviving regional maxima
as seeds, and split the semantic mask into instances with a seeded
watershed on the distance relief.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _dispatch
from .errors import SeedOutsideMaskError
from .morphology import Connectivity, connected_components, h_maxima, regional_maxima
from .raster import BinaryMask, LabelMap, Raster, check_same_shape

ACTIVATIONS = ("standard", "shifted")


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs of the post-processing pipeline.

    ``h`` is the minimum contrast for a distance-map maximum to survive;
    ``activation`` selects how semantic logits map to probabilities:
    'standard' is the usual sigmoid, 'shifted' is centered at 0.5 for
    models whose raw output already lives in [0, 1].
    """

    h: float = 10.0
    activation: str = "standard"
    semantic_threshold: float = 0.5
    connectivity: Connectivity = Connectivity.EIGHT
    flood_on_hmax: bool = False

    def __post_init__(self):
        if self.h < 0:
            raise ValueError(f"h must be non-negative, got {self.h}")
        if not 0.0 < self.semantic_threshold < 1.0:
            raise ValueError(f"semantic threshold must be in (0, 1), got {self.semantic_threshold}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")


@dataclass(frozen=True)
class SeedSet:
    """Watershed seeds: one label per connected seed plateau."""

    seeds: LabelMap

    @property
    def count(self) -> int:
        return len(self.seeds.distinct_labels())


def threshold_semantic(pred: Raster, cfg: PipelineConfig) -> BinaryMask:
    """Binarize semantic scores at the configured probability threshold.

    A pixel is foreground iff its activated value reaches the threshold;
    both activations reduce to a closed-form cut on the raw value
    (v >= logit(t), shifted by 0.5 for the centered variant).
    """
    cut = math.log(cfg.semantic_threshold / (1.0 - cfg.semantic_threshold))
    if cfg.activation == "shifted":
        cut += 0.5
    return BinaryMask(pred.samples >= np.float32(cut))


def extract_seeds(dist: Raster, mask: BinaryMask, cfg: PipelineConfig) -> SeedSet:
    """Regional maxima of the h-maxima transform, restricted to the mask,
    one seed label per connected plateau."""
    check_same_shape(dist, mask)
    hmax = h_maxima(dist, cfg.h, cfg.connectivity)
    peaks = regional_maxima(hmax, cfg.connectivity)
    seeded = BinaryMask(peaks.bits & mask.bits)
    return SeedSet(connected_components(seeded, cfg.connectivity))


def seeded_watershed(
    relief: Raster,
    seeds: SeedSet,
    mask: BinaryMask,
    conn: Connectivity = Connectivity.EIGHT,
) -> LabelMap:
    """Flood the mask from the seeds, highest relief first.

    Every mask pixel reachable from a seed gets exactly one seed label;
    unseeded mask components stay background. Ties in relief flood in
    row-major index order, so results are bit-reproducible.
    """
    check_same_shape(relief, seeds.seeds, mask)
    seed_arr = seeds.seeds.labels
    if np.any((seed_arr > 0) & ~mask.bits):
        raise SeedOutsideMaskError("seed pixels must lie inside the mask")
    out = _dispatch.active().watershed_flood(relief.samples, seed_arr, mask.bits, conn.value)
    return LabelMap(out)


def instance_segment(dist_pred: Raster, semantic_pred: Raster, cfg: PipelineConfig) -> LabelMap:
    """Full post-processing: threshold, seed extraction, watershed."""
    check_same_shape(dist_pred, semantic_pred)
    mask = threshold_semantic(semantic_pred, cfg)
    seeds = extract_seeds(dist_pred, mask, cfg)
    relief = h_maxima(dist_pred, cfg.h, cfg.connectivity) if cfg.flood_on_hmax else dist_pred
    return seeded_watershed(relief, seeds, mask, cfg.connectivity)
