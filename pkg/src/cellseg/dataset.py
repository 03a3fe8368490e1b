"""Dataset preparation: random crops, instance filtering, train/test splits,
and a synthetic generator of quasi-circular instances used as the
end-to-end oracle for the post-processing pipeline.

All randomness is counter-based: each draw comes from a Philox stream
keyed by a hash of (seed, image id, index), so results are reproducible
regardless of call order or parallel scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import BadCountError, CropTooLargeError, PlacementFailureError
from .morphology import distance_map
from .raster import BinaryMask, LabelMap, Raster

Image2D = Union[Raster, LabelMap]


def _keyed_rng(*parts) -> np.random.Generator:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:16], "little")))


@dataclass(frozen=True)
class CropSpec:
    """How many square crops of which size to draw, and with which seed."""

    count: int = 5
    size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.size < 1:
            raise ValueError(f"size must be >= 1, got {self.size}")


def crop_offsets(
    width: int, height: int, spec: CropSpec, image_id: str = "", start_index: int = 0
) -> list[tuple[int, int]]:
    """Top-left corners for crops start_index .. start_index+count-1.

    Each corner is drawn uniformly from the valid positions by a stream
    keyed on (seed, image id, crop index); paired rasters crop identically
    by reusing the returned offsets.
    """
    if spec.size > width or spec.size > height:
        raise CropTooLargeError(f"crop size {spec.size} exceeds image {width}x{height}")
    offsets = []
    for idx in range(start_index, start_index + spec.count):
        rng = _keyed_rng(spec.seed, image_id, idx)
        x = int(rng.integers(0, width - spec.size + 1))
        y = int(rng.integers(0, height - spec.size + 1))
        offsets.append((x, y))
    return offsets


def crop_at(img: Image2D, x: int, y: int, size: int) -> Image2D:
    """Extract the size x size window with top-left corner (x, y)."""
    if isinstance(img, Raster):
        return Raster(img.samples[y : y + size, x : x + size])
    return LabelMap(img.labels[y : y + size, x : x + size])


def random_crops(
    img: Image2D, spec: CropSpec, image_id: str = ""
) -> list[tuple[Image2D, tuple[int, int]]]:
    """Draw spec.count random crops; returns (crop, (x, y)) pairs."""
    offsets = crop_offsets(img.width, img.height, spec, image_id)
    return [(crop_at(img, x, y, spec.size), (x, y)) for x, y in offsets]


def has_instances(l: LabelMap) -> bool:
    """True iff any positive label is present."""
    return bool(l.labels.max() > 0) if l.labels.size else False


def instance_bearing_crops(
    img: Raster, labels: LabelMap, spec: CropSpec, image_id: str = ""
) -> list[tuple[Raster, LabelMap, tuple[int, int]]]:
    """Paired crops that contain at least one instance.

    Candidate offsets are drawn at successive crop indices until count
    crops with instances are found, keeping the draw deterministic.
    """
    if img.shape != labels.shape:
        raise CropTooLargeError("image and labels must share dimensions")
    picked: list[tuple[Raster, LabelMap, tuple[int, int]]] = []
    one = CropSpec(count=1, size=spec.size, seed=spec.seed)
    idx = 0
    budget = 1000 * spec.count
    while len(picked) < spec.count and idx < budget:
        ((x, y),) = crop_offsets(img.width, img.height, one, image_id, start_index=idx)
        lab_crop = crop_at(labels, x, y, spec.size)
        if has_instances(lab_crop):
            picked.append((crop_at(img, x, y, spec.size), lab_crop, (x, y)))
        idx += 1
    if len(picked) < spec.count:
        raise PlacementFailureError(
            f"found only {len(picked)} of {spec.count} instance-bearing crops in {budget} draws"
        )
    return picked


def split_train_test(
    ids: Sequence[str], train_count: int, seed: int = 0
) -> tuple[list[str], list[str]]:
    """Deterministic shuffled partition into (train, test)."""
    if not 0 <= train_count <= len(ids):
        raise BadCountError(f"train_count {train_count} out of range for {len(ids)} ids")
    perm = _keyed_rng(seed, "split").permutation(len(ids))
    train = [ids[i] for i in perm[:train_count]]
    test = [ids[i] for i in perm[train_count:]]
    return train, test


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic image layout: quasi-circular instances that may touch but
    never overlap.

    Radii are drawn uniformly from the intersection of radius_range and
    peak_range: a disc of radius r has a distance peak in (r, r+1], so
    constraining r guarantees every instance's peak exceeds
    peak_range[0].
    """

    width: int
    height: int
    cells: int
    radius_range: tuple[int, int] = (12, 24)
    peak_range: tuple[float, float] = (12.0, 25.0)
    overlap: str = "touching"  # "touching" allows adjacency; "disjoint" forbids it
    seed: int = 0

    def __post_init__(self):
        if self.cells < 0:
            raise ValueError(f"cells must be >= 0, got {self.cells}")
        if self.overlap not in ("touching", "disjoint"):
            raise ValueError(f"overlap must be 'touching' or 'disjoint', got {self.overlap!r}")
        if self.cells > 0:
            lo, hi = self.sample_radii()
            if lo < 2:
                raise ValueError(f"radii must be >= 2, got lower bound {lo}")
            if lo > hi:
                raise ValueError(f"empty radius range [{lo}, {hi}]")
            if 2 * hi + 1 > min(self.width, self.height):
                raise ValueError(f"radius {hi} cannot fit a {self.width}x{self.height} canvas")

    def sample_radii(self) -> tuple[int, int]:
        lo = max(self.radius_range[0], math.ceil(self.peak_range[0]))
        hi = min(self.radius_range[1], math.floor(self.peak_range[1]))
        return lo, hi


def _disc_stamp(r: int) -> np.ndarray:
    span = np.arange(-r, r + 1)
    return span[:, None] ** 2 + span[None, :] ** 2 <= r * r


def _dilate8(stamp: np.ndarray) -> np.ndarray:
    padded = np.pad(stamp, 1)
    out = np.zeros_like(padded)
    h, w = padded.shape
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            out[max(0, dy) : h + min(0, dy), max(0, dx) : w + min(0, dx)] |= padded[
                max(0, -dy) : h + min(0, -dy), max(0, -dx) : w + min(0, -dx)
            ]
    return out


def synth_instances(spec: SynthSpec) -> tuple[LabelMap, Raster, BinaryMask]:
    """Generate (ground-truth labels, exact distance map, semantic mask).

    Instances are rasterized discs placed fully inside the frame at
    uniformly random centers; candidates overlapping (or, for the
    disjoint policy, touching) an existing instance are re-drawn, up to
    1000 attempts each before PlacementFailureError.
    """
    labels = np.zeros((spec.height, spec.width), dtype=np.int32)
    blocked = np.zeros_like(labels, dtype=bool)
    lo, hi = spec.sample_radii()
    rng = _keyed_rng(spec.seed, "synth")
    for cell in range(1, spec.cells + 1):
        for attempt in range(1000):
            r = int(rng.integers(lo, hi + 1))
            cx = int(rng.integers(r, spec.width - r))
            cy = int(rng.integers(r, spec.height - r))
            stamp = _disc_stamp(r)
            window = (slice(cy - r, cy + r + 1), slice(cx - r, cx + r + 1))
            if np.any(blocked[window] & stamp):
                continue
            labels[window][stamp] = cell
            if spec.overlap == "disjoint":
                grown = _dilate8(stamp)
                gwin = (
                    slice(max(cy - r - 1, 0), min(cy + r + 2, spec.height)),
                    slice(max(cx - r - 1, 0), min(cx + r + 2, spec.width)),
                )
                gy0 = max(cy - r - 1, 0) - (cy - r - 1)
                gx0 = max(cx - r - 1, 0) - (cx - r - 1)
                gh = gwin[0].stop - gwin[0].start
                gw = gwin[1].stop - gwin[1].start
                blocked[gwin] |= grown[gy0 : gy0 + gh, gx0 : gx0 + gw]
            else:
                blocked[window] |= stamp
            break
        else:
            raise PlacementFailureError(
                f"placed only {cell - 1} of {spec.cells} instances after 1000 attempts each"
            )
    gt = LabelMap(labels)
    return gt, distance_map(gt), BinaryMask(labels > 0)


def write_crop_manifest(
    path, entries: Iterable[tuple[str, int, int, int, int]]
) -> None:
    """Write crop records as CSV rows (image id, crop index, x, y, size)."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "crop_index", "x", "y", "size"])
        for row in entries:
            writer.writerow(row)
