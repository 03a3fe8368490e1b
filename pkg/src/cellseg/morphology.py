"""Grayscale reconstruction, h-maxima, regional maxima, connected components
and per-instance Euclidean distance maps.

Border policy: the image frame counts as lower than everything for regional
maxima and as non-member for the distance map, so instances touching the
border get their distance to the border. Connectivity defaults to the
eight-neighborhood throughout.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import _dispatch
from .errors import MarkerExceedsMaskError, NegativeHError
from .raster import BinaryMask, LabelMap, Raster, check_same_shape


class Connectivity(Enum):
    FOUR = 4
    EIGHT = 8


def connected_components(mask: BinaryMask, conn: Connectivity = Connectivity.EIGHT) -> LabelMap:
    """Partition foreground into maximal connected sets.

    Labels are assigned 1..K in first-encounter raster-scan order, which
    keeps outputs reproducible for golden tests.
    """
    labels, _ = _dispatch.active().label_components(mask.bits, conn.value)
    return LabelMap(labels)


def reconstruct_by_dilation(
    marker: Raster, mask: Raster, conn: Connectivity = Connectivity.EIGHT
) -> Raster:
    """Morphological reconstruction by dilation of marker under mask.

    Returns the smallest image r with marker <= r <= mask that is stable
    under geodesic dilation (dilate, then pointwise min with mask).
    """
    check_same_shape(marker, mask)
    if np.any(marker.samples > mask.samples):
        raise MarkerExceedsMaskError("marker must not exceed mask anywhere")
    out = _dispatch.active().reconstruct_dilation(marker.samples, mask.samples, conn.value)
    return Raster(out)


def h_maxima(f: Raster, h: float, conn: Connectivity = Connectivity.EIGHT) -> Raster:
    """Suppress maxima of dynamic <= h: reconstruction of f-h under f.

    The subtraction is plain arithmetic; values may go negative.
    """
    if h < 0:
        raise NegativeHError(f"h must be non-negative, got {h}")
    marker = f.samples - np.float32(h)
    out = _dispatch.active().reconstruct_dilation(marker, f.samples, conn.value)
    return Raster(out)


def regional_maxima(f: Raster, conn: Connectivity = Connectivity.EIGHT) -> BinaryMask:
    """Pixels belonging to connected plateaus whose outer neighbors are all
    strictly lower. A constant image is one global plateau: all pixels set.
    """
    out = _dispatch.active().regional_maxima(f.samples, conn.value)
    return BinaryMask(out)


def distance_map(labels: LabelMap, normalize: bool = False) -> Raster:
    """Exact Euclidean distance from each instance pixel to the nearest
    pixel outside its instance; background stays 0.

    Other instances count as outside, so touching cells produce a
    low-valued ridge along their shared boundary. With ``normalize`` each
    instance is scaled to peak 1.0.
    """
    out = _dispatch.active().instance_edt(labels.labels)
    if normalize:
        out = out.copy()
        for k in labels.distinct_labels():
            sel = labels.labels == k
            peak = out[sel].max()
            if peak > 0:
                out[sel] /= peak
    return Raster(out)
