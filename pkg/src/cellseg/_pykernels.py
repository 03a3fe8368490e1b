"""Pure numpy implementations of the hot per-pixel kernels.

This module mirrors the compiled extension ``cellseg._kernels`` function for
function and is selected at import time when the extension is missing (or
when ``CELLSEG_PURE=1``). Both lanes must produce identical outputs; the
test suite checks them against each other and against naive oracles.

All functions take plain numpy arrays (float32 / int32 / bool) that have
already been validated by the public API layer.
"""

from __future__ import annotations

import heapq

import numpy as np

_OFFSETS = {
    4: ((-1, 0), (0, -1), (0, 1), (1, 0)),
    8: ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)),
}


def _neighbor_max(a: np.ndarray, conn: int, include_center: bool) -> np.ndarray:
    """Pixelwise max over the conn-neighborhood; out-of-frame counts as -inf."""
    h, w = a.shape
    padded = np.full((h + 2, w + 2), -np.inf, dtype=a.dtype)
    padded[1:-1, 1:-1] = a
    views = [padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] for dy, dx in _OFFSETS[conn]]
    if include_center:
        views.append(a)
    return np.maximum.reduce(views)


def reconstruct_dilation(marker: np.ndarray, mask: np.ndarray, conn: int) -> np.ndarray:
    """Fixed point of geodesic dilation of marker under mask."""
    r = np.array(marker, dtype=np.float32, copy=True)
    while True:
        grown = _neighbor_max(r, conn, include_center=True)
        np.minimum(grown, mask, out=grown)
        if np.array_equal(grown, r):
            return grown
        r = grown


def regional_maxima(f: np.ndarray, conn: int) -> np.ndarray:
    """Boolean mask of plateaus whose outer neighbors are all strictly lower.

    The image frame counts as lower than everything, so plateaus touching
    the border can still be maxima.
    """
    h, w = f.shape
    suppressed = _neighbor_max(f, conn, include_center=False) > f
    # A plateau with any suppressed member is entirely suppressed: spread
    # suppression across equal-valued neighbors until stable.
    padded_v = np.full((h + 2, w + 2), np.nan, dtype=f.dtype)
    padded_v[1:-1, 1:-1] = f
    shifted_vals = [
        padded_v[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] for dy, dx in _OFFSETS[conn]
    ]
    equal = [sv == f for sv in shifted_vals]
    while True:
        padded_s = np.zeros((h + 2, w + 2), dtype=bool)
        padded_s[1:-1, 1:-1] = suppressed
        grown = suppressed.copy()
        for (dy, dx), eq in zip(_OFFSETS[conn], equal):
            grown |= padded_s[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w] & eq
        if np.array_equal(grown, suppressed):
            return ~suppressed
        suppressed = grown


def label_components(mask: np.ndarray, conn: int) -> tuple[np.ndarray, int]:
    """Label connected foreground regions 1..K in raster-scan encounter order."""
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    flat_mask = mask.ravel()
    flat_labels = labels.ravel()
    offsets = _OFFSETS[conn]
    count = 0
    for start in np.flatnonzero(flat_mask):
        if flat_labels[start]:
            continue
        count += 1
        flat_labels[start] = count
        stack = [int(start)]
        while stack:
            idx = stack.pop()
            y, x = divmod(idx, w)
            for dy, dx in offsets:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w:
                    nidx = ny * w + nx
                    if flat_mask[nidx] and not flat_labels[nidx]:
                        flat_labels[nidx] = count
                        stack.append(nidx)
    return labels, count


def _edt_squared(feature: np.ndarray) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest True pixel.

    Two-pass algorithm: per-column nearest feature distance, then a
    per-row minimization over column parabolas. Every column must contain
    a feature pixel (callers guarantee a feature ring around the window).
    """
    h, w = feature.shape
    inf = h + w
    g = np.where(feature, 0, inf).astype(np.int64)
    for i in range(1, h):
        np.minimum(g[i], g[i - 1] + 1, out=g[i])
    for i in range(h - 2, -1, -1):
        np.minimum(g[i], g[i + 1] + 1, out=g[i])
    g2 = g * g
    xs = np.arange(w, dtype=np.int64)
    sq = (xs[:, None] - xs[None, :]) ** 2  # sq[x, j] = (j - x)^2
    d2 = np.empty((h, w), dtype=np.int64)
    block = max(1, (1 << 22) // max(1, w * w))
    for s in range(0, h, block):
        e = min(h, s + block)
        d2[s:e] = (g2[s:e, :, None] + sq[None, :, :]).min(axis=1)
    return d2


def instance_edt(labels: np.ndarray) -> np.ndarray:
    """Per-instance exact EDT: distance to the nearest pixel of a different
    label or to the frame, 0 on background.

    Each label is processed inside its bounding box padded by one pixel;
    the pad ring consists entirely of non-members (possibly virtual
    out-of-frame pixels), which keeps the window computation exact.
    """
    h, w = labels.shape
    out = np.zeros((h, w), dtype=np.float32)
    for k in np.unique(labels):
        if k <= 0:
            continue
        member = labels == k
        rows = np.flatnonzero(member.any(axis=1))
        cols = np.flatnonzero(member.any(axis=0))
        vr0, vr1 = rows[0] - 1, rows[-1] + 1
        vc0, vc1 = cols[0] - 1, cols[-1] + 1
        feature = np.ones((vr1 - vr0 + 1, vc1 - vc0 + 1), dtype=bool)
        fr0, fr1 = max(vr0, 0), min(vr1, h - 1)
        fc0, fc1 = max(vc0, 0), min(vc1, w - 1)
        sub = labels[fr0 : fr1 + 1, fc0 : fc1 + 1]
        feature[fr0 - vr0 : fr1 - vr0 + 1, fc0 - vc0 : fc1 - vc0 + 1] = sub != k
        d2 = _edt_squared(feature)
        inside = d2[fr0 - vr0 : fr1 - vr0 + 1, fc0 - vc0 : fc1 - vc0 + 1]
        view = out[fr0 : fr1 + 1, fc0 : fc1 + 1]
        sel = sub == k
        view[sel] = np.sqrt(inside[sel])
    return out


def watershed_flood(
    relief: np.ndarray, seeds: np.ndarray, mask: np.ndarray, conn: int
) -> np.ndarray:
    """Priority flood from labeled seeds, high relief first.

    Every pixel is queued at most once, with the label of whoever queued
    it; ties in relief pop in row-major index order, which makes the
    result independent of scheduling.
    """
    h, w = relief.shape
    out = np.where(mask, seeds, 0).astype(np.int32)
    flat_out = out.ravel()
    flat_mask = mask.ravel()
    flat_rel = relief.ravel()
    queued = flat_out > 0
    offsets = _OFFSETS[conn]
    heap = [(-float(flat_rel[i]), int(i)) for i in np.flatnonzero(queued)]
    heapq.heapify(heap)
    while heap:
        _, idx = heapq.heappop(heap)
        label = flat_out[idx]
        y, x = divmod(idx, w)
        for dy, dx in offsets:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w:
                nidx = ny * w + nx
                if flat_mask[nidx] and not queued[nidx]:
                    queued[nidx] = True
                    flat_out[nidx] = label
                    heapq.heappush(heap, (-float(flat_rel[nidx]), nidx))
    return out
