# cython: language_level=3
"""Compiled implementations of the hot per-pixel kernels.

Same contract as ``cellseg._pykernels``: identical outputs, bit for bit.
Reconstruction uses the raster/anti-raster sweep + FIFO queue hybrid;
the per-instance EDT runs an exact two-pass transform (column scan +
row-wise parabola envelope) inside each label's padded bounding box;
the watershed floods through a binary max-heap keyed on (relief, -index).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from libcpp.queue cimport queue, priority_queue
from libcpp.pair cimport pair
from libcpp.vector cimport vector

cnp.import_array()

ctypedef cnp.float32_t f32
ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64
ctypedef cnp.uint8_t u8

cdef int _offsets(int conn, int* dy, int* dx) nogil:
    if conn == 4:
        dy[0] = -1; dx[0] = 0
        dy[1] = 0;  dx[1] = -1
        dy[2] = 0;  dx[2] = 1
        dy[3] = 1;  dx[3] = 0
        return 4
    dy[0] = -1; dx[0] = -1
    dy[1] = -1; dx[1] = 0
    dy[2] = -1; dx[2] = 1
    dy[3] = 0;  dx[3] = -1
    dy[4] = 0;  dx[4] = 1
    dy[5] = 1;  dx[5] = -1
    dy[6] = 1;  dx[6] = 0
    dy[7] = 1;  dx[7] = 1
    return 8


def reconstruct_dilation(marker, mask, int conn):
    """Fixed point of geodesic dilation of marker under mask."""
    cdef cnp.ndarray[f32, ndim=2] r = np.array(marker, dtype=np.float32, copy=True, order="C")
    cdef cnp.ndarray[f32, ndim=2] m = np.ascontiguousarray(mask, dtype=np.float32)
    cdef Py_ssize_t h = r.shape[0], w = r.shape[1]
    cdef int dy[8]
    cdef int dx[8]
    cdef int n = _offsets(conn, dy, dx)
    cdef int half = n // 2  # first half: neighbors preceding p in raster order
    cdef Py_ssize_t y, x, ny, nx
    cdef int k
    cdef f32 v, best
    cdef queue[i64] fifo
    cdef i64 idx

    # forward raster sweep using already-visited neighbors
    for y in range(h):
        for x in range(w):
            best = r[y, x]
            for k in range(half):
                ny = y + dy[k]; nx = x + dx[k]
                if 0 <= ny < h and 0 <= nx < w:
                    v = r[ny, nx]
                    if v > best:
                        best = v
            if best > m[y, x]:
                best = m[y, x]
            r[y, x] = best

    # backward sweep; queue pixels whose downstream neighbors could still grow
    for y in range(h - 1, -1, -1):
        for x in range(w - 1, -1, -1):
            best = r[y, x]
            for k in range(half, n):
                ny = y + dy[k]; nx = x + dx[k]
                if 0 <= ny < h and 0 <= nx < w:
                    v = r[ny, nx]
                    if v > best:
                        best = v
            if best > m[y, x]:
                best = m[y, x]
            r[y, x] = best
            for k in range(half, n):
                ny = y + dy[k]; nx = x + dx[k]
                if 0 <= ny < h and 0 <= nx < w:
                    if r[ny, nx] < best and r[ny, nx] < m[ny, nx]:
                        fifo.push(y * w + x)
                        break

    while not fifo.empty():
        idx = fifo.front(); fifo.pop()
        y = idx // w; x = idx % w
        v = r[y, x]
        for k in range(n):
            ny = y + dy[k]; nx = x + dx[k]
            if 0 <= ny < h and 0 <= nx < w:
                if r[ny, nx] < v and r[ny, nx] != m[ny, nx]:
                    best = v if v < m[ny, nx] else m[ny, nx]
                    if best > r[ny, nx]:
                        r[ny, nx] = best
                        fifo.push(ny * w + nx)
    return r


def regional_maxima(f, int conn):
    """Boolean mask of plateaus with all outer neighbors strictly lower."""
    cdef cnp.ndarray[f32, ndim=2] a = np.ascontiguousarray(f, dtype=np.float32)
    cdef Py_ssize_t h = a.shape[0], w = a.shape[1]
    cdef cnp.ndarray[u8, ndim=2] visited = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.ndarray[u8, ndim=2] out = np.zeros((h, w), dtype=np.uint8)
    cdef int dy[8]
    cdef int dx[8]
    cdef int n = _offsets(conn, dy, dx)
    cdef Py_ssize_t y, x, ny, nx, py, px
    cdef int k
    cdef f32 v
    cdef bint is_max
    cdef vector[i64] stack
    cdef vector[i64] members
    cdef i64 idx

    for y in range(h):
        for x in range(w):
            if visited[y, x]:
                continue
            v = a[y, x]
            is_max = True
            stack.clear()
            members.clear()
            stack.push_back(y * w + x)
            visited[y, x] = 1
            while not stack.empty():
                idx = stack.back(); stack.pop_back()
                members.push_back(idx)
                py = idx // w; px = idx % w
                for k in range(n):
                    ny = py + dy[k]; nx = px + dx[k]
                    if 0 <= ny < h and 0 <= nx < w:
                        if a[ny, nx] > v:
                            is_max = False
                        elif a[ny, nx] == v and not visited[ny, nx]:
                            visited[ny, nx] = 1
                            stack.push_back(ny * w + nx)
            if is_max:
                for k in range(<int> members.size()):
                    idx = members[k]
                    out[idx // w, idx % w] = 1
    return out.view(bool)


def label_components(mask, int conn):
    """Label foreground regions 1..K in raster-scan encounter order."""
    cdef cnp.ndarray[u8, ndim=2] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef cnp.ndarray[i32, ndim=2] labels = np.zeros((h, w), dtype=np.int32)
    cdef int dy[8]
    cdef int dx[8]
    cdef int n = _offsets(conn, dy, dx)
    cdef Py_ssize_t y, x, ny, nx, py, px
    cdef int k
    cdef i32 count = 0
    cdef vector[i64] stack
    cdef i64 idx

    for y in range(h):
        for x in range(w):
            if not m[y, x] or labels[y, x]:
                continue
            count += 1
            labels[y, x] = count
            stack.clear()
            stack.push_back(y * w + x)
            while not stack.empty():
                idx = stack.back(); stack.pop_back()
                py = idx // w; px = idx % w
                for k in range(n):
                    ny = py + dy[k]; nx = px + dx[k]
                    if 0 <= ny < h and 0 <= nx < w:
                        if m[ny, nx] and not labels[ny, nx]:
                            labels[ny, nx] = count
                            stack.push_back(ny * w + nx)
    return labels, int(count)


cdef void _edt_window(i32[:, ::1] dense, Py_ssize_t h, Py_ssize_t w, i32 k,
                      Py_ssize_t vr0, Py_ssize_t vr1, Py_ssize_t vc0, Py_ssize_t vc1,
                      f32[:, ::1] out):
    """Exact EDT of the non-member set inside one padded bounding box.

    Window coordinates are virtual: the one-pixel pad ring may lie outside
    the frame, in which case it still counts as non-member.
    """
    cdef Py_ssize_t wh = vr1 - vr0 + 1, ww = vc1 - vc0 + 1
    cdef cnp.ndarray[i64, ndim=2] g = np.empty((wh, ww), dtype=np.int64)
    cdef i64[:, ::1] gv = g
    cdef Py_ssize_t i, j, gy, gx, q
    cdef i64 inf = wh + ww
    cdef bint feature

    for i in range(wh):
        gy = vr0 + i
        for j in range(ww):
            gx = vc0 + j
            if gy < 0 or gy >= h or gx < 0 or gx >= w:
                feature = True
            else:
                feature = dense[gy, gx] != k
            gv[i, j] = 0 if feature else inf
    for i in range(1, wh):
        for j in range(ww):
            if gv[i - 1, j] + 1 < gv[i, j]:
                gv[i, j] = gv[i - 1, j] + 1
    for i in range(wh - 2, -1, -1):
        for j in range(ww):
            if gv[i + 1, j] + 1 < gv[i, j]:
                gv[i, j] = gv[i + 1, j] + 1

    # row-wise lower envelope of parabolas x -> (j-x)^2 + g[i,x]^2
    cdef cnp.ndarray[i64, ndim=1] vsite = np.empty(ww, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(ww + 1, dtype=np.float64)
    cdef i64[::1] vs = vsite
    cdef cnp.float64_t[::1] zv = z
    cdef Py_ssize_t top
    cdef double s
    cdef i64 fq, fv, d2
    cdef double BIG = 1e300

    for i in range(wh):
        top = 0
        vs[0] = 0
        zv[0] = -BIG
        zv[1] = BIG
        for q in range(1, ww):
            fq = q * q + gv[i, q] * gv[i, q]
            while True:
                fv = vs[top] * vs[top] + gv[i, vs[top]] * gv[i, vs[top]]
                s = (fq - fv) / (2.0 * (q - vs[top]))
                if s <= zv[top]:
                    top -= 1
                else:
                    break
            top += 1
            vs[top] = q
            zv[top] = s
            zv[top + 1] = BIG
        top = 0
        for q in range(ww):
            while zv[top + 1] < q:
                top += 1
            gy = vr0 + i
            gx = vc0 + q
            if 0 <= gy < h and 0 <= gx < w and dense[gy, gx] == k:
                d2 = (q - vs[top]) * (q - vs[top]) + gv[i, vs[top]] * gv[i, vs[top]]
                out[gy, gx] = <f32> sqrt(<double> d2)


def instance_edt(labels):
    """Per-instance exact EDT; other labels and the frame count as outside."""
    cdef cnp.ndarray[i32, ndim=2] lab = np.ascontiguousarray(labels, dtype=np.int32)
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1]
    cdef cnp.ndarray[f32, ndim=2] out = np.zeros((h, w), dtype=np.float32)

    uniq = np.unique(lab)
    uniq = uniq[uniq > 0]
    cdef Py_ssize_t nk = uniq.shape[0]
    if nk == 0:
        return out
    flat = np.searchsorted(uniq, lab.ravel()).astype(np.int32) + 1
    flat[lab.ravel() == 0] = 0
    cdef cnp.ndarray[i32, ndim=2] dense = flat.reshape(h, w)

    cdef cnp.ndarray[i64, ndim=1] minr = np.full(nk + 1, h, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] maxr = np.full(nk + 1, -1, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] minc = np.full(nk + 1, w, dtype=np.int64)
    cdef cnp.ndarray[i64, ndim=1] maxc = np.full(nk + 1, -1, dtype=np.int64)
    cdef i64[::1] r0 = minr, r1 = maxr, c0 = minc, c1 = maxc
    cdef i32[:, ::1] dv = dense
    cdef f32[:, ::1] ov = out
    cdef Py_ssize_t y, x
    cdef i32 k

    for y in range(h):
        for x in range(w):
            k = dv[y, x]
            if k > 0:
                if y < r0[k]: r0[k] = y
                if y > r1[k]: r1[k] = y
                if x < c0[k]: c0[k] = x
                if x > c1[k]: c1[k] = x

    for k in range(1, <i32> nk + 1):
        _edt_window(dv, h, w, k, r0[k] - 1, r1[k] + 1, c0[k] - 1, c1[k] + 1, ov)
    return out


def watershed_flood(relief, seeds, mask, int conn):
    """Priority flood from labeled seeds, highest relief first, ties by index."""
    cdef cnp.ndarray[f32, ndim=2] rel = np.ascontiguousarray(relief, dtype=np.float32)
    cdef cnp.ndarray[i32, ndim=2] seed = np.ascontiguousarray(seeds, dtype=np.int32)
    cdef cnp.ndarray[u8, ndim=2] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = rel.shape[0], w = rel.shape[1]
    cdef cnp.ndarray[i32, ndim=2] out = np.zeros((h, w), dtype=np.int32)
    cdef cnp.ndarray[u8, ndim=2] queued = np.zeros((h, w), dtype=np.uint8)
    cdef int dy[8]
    cdef int dx[8]
    cdef int n = _offsets(conn, dy, dx)
    cdef Py_ssize_t y, x, ny, nx
    cdef int k
    cdef i32 label
    cdef priority_queue[pair[f32, i64]] heap
    cdef pair[f32, i64] item
    cdef i64 idx

    for y in range(h):
        for x in range(w):
            if m[y, x] and seed[y, x] > 0:
                out[y, x] = seed[y, x]
                queued[y, x] = 1
                heap.push(pair[f32, i64](rel[y, x], -(y * w + x)))

    while not heap.empty():
        item = heap.top(); heap.pop()
        idx = -item.second
        y = idx // w; x = idx % w
        label = out[y, x]
        for k in range(n):
            ny = y + dy[k]; nx = x + dx[k]
            if 0 <= ny < h and 0 <= nx < w:
                if m[ny, nx] and not queued[ny, nx]:
                    queued[ny, nx] = 1
                    out[ny, nx] = label
                    heap.push(pair[f32, i64](rel[ny, nx], -(ny * w + nx)))
    return out
