"""Numba-compiled kernels; signatures mirror :mod:`numpy_impl`."""
import numpy as np
from numba import njit

_MAXV = 16  # triangle clipped by 4 half-planes has at most 7 vertices


@njit(cache=True)
def p1_gradients(nodes, tris):
    nt = tris.shape[0]
    areas = np.empty(nt)
    grads = np.empty((nt, 3, 2))
    for t in range(nt):
        x0, y0 = nodes[tris[t, 0], 0], nodes[tris[t, 0], 1]
        e1x = nodes[tris[t, 1], 0] - x0
        e1y = nodes[tris[t, 1], 1] - y0
        e2x = nodes[tris[t, 2], 0] - x0
        e2y = nodes[tris[t, 2], 1] - y0
        det = e1x * e2y - e1y * e2x
        grads[t, 1, 0] = e2y / det
        grads[t, 1, 1] = -e2x / det
        grads[t, 2, 0] = -e1y / det
        grads[t, 2, 1] = e1x / det
        grads[t, 0, 0] = -grads[t, 1, 0] - grads[t, 2, 0]
        grads[t, 0, 1] = -grads[t, 1, 1] - grads[t, 2, 1]
        areas[t] = 0.5 * det
    return areas, grads


@njit(cache=True)
def locate(nodes, tris, origin, cell, nbx, nby, bin_ptr, bin_tris, points, tol):
    npts = points.shape[0]
    tri_out = np.full(npts, -1, dtype=np.int64)
    bary_out = np.zeros((npts, 3))
    for i in range(npts):
        px, py = points[i, 0], points[i, 1]
        ix = int(np.floor((px - origin[0]) / cell))
        iy = int(np.floor((py - origin[1]) / cell))
        if ix < 0 or ix >= nbx or iy < 0 or iy >= nby:
            continue
        b = ix * nby + iy
        best = -1
        best_score = -np.inf
        bl0 = bl1 = bl2 = 0.0
        for k in range(bin_ptr[b], bin_ptr[b + 1]):
            t = bin_tris[k]
            x0, y0 = nodes[tris[t, 0], 0], nodes[tris[t, 0], 1]
            e1x = nodes[tris[t, 1], 0] - x0
            e1y = nodes[tris[t, 1], 1] - y0
            e2x = nodes[tris[t, 2], 0] - x0
            e2y = nodes[tris[t, 2], 1] - y0
            rx, ry = px - x0, py - y0
            det = e1x * e2y - e1y * e2x
            l1 = (rx * e2y - ry * e2x) / det
            l2 = (e1x * ry - e1y * rx) / det
            l0 = 1.0 - l1 - l2
            score = min(l0, min(l1, l2))
            if score > best_score:
                best_score = score
                best = t
                bl0, bl1, bl2 = l0, l1, l2
        if best >= 0 and best_score >= -tol:
            bl0 = min(max(bl0, 0.0), 1.0)
            bl1 = min(max(bl1, 0.0), 1.0)
            bl2 = min(max(bl2, 0.0), 1.0)
            s = bl0 + bl1 + bl2
            tri_out[i] = best
            bary_out[i, 0] = bl0 / s
            bary_out[i, 1] = bl1 / s
            bary_out[i, 2] = bl2 / s
    return tri_out, bary_out


@njit(cache=True)
def _clip(px, py, pb, n, axis, value, keep_greater, qx, qy, qb):
    m = 0
    for i in range(n):
        j = i - 1 if i > 0 else n - 1
        c = px[i] if axis == 0 else py[i]
        p = px[j] if axis == 0 else py[j]
        c_in = c >= value if keep_greater else c <= value
        p_in = p >= value if keep_greater else p <= value
        if c_in != p_in:
            t = (value - p) / (c - p)
            qx[m] = px[j] + t * (px[i] - px[j])
            qy[m] = py[j] + t * (py[i] - py[j])
            for a in range(3):
                qb[m, a] = pb[j, a] + t * (pb[i, a] - pb[j, a])
            m += 1
        if c_in:
            qx[m] = px[i]
            qy[m] = py[i]
            for a in range(3):
                qb[m, a] = pb[i, a]
            m += 1
    return m


@njit(cache=True)
def clip_weights(nodes, tris, origin, s, nvx, nvy):
    nt = tris.shape[0]
    # upper bound on overlapping (triangle, voxel) pairs from bounding boxes
    total = 0
    for t in range(nt):
        xmin = min(nodes[tris[t, 0], 0], min(nodes[tris[t, 1], 0], nodes[tris[t, 2], 0]))
        xmax = max(nodes[tris[t, 0], 0], max(nodes[tris[t, 1], 0], nodes[tris[t, 2], 0]))
        ymin = min(nodes[tris[t, 0], 1], min(nodes[tris[t, 1], 1], nodes[tris[t, 2], 1]))
        ymax = max(nodes[tris[t, 0], 1], max(nodes[tris[t, 1], 1], nodes[tris[t, 2], 1]))
        i0 = max(int(np.floor((xmin - origin[0]) / s)), 0)
        i1 = min(int(np.floor((xmax - origin[0]) / s)), nvx - 1)
        j0 = max(int(np.floor((ymin - origin[1]) / s)), 0)
        j1 = min(int(np.floor((ymax - origin[1]) / s)), nvy - 1)
        if i1 >= i0 and j1 >= j0:
            total += (i1 - i0 + 1) * (j1 - j0 + 1)
    rows = np.empty(3 * total, dtype=np.int64)
    cols = np.empty(3 * total, dtype=np.int64)
    vals = np.empty(3 * total)
    ax = np.empty(_MAXV)
    ay = np.empty(_MAXV)
    ab = np.empty((_MAXV, 3))
    bx = np.empty(_MAXV)
    by = np.empty(_MAXV)
    bb = np.empty((_MAXV, 3))
    cnt = 0
    for t in range(nt):
        xmin = min(nodes[tris[t, 0], 0], min(nodes[tris[t, 1], 0], nodes[tris[t, 2], 0]))
        xmax = max(nodes[tris[t, 0], 0], max(nodes[tris[t, 1], 0], nodes[tris[t, 2], 0]))
        ymin = min(nodes[tris[t, 0], 1], min(nodes[tris[t, 1], 1], nodes[tris[t, 2], 1]))
        ymax = max(nodes[tris[t, 0], 1], max(nodes[tris[t, 1], 1], nodes[tris[t, 2], 1]))
        i0 = max(int(np.floor((xmin - origin[0]) / s)), 0)
        i1 = min(int(np.floor((xmax - origin[0]) / s)), nvx - 1)
        j0 = max(int(np.floor((ymin - origin[1]) / s)), 0)
        j1 = min(int(np.floor((ymax - origin[1]) / s)), nvy - 1)
        for ix in range(i0, i1 + 1):
            x0 = origin[0] + ix * s
            for iy in range(j0, j1 + 1):
                y0 = origin[1] + iy * s
                for a in range(3):
                    ax[a] = nodes[tris[t, a], 0]
                    ay[a] = nodes[tris[t, a], 1]
                    for c in range(3):
                        ab[a, c] = 1.0 if a == c else 0.0
                n = 3
                n = _clip(ax, ay, ab, n, 0, x0, True, bx, by, bb)
                if n >= 3:
                    n = _clip(bx, by, bb, n, 0, x0 + s, False, ax, ay, ab)
                if n >= 3:
                    n = _clip(ax, ay, ab, n, 1, y0, True, bx, by, bb)
                if n >= 3:
                    n = _clip(bx, by, bb, n, 1, y0 + s, False, ax, ay, ab)
                if n < 3:
                    continue
                w0 = w1 = w2 = 0.0
                for j in range(1, n - 1):
                    e1x = ax[j] - ax[0]
                    e1y = ay[j] - ay[0]
                    e2x = ax[j + 1] - ax[0]
                    e2y = ay[j + 1] - ay[0]
                    area = 0.5 * (e1x * e2y - e1y * e2x) / 3.0
                    w0 += area * (ab[0, 0] + ab[j, 0] + ab[j + 1, 0])
                    w1 += area * (ab[0, 1] + ab[j, 1] + ab[j + 1, 1])
                    w2 += area * (ab[0, 2] + ab[j, 2] + ab[j + 1, 2])
                if w0 + w1 + w2 <= 0.0:
                    continue
                v = ix * nvy + iy
                rows[cnt] = v
                cols[cnt] = tris[t, 0]
                vals[cnt] = w0
                rows[cnt + 1] = v
                cols[cnt + 1] = tris[t, 1]
                vals[cnt + 1] = w1
                rows[cnt + 2] = v
                cols[cnt + 2] = tris[t, 2]
                vals[cnt + 2] = w2
                cnt += 3
    return rows[:cnt], cols[:cnt], vals[:cnt]
