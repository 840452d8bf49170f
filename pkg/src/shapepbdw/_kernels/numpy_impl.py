"""Pure-numpy reference implementations of the hot kernels.

Every function here has a twin in :mod:`numba_impl` with the same signature
and the same results up to floating-point reassociation.
"""
import numpy as np


def p1_gradients(nodes, tris):
    """Areas and barycentric-basis gradients of every triangle.

    Returns ``areas`` of shape (T,) (signed, positive for CCW) and ``grads``
    of shape (T, 3, 2) where ``grads[t, a]`` is the gradient of the local
    basis function attached to vertex ``a``.
    """
    p0 = nodes[tris[:, 0]]
    p1 = nodes[tris[:, 1]]
    p2 = nodes[tris[:, 2]]
    e1 = p1 - p0
    e2 = p2 - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    grads = np.empty((tris.shape[0], 3, 2))
    # grad(lambda_1) and grad(lambda_2) are rows of inv([e1 e2])^T
    grads[:, 1, 0] = e2[:, 1] / det
    grads[:, 1, 1] = -e2[:, 0] / det
    grads[:, 2, 0] = -e1[:, 1] / det
    grads[:, 2, 1] = e1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return 0.5 * det, grads


def _barycentric(nodes, tris, cand, pts):
    p0 = nodes[tris[cand, 0]]
    p1 = nodes[tris[cand, 1]]
    p2 = nodes[tris[cand, 2]]
    e1 = p1 - p0
    e2 = p2 - p0
    r = pts - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    l1 = (r[:, 0] * e2[:, 1] - r[:, 1] * e2[:, 0]) / det
    l2 = (e1[:, 0] * r[:, 1] - e1[:, 1] * r[:, 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=1)


def locate(nodes, tris, origin, cell, nbx, nby, bin_ptr, bin_tris, points, tol):
    npts = points.shape[0]
    tri_out = np.full(npts, -1, dtype=np.int64)
    bary_out = np.zeros((npts, 3))
    ix = np.floor((points[:, 0] - origin[0]) / cell).astype(np.int64)
    iy = np.floor((points[:, 1] - origin[1]) / cell).astype(np.int64)
    inside = (ix >= 0) & (ix < nbx) & (iy >= 0) & (iy < nby)
    pidx = np.nonzero(inside)[0]
    if pidx.size == 0:
        return tri_out, bary_out
    b = ix[pidx] * nby + iy[pidx]
    counts = bin_ptr[b + 1] - bin_ptr[b]
    owner = np.repeat(pidx, counts)
    offs = np.arange(owner.size) - np.repeat(np.cumsum(counts) - counts, counts)
    cand = bin_tris[np.repeat(bin_ptr[b], counts) + offs]
    lam = _barycentric(nodes, tris, cand, points[owner])
    score = lam.min(axis=1)
    # best candidate per point: largest minimum barycentric coordinate
    order = np.lexsort((-score, owner))
    first = np.ones(order.size, dtype=bool)
    first[1:] = owner[order[1:]] != owner[order[:-1]]
    best = order[first]
    ok = score[best] >= -tol
    hit = best[ok]
    who = owner[hit]
    lam_hit = np.clip(lam[hit], 0.0, 1.0)
    lam_hit /= lam_hit.sum(axis=1, keepdims=True)
    tri_out[who] = cand[hit]
    bary_out[who] = lam_hit
    return tri_out, bary_out


def _clip(poly, bary, axis, value, keep_greater):
    out_p, out_b = [], []
    k = len(poly)
    for i in range(k):
        cp, cb = poly[i], bary[i]
        pp, pb = poly[i - 1], bary[i - 1]
        c_in = cp[axis] >= value if keep_greater else cp[axis] <= value
        p_in = pp[axis] >= value if keep_greater else pp[axis] <= value
        if c_in != p_in:
            t = (value - pp[axis]) / (cp[axis] - pp[axis])
            out_p.append(pp + t * (cp - pp))
            out_b.append(pb + t * (cb - pb))
        if c_in:
            out_p.append(cp)
            out_b.append(cb)
    return out_p, out_b


def clip_weights(nodes, tris, origin, s, nvx, nvy):
    """Integrals of each P1 basis function over every triangle/voxel overlap.

    Returns COO triplets ``(voxel, node, value)`` with ``voxel = ix*nvy + iy``.
    """
    rows, cols, vals = [], [], []
    eye = np.eye(3)
    for t in range(tris.shape[0]):
        verts = nodes[tris[t]]
        lo = np.floor((verts.min(axis=0) - origin) / s).astype(int)
        hi = np.floor((verts.max(axis=0) - origin) / s).astype(int)
        for ix in range(max(lo[0], 0), min(hi[0], nvx - 1) + 1):
            x0 = origin[0] + ix * s
            for iy in range(max(lo[1], 0), min(hi[1], nvy - 1) + 1):
                y0 = origin[1] + iy * s
                poly = [verts[0], verts[1], verts[2]]
                bary = [eye[0], eye[1], eye[2]]
                for axis, value, keep in ((0, x0, True), (0, x0 + s, False),
                                          (1, y0, True), (1, y0 + s, False)):
                    poly, bary = _clip(poly, bary, axis, value, keep)
                    if len(poly) < 3:
                        break
                if len(poly) < 3:
                    continue
                acc = np.zeros(3)
                for j in range(1, len(poly) - 1):
                    a = poly[0]
                    e1 = poly[j] - a
                    e2 = poly[j + 1] - a
                    area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
                    acc += area * (bary[0] + bary[j] + bary[j + 1]) / 3.0
                if acc.sum() <= 0.0:
                    continue
                v = ix * nvy + iy
                for a in range(3):
                    rows.append(v)
                    cols.append(tris[t, a])
                    vals.append(acc[a])
    return (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64),
            np.asarray(vals, dtype=float))
