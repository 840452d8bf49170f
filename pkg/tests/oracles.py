"""Independent reference computations used by the tests."""
import numpy as np
import scipy.linalg as la


def kkt_reconstruction(y_coords, Phi, Psi, M):
    """Minimise ||u - Phi z||_M over u with Psi^T M u = y_coords by the dense
    full-space KKT system in the unknowns (u, z, lambda)."""
    N, n = Phi.shape
    m = Psi.shape[1]
    M = np.asarray(M.toarray() if hasattr(M, "toarray") else M)
    MPhi = M @ Phi
    MPsi = M @ Psi
    K = np.zeros((N + n + m, N + n + m))
    K[:N, :N] = M
    K[:N, N:N + n] = -MPhi
    K[:N, N + n:] = MPsi
    K[N:N + n, :N] = -MPhi.T
    K[N:N + n, N:N + n] = Phi.T @ MPhi
    K[N + n:, :N] = MPsi.T
    rhs = np.concatenate([np.zeros(N + n), y_coords])
    sol = la.solve(K, rhs)
    return sol[:N]


def sphere_hausdorff_mc(QA, QB, M, samples, rng, chunk=2000):
    """Sampled Hausdorff distance between the unit spheres of span(QA) and
    span(QB), where the point-to-sphere distance of ``a`` is the distance
    to the closest line through a sampled ``b``, ``sqrt(1 - <a, b>^2)``."""
    def unit(k):
        c = rng.standard_normal((samples, k))
        return c / np.linalg.norm(c, axis=1, keepdims=True)

    ca = unit(QA.shape[1])
    cb = unit(QB.shape[1])
    G = QA.T @ (M @ QB)

    def directed(c1, c2, G):
        worst = 0.0
        for s in range(0, c1.shape[0], chunk):
            ip = (c1[s:s + chunk] @ G) @ c2.T
            d = np.sqrt(np.clip(1.0 - ip ** 2, 0.0, None)).min(axis=1)
            worst = max(worst, float(d.max()))
        return worst

    return max(directed(ca, cb, G), directed(cb, ca, G.T))


def voxel_integral_subcells(mesh, values, box, sub=16):
    """Integral of a nodal P1 field over the box ``(x0, x1, y0, y1)`` cut in
    ``sub x sub`` subcells, each subcell intersected exactly with every
    triangle through shapely."""
    from shapely.geometry import Polygon, box as sbox

    x0, x1, y0, y1 = box
    pts = mesh.nodes[mesh.triangles]
    lo = pts.min(axis=1)
    hi = pts.max(axis=1)
    cand = np.nonzero((hi[:, 0] >= x0) & (lo[:, 0] <= x1) & (hi[:, 1] >= y0) & (lo[:, 1] <= y1))[0]
    polys = {t: Polygon(pts[t]) for t in cand}
    xs = np.linspace(x0, x1, sub + 1)
    ys = np.linspace(y0, y1, sub + 1)
    total = 0.0
    for i in range(sub):
        for j in range(sub):
            cell = sbox(xs[i], ys[j], xs[i + 1], ys[j + 1])
            for t in cand:
                inter = polys[t].intersection(cell)
                if inter.is_empty or inter.area == 0.0:
                    continue
                # P1 integral = area * value at the centroid
                c = np.array(inter.centroid.coords[0])
                P = pts[t]
                T = np.array([[P[1, 0] - P[0, 0], P[2, 0] - P[0, 0]],
                              [P[1, 1] - P[0, 1], P[2, 1] - P[0, 1]]])
                l12 = np.linalg.solve(T, c - P[0])
                bary = np.array([1 - l12.sum(), l12[0], l12[1]])
                total += inter.area * float(bary @ values[mesh.triangles[t]])
    return total


def transport_composition(src_mesh, dst_desc, dst_mesh, fields, use_piola=True):
    """Transport ``fields`` (rows, blocked velocities) one stage at a time with
    dense or brute-force computations for every stage."""
    n = src_mesh.n_nodes
    X = src_mesh.nodes
    # stage 1: analytic correspondence of boundary nodes
    bnd = np.unique(src_mesh.boundary_edges.ravel())
    g0 = src_mesh.descriptor
    target = X[bnd].copy()
    xb = np.clip(X[bnd, 0], 0.0, g0.L)
    target[:, 1] *= dst_desc.profile(xb) / g0.profile(xb)
    # stage 2: harmonic extension with a dense Dirichlet-row system
    K = np.zeros((n, n))
    for t in src_mesh.triangles:
        P = X[t]
        B = np.array([P[1] - P[0], P[2] - P[0]]).T
        area = 0.5 * abs(np.linalg.det(B))
        G = np.linalg.solve(B.T, np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]))
        K[np.ix_(t, t)] += area * G.T @ G
    disp = np.zeros((n, 2))
    for c in range(2):
        A = K.copy()
        rhs = np.zeros(n)
        A[bnd] = 0.0
        A[bnd, bnd] = 1.0
        rhs[bnd] = target[:, c] - X[bnd, c]
        disp[:, c] = np.linalg.solve(A, rhs)
    Y = X + disp
    # stage 3: brute-force barycentric location on the deformed mesh
    tris = src_mesh.triangles
    Pt = Y[tris]
    Q = dst_mesh.nodes
    interp = np.zeros((Q.shape[0], n))
    for k, q in enumerate(Q):
        found = False
        for t, P in zip(tris, Pt):
            T = np.array([P[1] - P[0], P[2] - P[0]]).T
            l12 = np.linalg.solve(T, q - P[0])
            lam = np.array([1.0 - l12.sum(), l12[0], l12[1]])
            if lam.min() >= -1e-10:
                interp[k, t] = lam
                found = True
                break
        if not found:
            best = np.inf
            for a, b in src_mesh.boundary_edges:
                e = Y[b] - Y[a]
                s = np.clip((q - Y[a]) @ e / (e @ e), 0.0, 1.0)
                d = np.linalg.norm(q - Y[a] - s * e)
                if d < best:
                    best, pick = d, (a, b, s)
            a, b, s = pick
            interp[k] = 0.0
            interp[k, a] += 1.0 - s
            interp[k, b] += s
    F = np.atleast_2d(fields)
    nd = Q.shape[0]
    out = np.concatenate([F[:, :n] @ interp.T, F[:, n:] @ interp.T], axis=1)
    if not use_piola:
        return out
    # stage 4: Piola with area-weighted nodal gradients of the moved displacement
    dmov = interp @ disp
    acc = np.zeros((nd, 2, 2))
    wsum = np.zeros(nd)
    for t in dst_mesh.triangles:
        P = Q[t]
        B = np.array([P[1] - P[0], P[2] - P[0]]).T
        area = 0.5 * abs(np.linalg.det(B))
        G = np.linalg.solve(B.T, np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]]))
        J = dmov[t].T @ G.T  # row c: gradient of component c
        acc[t] += area * J
        wsum[t] += area
    J = acc / wsum[:, None, None] + np.eye(2)
    det = np.linalg.det(J)
    vx, vy = out[:, :nd], out[:, nd:]
    ox = (J[:, 0, 0] * vx + J[:, 0, 1] * vy) / det
    oy = (J[:, 1, 0] * vx + J[:, 1, 1] * vy) / det
    return np.concatenate([ox, oy], axis=1)
