"""P1 finite-element assembly on triangle meshes."""
import numpy as np
import scipy.sparse as sp

_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _scatter(mesh, local, shape=None):
    tris = mesh.triangles
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = mesh.n_nodes
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=shape or (n, n))
    return mat.tocsr()


def mass_matrix(mesh):
    """Scalar P1 mass matrix (exact integration)."""
    areas = mesh.areas
    return _scatter(mesh, areas[:, None, None] * _LOCAL_MASS[None])


def stiffness_matrix(mesh, weights=None):
    """Scalar P1 stiffness ``sum_T w_T |T| grad(phi_i).grad(phi_j)``."""
    areas, grads = mesh.element_geometry
    w = areas if weights is None else areas * weights
    local = np.einsum("t,tad,tbd->tab", w, grads, grads)
    return _scatter(mesh, local)


def divergence_matrices(mesh):
    """``(Bx, By)`` with ``B[i, j] = int phi_i d(phi_j)/dx``."""
    areas, grads = mesh.element_geometry
    out = []
    for d in range(2):
        local = (areas / 3.0)[:, None, None] * np.broadcast_to(
            grads[:, None, :, d], (areas.size, 3, 3))
        out.append(_scatter(mesh, local))
    return tuple(out)


def vector_mass_matrix(mesh):
    """Mass matrix for blocked 2-component fields ``[f_x, f_y]``."""
    m = mass_matrix(mesh)
    return sp.block_diag([m, m], format="csr")


def element_gradients(mesh, values):
    """Per-triangle (P0) gradient of a nodal scalar field, shape (T, 2)."""
    _, grads = mesh.element_geometry
    return np.einsum("tad,ta->td", grads, values[mesh.triangles])


def nodal_average(mesh, cell_values):
    """Area-weighted average of per-triangle values onto nodes."""
    areas = mesh.areas
    cell_values = np.asarray(cell_values)
    flat = cell_values.reshape(cell_values.shape[0], -1)
    acc = np.zeros((mesh.n_nodes, flat.shape[1]))
    wsum = np.zeros(mesh.n_nodes)
    for a in range(3):
        np.add.at(acc, mesh.triangles[:, a], areas[:, None] * flat)
        np.add.at(wsum, mesh.triangles[:, a], areas)
    return (acc / wsum[:, None]).reshape((mesh.n_nodes,) + cell_values.shape[1:])


def divergence_l2(mesh, velocity):
    """L2 norm of the piecewise-constant divergence of a blocked P1 velocity."""
    n = mesh.n_nodes
    gx = element_gradients(mesh, velocity[:n])
    gy = element_gradients(mesh, velocity[n:])
    div = gx[:, 0] + gy[:, 1]
    return float(np.sqrt(np.sum(mesh.areas * div ** 2)))


def boundary_flux(mesh, velocity, tag):
    """Outward normal flux of a blocked P1 velocity through edges tagged ``tag``."""
    n = mesh.n_nodes
    edges = mesh.boundary_edges[mesh.boundary_tags == tag]
    a, b = edges[:, 0], edges[:, 1]
    t = mesh.nodes[b] - mesh.nodes[a]
    # CCW boundary orientation: outward normal is the tangent rotated clockwise
    normal = np.column_stack([t[:, 1], -t[:, 0]])
    ux = 0.5 * (velocity[a] + velocity[b])
    uy = 0.5 * (velocity[n + a] + velocity[n + b])
    return float(np.sum(ux * normal[:, 0] + uy * normal[:, 1]))


# Degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1).
_A1, _B1 = 0.0597158717897698, 0.4701420641051151
_A2, _B2 = 0.7974269853530873, 0.1012865073234563
_QUAD_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
_QUAD_W = np.array([0.225] + [0.1323941527885062] * 3 + [0.1259391805448271] * 3)


def l2_error(mesh, values, exact, components=1):
    """``(||u_h - u||, ||u||)`` in L2 for a blocked nodal field against a
    callable ``exact(x, y)`` returning ``components`` arrays."""
    n = mesh.n_nodes
    vals = np.asarray(values).reshape(components, n)
    pts = np.einsum("qa,tad->tqd", _QUAD_BARY, mesh.nodes[mesh.triangles])
    ex = exact(pts[..., 0], pts[..., 1])
    if components == 1:
        ex = (ex,)
    err = 0.0
    ref = 0.0
    w = mesh.areas[:, None] * _QUAD_W[None, :]
    for c in range(components):
        uh = np.einsum("qa,ta->tq", _QUAD_BARY, vals[c][mesh.triangles])
        err += np.sum(w * (uh - ex[c]) ** 2)
        ref += np.sum(w * ex[c] ** 2)
    return float(np.sqrt(err)), float(np.sqrt(ref))
