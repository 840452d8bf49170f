"""Transport of fields and reduced spaces between channel geometries.

The map from a source geometry to a target is built in three stages: an
analytic correspondence of the boundaries, a harmonic extension of the
boundary displacement into the source mesh, and interpolation of the
deformed source mesh onto the target mesh. Velocities can be post-processed
with the Piola transform to keep them (nearly) divergence free.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels, fem
from .errors import ContractError, DegenerateTransportError, SolverError
from .mesh import GeometryDescriptor, Mesh, _build_bins, generate_mesh
from .rom import Subspace, orthonormalize

ON_BOUNDARY_TOL = 1e-10
DET_TOL = 1e-8
DROP_TOL = 1e-10


def _boundary_mask(g: GeometryDescriptor, pts, tol):
    x, y = pts[:, 0], pts[:, 1]
    xc = np.clip(x, 0.0, g.L)
    h = g.profile(xc)
    inside_x = (x >= -tol) & (x <= g.L + tol)
    ends = ((np.abs(x) <= tol) | (np.abs(x - g.L) <= tol)) & (np.abs(y) <= h + tol)
    wall = inside_x & (np.abs(np.abs(y) - h) <= tol)
    return ends | wall


def boundary_correspondence(src: GeometryDescriptor, dst: GeometryDescriptor, x):
    """Map points of the source boundary onto the target boundary.

    Axial position is kept; the transverse coordinate is scaled by
    ``h_dst(x) / h_src(x)``, which sends walls onto walls and the inflow and
    outflow segments onto themselves.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    if src.L != dst.L:
        raise ContractError("source and target channels must have the same length")
    if not np.all(_boundary_mask(src, pts, ON_BOUNDARY_TOL)):
        raise ContractError("point is not on the source boundary")
    xc = np.clip(pts[:, 0], 0.0, src.L)
    out = pts.copy()
    out[:, 1] = pts[:, 1] * (dst.profile(xc) / src.profile(xc))
    return out.reshape(np.shape(x))


def harmonic_extension(m: Mesh, boundary_disp) -> np.ndarray:
    """Discrete harmonic extension of a boundary displacement.

    ``boundary_disp`` has shape ``(len(m.boundary_nodes), k)`` (or a flat
    vector for ``k = 1``), ordered like ``m.boundary_nodes``. Returns the
    extended field blocked by component, length ``k * n_nodes``.
    """
    bd = np.asarray(boundary_disp, dtype=float)
    flat = bd.ndim == 1
    bd = bd.reshape(m.boundary_nodes.size, -1)
    n = m.n_nodes
    fixed = m.boundary_nodes
    free = np.setdiff1d(np.arange(n), fixed)
    K = fem.stiffness_matrix(m)
    out = np.zeros((bd.shape[1], n))
    out[:, fixed] = bd.T
    if np.any(bd) and free.size:
        Kff = K[free][:, free].tocsc()
        rhs = -(K[free][:, fixed] @ bd)
        sol = spla.splu(Kff).solve(rhs)
        bnorm = np.linalg.norm(rhs)
        res = np.linalg.norm(Kff @ sol - rhs) / bnorm if bnorm > 0 else 0.0
        if res > 1e-10:
            raise SolverError(f"harmonic extension residual {res:.3e}", res)
        out[:, free] = sol.T
    return out.ravel() if not flat else out[0]


@dataclass(eq=False)
class VolumetricMap:
    """Displacement ``disp`` on ``source`` carrying it onto ``target``."""

    source: Mesh
    target: GeometryDescriptor
    disp: np.ndarray
    _bins: tuple | None = field(default=None, repr=False)
    _interp: dict = field(default_factory=dict, repr=False)

    @property
    def deformed_nodes(self) -> np.ndarray:
        n = self.source.n_nodes
        return self.source.nodes + np.column_stack([self.disp[:n], self.disp[n:]])

    def bins(self):
        if self._bins is None:
            self._bins = _build_bins(self.deformed_nodes, self.source.triangles)
        return self._bins

    def interpolation(self, dst: Mesh) -> sp.csr_matrix:
        """Sparse ``(dst.n_nodes, source.n_nodes)`` matrix evaluating P1 fields
        on the deformed source mesh at the nodes of ``dst``."""
        key = id(dst)
        if key not in self._interp:
            self._interp[key] = (dst, _interpolation_matrix(self, dst))
        return self._interp[key][1]


def build_map(src_mesh: Mesh, dst: GeometryDescriptor) -> VolumetricMap:
    """Harmonic volumetric map from ``src_mesh`` onto the geometry ``dst``."""
    src = src_mesh.descriptor
    bnodes = src_mesh.boundary_nodes
    pts = src_mesh.nodes[bnodes]
    target = boundary_correspondence(src, dst, pts)
    disp = harmonic_extension(src_mesh, target - pts)
    vmap = VolumetricMap(src_mesh, dst, disp)
    areas, _ = _kernels.p1_gradients(vmap.deformed_nodes, src_mesh.triangles)
    if np.any(areas <= 0):
        raise DegenerateTransportError(
            f"{np.count_nonzero(areas <= 0)} deformed triangle(s) are inverted")
    return vmap


def _identical(a_nodes, b_mesh, tris):
    return (a_nodes.shape == b_mesh.nodes.shape and np.array_equal(a_nodes, b_mesh.nodes)
            and np.array_equal(tris, b_mesh.triangles))


def _interpolation_matrix(vmap: VolumetricMap, dst: Mesh) -> sp.csr_matrix:
    nodes = vmap.deformed_nodes
    tris = vmap.source.triangles
    n_src = nodes.shape[0]
    if _identical(nodes, dst, tris):
        return sp.identity(n_src, format="csr")
    origin, cell, nbx, nby, bin_ptr, bin_tris = vmap.bins()
    tri, bary = _kernels.locate(nodes, tris, origin, cell, nbx, nby, bin_ptr, bin_tris,
                                dst.nodes, 1e-10)
    rows = [np.repeat(np.nonzero(tri >= 0)[0], 3)]
    cols = [tris[tri[tri >= 0]].ravel()]
    vals = [bary[tri >= 0].ravel()]
    miss = np.nonzero(tri < 0)[0]
    if miss.size:
        # closest point on the deformed boundary, linear along that edge
        edges = vmap.source.boundary_edges
        a = nodes[edges[:, 0]]
        e = nodes[edges[:, 1]] - a
        p = dst.nodes[miss]
        w = p[:, None, :] - a[None]
        t = np.clip(np.einsum("pkd,kd->pk", w, e) / np.einsum("kd,kd->k", e, e), 0.0, 1.0)
        d2 = ((w - t[..., None] * e[None]) ** 2).sum(axis=2)
        k = np.argmin(d2, axis=1)
        tk = t[np.arange(miss.size), k]
        rows.append(np.repeat(miss, 2))
        cols.append(edges[k].ravel())
        vals.append(np.column_stack([1.0 - tk, tk]).ravel())
    P = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(dst.n_nodes, n_src))
    return P.tocsr()


def push_forward(f, vmap: VolumetricMap, dst_mesh: Mesh) -> np.ndarray:
    """Carry a nodal field from the map's source mesh onto ``dst_mesh``.

    ``f`` is blocked by component (any number of components) or a stack of
    such rows.
    """
    f = np.asarray(getattr(f, "coeffs", f), dtype=float)
    n_src = vmap.source.n_nodes
    if f.shape[-1] % n_src:
        raise ContractError("field does not live on the map's source mesh")
    P = vmap.interpolation(dst_mesh)
    lead = f.shape[:-1]
    k = f.shape[-1] // n_src
    blocks = f.reshape(-1, k, n_src).reshape(-1, n_src)
    out = (P @ blocks.T).T
    return out.reshape(lead + (k * dst_mesh.n_nodes,))


def deformation_gradient(disp, mesh: Mesh) -> np.ndarray:
    """Nodal ``I + grad d`` from a blocked P1 displacement, shape (n, 2, 2)."""
    n = mesh.n_nodes
    gx = fem.element_gradients(mesh, disp[:n])
    gy = fem.element_gradients(mesh, disp[n:])
    cell = np.stack([gx, gy], axis=1)
    F = fem.nodal_average(mesh, cell)
    return F + np.eye(2)[None]


def piola(v, transported_disp, mesh: Mesh) -> np.ndarray:
    """Piola transform ``(I + grad d) v / det(I + grad d)`` at the nodes.

    ``v`` is a blocked velocity on ``mesh`` (or a stack of rows).
    """
    v = np.asarray(getattr(v, "coeffs", v), dtype=float)
    d = np.asarray(getattr(transported_disp, "coeffs", transported_disp), dtype=float)
    n = mesh.n_nodes
    if not np.any(d):
        return v.copy()
    F = deformation_gradient(d, mesh)
    det = F[:, 0, 0] * F[:, 1, 1] - F[:, 0, 1] * F[:, 1, 0]
    if np.any(det <= DET_TOL):
        raise DegenerateTransportError(
            f"det(I + grad d) = {det.min():.3e} <= {DET_TOL} at "
            f"{np.count_nonzero(det <= DET_TOL)} node(s)")
    vx, vy = v[..., :n], v[..., n:]
    ox = (F[:, 0, 0] * vx + F[:, 0, 1] * vy) / det
    oy = (F[:, 1, 0] * vx + F[:, 1, 1] * vy) / det
    return np.concatenate([ox, oy], axis=-1)


def transport_fields(f, vmap: VolumetricMap, dst_mesh: Mesh, use_piola: bool = True):
    """Apply the full transport to velocity rows ``f``."""
    out = push_forward(f, vmap, dst_mesh)
    if use_piola:
        d = push_forward(vmap.disp, vmap, dst_mesh)
        out = piola(out, d, dst_mesh)
    return out


def transport_subspace(V: Subspace, src: GeometryDescriptor, dst: GeometryDescriptor,
                       dst_mesh: Mesh | None = None, use_piola: bool = True,
                       vmap: VolumetricMap | None = None, h: float | None = None):
    """Transported and re-orthonormalised reduced space on ``dst_mesh``.

    Directions whose residual after Gram-Schmidt falls below ``1e-10`` of
    their norm are dropped, so the result may have fewer modes than ``V``.
    """
    if V.mesh is None:
        raise ContractError("subspace must carry its mesh to be transported")
    if not V.mesh.descriptor.matches(src):
        raise ContractError("subspace mesh does not belong to the source geometry")
    if dst_mesh is None:
        dst_mesh = generate_mesh(dst, h if h is not None else V.mesh.h)
    if vmap is None:
        vmap = build_map(V.mesh, dst)
    moved = transport_fields(V.basis.T, vmap, dst_mesh, use_piola)
    M = dst_mesh.velocity_mass
    basis, kept = orthonormalize(moved.T, M, drop_tol=DROP_TOL)
    if not kept:
        raise DegenerateTransportError("all transported directions collapsed")
    return Subspace(basis, M, dst_mesh, V.kind)
