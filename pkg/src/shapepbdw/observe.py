"""Voxel-averaged beam-projected velocity measurements and their Riesz space.

A measurement is ``l_i(u) = int_{voxel_i} u . b dx``. Its Riesz representer in
the discrete L2 space is the L2 projection of ``1_{voxel_i} b`` onto P1,
``omega_i = M^{-1} l_i``, which makes ``<omega_i, v>_M = l_i(v)`` hold exactly
for every discrete field ``v``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .errors import ContractError
from .rom import Subspace

log = logging.getLogger(__name__)

DEFAULT_BEAM = (math.sqrt(2.0) / 2.0, math.sqrt(2.0) / 2.0)
ACTIVATION = 0.05


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Axis-aligned voxel partition restricted to voxels meeting the mesh.

    Attributes
    ----------
    origin, s, counts : grid lower-left corner, voxel side and (nvx, nvy)
    beam : unit 2-vector ``b``
    active : flat ids ``ix*nvy + iy`` of the active voxels
    areas : ``|voxel_i cap Omega_h|`` for the active voxels
    weights : sparse (m, n_nodes), ``weights[i, k] = int_{voxel_i} phi_k``
    """

    mesh: object
    origin: np.ndarray
    s: float
    counts: tuple
    beam: np.ndarray
    active: np.ndarray
    areas: np.ndarray
    weights: sp.csr_matrix

    @property
    def m(self) -> int:
        return self.active.size

    def functionals(self) -> sp.csr_matrix:
        """Measurement matrix acting on blocked velocity coefficients."""
        bx, by = self.beam
        return sp.hstack([bx * self.weights, by * self.weights], format="csr")

    def voxel_bounds(self, k):
        ix, iy = divmod(int(self.active[k]), self.counts[1])
        x0 = self.origin[0] + ix * self.s
        y0 = self.origin[1] + iy * self.s
        return x0, x0 + self.s, y0, y0 + self.s


def build_voxel_grid(mesh, s: float = 0.25, beam=DEFAULT_BEAM, band=None,
                     threshold: float = ACTIVATION) -> VoxelGrid:
    """Voxelise the mesh bounding box (optionally only ``band=(ymin, ymax)``)."""
    b = np.asarray(beam, dtype=float)
    nb = np.linalg.norm(b)
    if nb == 0:
        raise ValueError("beam direction must be nonzero")
    b = b / nb
    lo = mesh.nodes.min(axis=0)
    hi = mesh.nodes.max(axis=0)
    if band is not None:
        lo = np.array([lo[0], max(lo[1], band[0])])
        hi = np.array([hi[0], min(hi[1], band[1])])
    nvx = max(1, math.ceil((hi[0] - lo[0]) / s - 1e-12))
    nvy = max(1, math.ceil((hi[1] - lo[1]) / s - 1e-12))
    rows, cols, vals = _kernels.clip_weights(mesh.nodes, mesh.triangles, lo, s, nvx, nvy)
    full = sp.coo_matrix((vals, (rows, cols)), shape=(nvx * nvy, mesh.n_nodes)).tocsr()
    area = np.asarray(full.sum(axis=1)).ravel()
    keep = area >= threshold * s * s
    slivers = np.count_nonzero((area > 0) & ~keep)
    if slivers:
        log.warning("excluded %d voxel(s) with intersection area below %.3g s^2",
                    slivers, threshold)
    active = np.nonzero(keep)[0]
    return VoxelGrid(mesh, lo, float(s), (nvx, nvy), b, active, area[active],
                     full[active])


def measure(u, grid: VoxelGrid) -> np.ndarray:
    """Measurement vector ``(l_i(u))_i``; ``u`` may also be a stack of rows."""
    u = np.asarray(getattr(u, "coeffs", u), dtype=float)
    L = grid.functionals()
    if u.shape[-1] != L.shape[1]:
        raise ContractError("velocity field does not live on the grid's mesh")
    return (L @ u.T).T


def _mass_solve(mass, rhs):
    if sp.issparse(mass):
        return spla.splu(sp.csc_matrix(mass)).solve(np.asarray(rhs, dtype=float))
    return np.linalg.solve(np.asarray(mass), rhs)


@dataclass(frozen=True, eq=False)
class ObservationSpace:
    """Orthonormalised Riesz representers together with the measurement map.

    ``basis`` is the M-orthonormal basis ``psi = omega R^{-1}`` where
    ``R^T R`` is the Cholesky factorisation of the representer Gram matrix,
    so that orthonormal coordinates of ``P_W u`` are ``R^{-T} l(u)``.
    """

    subspace: Subspace
    functionals: object
    representers: np.ndarray
    chol: np.ndarray
    grid: VoxelGrid | None = None

    @classmethod
    def from_functionals(cls, functionals, mass, mesh=None, grid=None):
        L = functionals.toarray() if sp.issparse(functionals) else np.asarray(functionals)
        omega = _mass_solve(mass, L.T)
        omega = omega.reshape(L.shape[1], L.shape[0])
        G = L @ omega
        G = 0.5 * (G + G.T)
        R = la.cholesky(G, lower=False)
        psi = la.solve_triangular(R, omega.T, trans="T", lower=False).T
        return cls(Subspace(psi, mass, mesh), functionals, omega, R, grid)

    @property
    def dim(self) -> int:
        return self.subspace.dim

    @property
    def basis(self):
        return self.subspace.basis

    @property
    def mass(self):
        return self.subspace.mass

    @property
    def ndof(self):
        return self.subspace.ndof

    def measure(self, u):
        u = np.asarray(getattr(u, "coeffs", u), dtype=float)
        return (self.functionals @ u.T).T

    def coords(self, y):
        """Orthonormal coordinates ``<psi_k, u>`` from raw measurements ``y``."""
        y = np.asarray(y, dtype=float)
        return la.solve_triangular(self.chol, y.T, trans="T", lower=False).T

    def from_measurements(self, y):
        """``omega = P_W u`` reconstructed from the measurement vector."""
        return self.coords(y) @ self.basis.T

    def project(self, u):
        u = np.asarray(getattr(u, "coeffs", u), dtype=float)
        return (u @ (self.mass @ self.basis)) @ self.basis.T


def riesz_space(grid: VoxelGrid, M=None) -> ObservationSpace:
    """Observation space ``W_m`` of the grid's measurements in metric ``M``."""
    if M is None:
        M = grid.mesh.velocity_mass
    return ObservationSpace.from_functionals(grid.functionals(), M, grid.mesh, grid)
