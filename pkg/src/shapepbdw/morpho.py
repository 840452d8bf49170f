"""Geometry features, distances between reduced spaces and their MDS embedding."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError
from .mesh import GeometryDescriptor, Mesh
from .pbdw import beta
from .rom import Subspace
from .transport import transport_subspace

EIG_TOL = 1e-12
PINV_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell grid shared by all geometries of a family."""

    origin: tuple
    spacing: float
    counts: tuple

    @property
    def n_cells(self) -> int:
        return self.counts[0] * self.counts[1]

    @property
    def cell_area(self) -> float:
        return self.spacing ** 2


def family_grid(L: float = 5.0, D: float = 0.4, spacing: float = 0.05) -> GridSpec:
    """Grid covering ``[0, L] x [-D/2, D/2]``."""
    nx = math.ceil(L / spacing - 1e-9)
    ny = math.ceil(D / spacing - 1e-9)
    return GridSpec((0.0, -0.5 * D), float(spacing), (nx, ny))


def voxelize(g: GeometryDescriptor, grid: GridSpec, q: int = 4) -> np.ndarray:
    """Area of each grid cell inside the channel by ``q x q`` midpoint sampling.

    Cells are ordered ``ix * ny + iy``.
    """
    nx, ny = grid.counts
    s = grid.spacing
    off = (np.arange(q) + 0.5) / q * s
    xs = grid.origin[0] + (np.arange(nx)[:, None] * s + off[None, :]).ravel()
    ys = grid.origin[1] + (np.arange(ny)[:, None] * s + off[None, :]).ravel()
    inside_x = (xs >= 0.0) & (xs <= g.L)
    h = np.where(inside_x, g.profile(np.clip(xs, 0.0, g.L)), -1.0)
    inside = np.abs(ys)[None, :] < h[:, None]
    counts = inside.reshape(nx, q, ny, q).sum(axis=(1, 3))
    return counts.ravel() * (s * s / (q * q))


def _max_sine(E: Subspace, F: Subspace) -> float:
    """``sqrt(1 - beta(E, F)^2)`` from the projection residual, accurate for
    nearly equal spaces where the direct formula loses half the digits."""
    if E.dim > F.dim:
        return 1.0
    R = E.basis - F.basis @ (F.basis.T @ (F.mass @ E.basis))
    G = R.T @ (E.mass @ R)
    top = np.linalg.eigvalsh(0.5 * (G + G.T))[-1]
    return float(math.sqrt(min(max(top, 0.0), 1.0)))


def sphere_hausdorff(A: Subspace, B: Subspace) -> float:
    """Hausdorff distance between the unit spheres of two subspaces,
    ``sqrt(1 - min(beta(A, B), beta(B, A))^2)``."""
    A, B = getattr(A, "subspace", A), getattr(B, "subspace", B)
    beta(A, B)  # metric and dimension checks
    return max(_max_sine(A, B), _max_sine(B, A))


@dataclass(eq=False)
class Template:
    """One template geometry with its mesh and reduced space."""

    name: str
    descriptor: GeometryDescriptor
    mesh: Mesh
    space: Subspace
    singular_values: np.ndarray | None = None
    _moved: dict = field(default_factory=dict, repr=False)

    def transported_to(self, other: "Template", use_piola: bool = True) -> Subspace:
        # the target is kept alongside so a recycled id cannot alias it
        key = (id(other), use_piola)
        hit = self._moved.get(key)
        if hit is None or hit[0] is not other:
            hit = (other, transport_subspace(self.space, self.descriptor, other.descriptor,
                                             other.mesh, use_piola=use_piola))
            self._moved[key] = hit
        return hit[1]


def rho_terms(ti: Template, tj: Template):
    """The two squared sphere distances, on the mesh of ``ti`` and of ``tj``."""
    a = sphere_hausdorff(tj.transported_to(ti), ti.space) ** 2
    b = sphere_hausdorff(tj.space, ti.transported_to(tj)) ** 2
    return a, b


def rho_squared(ti: Template, tj: Template) -> float:
    """Symmetrised squared distance between the manifolds of two templates."""
    if ti is tj:
        return 0.0
    a, b = rho_terms(ti, tj)
    return 0.5 * a + 0.5 * b


def distance_matrix(templates, jobs: int = 1) -> np.ndarray:
    """Matrix of ``rho_squared`` over all template pairs."""
    K = len(templates)
    if K < 2:
        raise DimensionError("distance matrix needs at least two templates")
    pairs = [(i, j) for i in range(K) for j in range(i + 1, K)]

    def entry(ij):
        i, j = ij
        return rho_squared(templates[i], templates[j])

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(jobs) as ex:
            vals = list(ex.map(entry, pairs))
    else:
        vals = [entry(p) for p in pairs]
    D = np.zeros((K, K))
    for (i, j), v in zip(pairs, vals):
        D[i, j] = D[j, i] = v
    return D


@dataclass(frozen=True, eq=False)
class MDSResult:
    X: np.ndarray
    eigenvalues: np.ndarray
    kept: int
    discarded_ratio: float
    warning: str | None = None


def mds(D, p: int) -> MDSResult:
    """Classical MDS of a squared-distance matrix.

    Returns ``X`` with shape ``(p, K)`` built from the ``p`` largest
    positive eigenvalues of ``C = -H D H / 2``; missing dimensions are
    zero rows. ``eigenvalues`` holds the full spectrum in decreasing order
    and ``discarded_ratio`` is ``sum |lambda_neg| / sum lambda_pos``.
    """
    D = np.asarray(D, dtype=float)
    K = D.shape[0]
    if D.shape != (K, K):
        raise DimensionError("distance matrix must be square")
    if p > K:
        raise DimensionError(f"embedding dimension p={p} exceeds K={K}")
    H = np.eye(K) - np.full((K, K), 1.0 / K)
    C = -0.5 * H @ D @ H
    C = 0.5 * (C + C.T)
    lam, vec = np.linalg.eigh(C)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    top = lam[0] if K else 0.0
    positive = lam > EIG_TOL * top if top > 0 else np.zeros(K, dtype=bool)
    kept = min(p, int(positive.sum()))
    X = np.zeros((p, K))
    X[:kept] = np.sqrt(lam[:kept])[:, None] * vec[:, :kept].T
    pos_sum = lam[positive].sum()
    neg_sum = np.abs(lam[lam < 0]).sum()
    ratio = float(neg_sum / pos_sum) if pos_sum > 0 else 0.0
    msg = None
    if kept < p:
        msg = f"only {kept} positive eigenvalue(s); padded embedding to p={p}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return MDSResult(X, lam, kept, ratio, msg)


def default_dimension(K: int) -> int:
    return 2 if K <= 16 else 3


def fit_embedding(voxelizations, X) -> np.ndarray:
    """Least-squares map ``W`` with ``W^T v_k ~ x_k`` (minimal-norm solution).

    ``voxelizations`` has shape ``(N_vox, K)`` and ``X`` shape ``(p, K)``;
    returns ``W`` of shape ``(N_vox, p)``.
    """
    V = np.asarray(voxelizations, dtype=float)
    X = np.asarray(X, dtype=float)
    if V.shape[1] != X.shape[1]:
        raise DimensionError("voxelizations and X must have one column per template")
    U, s, Vt = np.linalg.svd(V.T, full_matrices=False)
    keep = s > PINV_TOL * s[0] if s.size and s[0] > 0 else np.zeros(s.size, dtype=bool)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return Vt.T @ (inv[:, None] * (U.T @ X.T))


@dataclass(eq=False)
class EmbeddingModel:
    """Trained Best-Template selector.

    ``registry`` lists one ``(name, descriptor)`` pair per column of ``X``.
    """

    p: int
    X: np.ndarray
    W_map: np.ndarray
    eigenvalues: np.ndarray
    grid: GridSpec
    registry: list
    q: int = 4

    def embed(self, g: GeometryDescriptor) -> np.ndarray:
        return self.W_map.T @ voxelize(g, self.grid, self.q)

    def distances(self, g: GeometryDescriptor) -> np.ndarray:
        x = self.embed(g)
        return ((self.X - x[:, None]) ** 2).sum(axis=0)


def best_template(g: GeometryDescriptor, model: EmbeddingModel) -> int:
    """Index of the template closest to ``g`` in the embedding (lowest on ties)."""
    return int(np.argmin(model.distances(g)))
