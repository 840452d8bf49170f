"""Parametric 2D Venturi channels and their structured triangulations.

Coordinates are in cm. The channel occupies ``0 <= x <= L`` and
``|y| <= h(x)`` where ``h`` is the half-height profile: ``D/2`` away from the
coarctation and a C1 ``cos^2`` bump of throat half-height ``S_r`` centred at
``S_x`` with length ``S_l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import DomainError, GeometryError

INFLOW, OUTFLOW, WALL = "inflow", "outflow", "wall"
TAGS = (INFLOW, OUTFLOW, WALL)


@dataclass(frozen=True)
class GeometryDescriptor:
    """Venturi geometry parameters (cm)."""

    S_r: float
    S_l: float
    S_x: float
    L: float = 5.0
    D: float = 0.4

    def __post_init__(self):
        if not self.L > 0 or not self.D > 0:
            raise GeometryError(f"L and D must be positive, got L={self.L}, D={self.D}")
        if not self.S_r > 0:
            raise GeometryError(f"S_r must be positive, got {self.S_r}")
        if not 0 < self.S_l <= self.L:
            raise GeometryError(f"S_l must lie in (0, L], got {self.S_l}")
        if not 0 <= self.S_x <= self.L:
            raise GeometryError(f"S_x must lie in [0, L], got {self.S_x}")

    def as_tuple(self):
        return (self.S_r, self.S_l, self.S_x, self.L, self.D)

    def matches(self, other: "GeometryDescriptor", tol: float = 1e-12) -> bool:
        return all(abs(a - b) <= tol for a, b in zip(self.as_tuple(), other.as_tuple()))

    def profile(self, x):
        """Vectorised half-height profile without the domain check."""
        x = np.asarray(x, dtype=float)
        half = 0.5 * self.D
        u = x - self.S_x
        bump = (half - self.S_r) * np.cos(np.pi * u / self.S_l) ** 2
        return np.where(np.abs(u) <= 0.5 * self.S_l, half - bump, half)

    def area(self) -> float:
        """Exact area of the channel, the integral of 2 h(x) over [0, L]."""
        a = max(0.0, self.S_x - 0.5 * self.S_l) - self.S_x
        b = min(self.L, self.S_x + 0.5 * self.S_l) - self.S_x

        def prim(u):
            return 0.5 * u + self.S_l / (4 * np.pi) * np.sin(2 * np.pi * u / self.S_l)

        bump = (0.5 * self.D - self.S_r) * (prim(b) - prim(a))
        return self.D * self.L - 2.0 * bump


def half_height_profile(g: GeometryDescriptor, x):
    """Half-height ``h(x)`` of the channel at axial position ``x``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > g.L) or not np.all(np.isfinite(xa)):
        raise DomainError(f"x outside [0, {g.L}]")
    out = g.profile(xa)
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class Mesh:
    """Triangulated channel.

    ``boundary_edges`` holds node pairs oriented counter-clockwise around
    the domain; ``boundary_tags`` gives one tag from :data:`TAGS` per edge.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    descriptor: GeometryDescriptor
    h: float
    _bins: tuple | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @cached_property
    def element_geometry(self):
        """(areas, basis gradients) per triangle; see ``_kernels.p1_gradients``."""
        return _kernels.p1_gradients(self.nodes, self.triangles)

    @cached_property
    def velocity_mass(self):
        """Blocked 2-component P1 mass matrix; the L2 metric of velocity fields."""
        from .fem import vector_mass_matrix
        return vector_mass_matrix(self)

    @property
    def areas(self) -> np.ndarray:
        return self.element_geometry[0]

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_edges)

    def nodes_with_tag(self, tag: str) -> np.ndarray:
        return np.unique(self.boundary_edges[self.boundary_tags == tag])

    @cached_property
    def longest_edge(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.sqrt((e ** 2).sum(axis=2)).max(axis=1)

    def total_area(self) -> float:
        return float(self.areas.sum())

    def with_nodes(self, nodes: np.ndarray) -> "Mesh":
        """Same connectivity on new node positions (e.g. a deformed mesh)."""
        return Mesh(np.asarray(nodes, dtype=float), self.triangles, self.boundary_edges,
                    self.boundary_tags, self.descriptor, self.h)

    def bins(self):
        if self._bins is None:
            self._bins = _build_bins(self.nodes, self.triangles)
        return self._bins


def generate_mesh(g: GeometryDescriptor, h: float) -> Mesh:
    """Structured mapped triangulation of the channel with element size ``h``."""
    if not h > 0 or not h < min(g.S_r, 0.5 * g.D):
        raise GeometryError(f"mesh size h={h} must satisfy 0 < h < min(S_r, D/2)")
    nx = math.ceil(g.L / h - 1e-9)
    ny = math.ceil(g.D / h - 1e-9)
    xs = np.linspace(0.0, g.L, nx + 1)
    hx = g.profile(xs)
    if np.any(hx <= 0):
        raise GeometryError("channel profile is not strictly positive")
    eta = np.linspace(-1.0, 1.0, ny + 1)
    X = np.repeat(xs, ny + 1)
    Y = (eta[None, :] * hx[:, None]).ravel()
    Y[:: ny + 1] = -hx
    Y[ny:: ny + 1] = hx
    nodes = np.column_stack([X, Y])

    def nid(i, j):
        return i * (ny + 1) + j

    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a, b, c, d = nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)
    tris = np.empty((2 * a.size, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])

    ii = np.arange(nx)
    jj = np.arange(ny)
    bottom = np.column_stack([nid(ii, 0), nid(ii + 1, 0)])
    right = np.column_stack([nid(nx, jj), nid(nx, jj + 1)])
    top = np.column_stack([nid(ii[::-1] + 1, ny), nid(ii[::-1], ny)])
    left = np.column_stack([nid(0, jj[::-1] + 1), nid(0, jj[::-1])])
    edges = np.vstack([bottom, right, top, left]).astype(np.int64)
    tags = np.array([WALL] * nx + [OUTFLOW] * ny + [WALL] * nx + [INFLOW] * ny)
    return Mesh(nodes, tris, edges, tags, g, float(h))


def _build_bins(nodes, tris):
    p = nodes[tris]
    lo = p.min(axis=1)
    hi = p.max(axis=1)
    span = hi - lo
    cell = float(np.sqrt(np.mean(span[:, 0] * span[:, 1]) + 1e-300)) * 2.0
    pad = 1e-9 + 1e-6 * cell
    origin = nodes.min(axis=0) - pad
    top = nodes.max(axis=0) + pad
    nbx = max(1, int(np.ceil((top[0] - origin[0]) / cell)))
    nby = max(1, int(np.ceil((top[1] - origin[1]) / cell)))
    i0 = np.clip(np.floor((lo[:, 0] - pad - origin[0]) / cell).astype(np.int64), 0, nbx - 1)
    i1 = np.clip(np.floor((hi[:, 0] + pad - origin[0]) / cell).astype(np.int64), 0, nbx - 1)
    j0 = np.clip(np.floor((lo[:, 1] - pad - origin[1]) / cell).astype(np.int64), 0, nby - 1)
    j1 = np.clip(np.floor((hi[:, 1] + pad - origin[1]) / cell).astype(np.int64), 0, nby - 1)
    wy = j1 - j0 + 1
    counts = (i1 - i0 + 1) * wy
    owners = np.repeat(np.arange(tris.shape[0], dtype=np.int64), counts)
    k = np.arange(owners.size) - np.repeat(np.cumsum(counts) - counts, counts)
    bins_of = (i0[owners] + k // wy[owners]) * nby + j0[owners] + k % wy[owners]
    order = np.argsort(bins_of, kind="stable")
    bin_tris = owners[order]
    bin_ptr = np.zeros(nbx * nby + 1, dtype=np.int64)
    np.add.at(bin_ptr, bins_of + 1, 1)
    bin_ptr = np.cumsum(bin_ptr)
    return origin, cell, nbx, nby, bin_ptr, bin_tris


def locate_points(m: Mesh, points, tol: float = 1e-10):
    """Vectorised point location.

    Returns ``(tri, bary)``; ``tri[k] == -1`` marks a point outside the mesh.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    origin, cell, nbx, nby, bin_ptr, bin_tris = m.bins()
    return _kernels.locate(m.nodes, m.triangles, origin, cell, nbx, nby, bin_ptr, bin_tris,
                           pts, tol)


def locate_point(m: Mesh, x):
    """Triangle containing ``x`` and its barycentric coordinates, or ``None``."""
    tri, bary = locate_points(m, np.asarray(x, dtype=float).reshape(1, 2))
    if tri[0] < 0:
        return None
    return int(tri[0]), bary[0]
