"""Unsteady Stokes flow with stabilised equal-order P1-P1 elements.

Velocity fields are stored blocked, ``[u_x(nodes), u_y(nodes)]``. Time is
advanced with implicit Euler; pressure is stabilised with the
Brezzi-Pitkaranta term ``sum_T h_T^2 <grad p, grad q>_T``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import fem
from .errors import ContractError, DomainError, SolverError
from .mesh import INFLOW, WALL, GeometryDescriptor, Mesh, generate_mesh

# Instrumentation: incremented on every full-order simulation.
CALLS = Counter()

KINDS = {"velocity": 2, "pressure": 1, "displacement": 2}
T_RANGE = (0.0, 0.5)
U0_RANGE = (0.01, 1.0)
MU_RANGE = (0.01, 0.1)
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Field:
    mesh: Mesh
    kind: str
    coeffs: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown field kind {self.kind!r}")
        expected = KINDS[self.kind] * self.mesh.n_nodes
        if self.coeffs.shape != (expected,):
            raise ContractError(f"{self.kind} field needs {expected} coefficients, "
                                f"got shape {self.coeffs.shape}")
        if not np.all(np.isfinite(self.coeffs)):
            raise ContractError("field has non-finite entries")

    def components(self):
        return self.coeffs.reshape(KINDS[self.kind], self.mesh.n_nodes)


@dataclass(frozen=True)
class ParameterSample:
    t: float
    u0: float
    mu: float

    def __post_init__(self):
        for name, val, (lo, hi) in (("t", self.t, T_RANGE), ("u0", self.u0, U0_RANGE),
                                    ("mu", self.mu, MU_RANGE)):
            if not lo <= val <= hi:
                raise DomainError(f"{name}={val} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class BoundaryData:
    """Inflow amplitude; ``steady`` replaces the sin(2 pi t) factor by 1."""

    u0: float
    steady: bool = False

    def factor(self, t):
        return 1.0 if self.steady else float(np.sin(2.0 * np.pi * t))


@dataclass(eq=False)
class SystemOperator:
    mesh: Mesh
    mu: float
    dt: float | None
    matrix: sp.csr_matrix
    mass: sp.csr_matrix
    fixed: np.ndarray
    free: np.ndarray
    _lu: object = None
    _coupling: sp.csr_matrix = None

    @property
    def n_nodes(self):
        return self.mesh.n_nodes

    def factorize(self):
        if self._lu is None:
            a = self.matrix[self.free][:, self.free].tocsc()
            self._coupling = self.matrix[self.free][:, self.fixed].tocsr()
            self._free_matrix = a
            self._lu = spla.splu(a)
        return self._lu


def assemble(m: Mesh, mu: float, dt: float | None) -> SystemOperator:
    """Block operator of the implicit-Euler Stokes step (``dt=None``: steady)."""
    if not mu > 0:
        raise DomainError(f"viscosity must be positive, got {mu}")
    if dt is not None and not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    mass = fem.mass_matrix(m)
    stiff = fem.stiffness_matrix(m)
    bx, by = fem.divergence_matrices(m)
    stab = fem.stiffness_matrix(m, weights=m.longest_edge ** 2)
    a = mu * stiff
    if dt is not None:
        a = a + mass / dt
    matrix = sp.bmat([[a, None, -bx.T], [None, a, -by.T], [bx, by, stab]], format="csr")
    n = m.n_nodes
    dirichlet = np.union1d(m.nodes_with_tag(INFLOW), m.nodes_with_tag(WALL))
    fixed = np.concatenate([dirichlet, n + dirichlet])
    free = np.setdiff1d(np.arange(3 * n), fixed)
    return SystemOperator(m, mu, dt, matrix, mass, fixed, free)


def inflow_profile(m: Mesh, u0: float) -> np.ndarray:
    """Axial inflow velocity ``u0 (1 - (y/h(0))^2)`` at every node (0 off inflow)."""
    h0 = m.descriptor.profile(0.0)
    prof = np.zeros(m.n_nodes)
    inflow = m.nodes_with_tag(INFLOW)
    walls = m.nodes_with_tag(WALL)
    y = m.nodes[inflow, 1]
    prof[inflow] = u0 * (1.0 - (y / h0) ** 2)
    prof[walls] = 0.0
    return prof


def _dirichlet_values(op: SystemOperator, bc: BoundaryData, t: float) -> np.ndarray:
    n = op.n_nodes
    full = np.zeros(3 * n)
    full[:n] = inflow_profile(op.mesh, bc.u0) * bc.factor(t)
    return full[op.fixed]


def _solve(op: SystemOperator, rhs: np.ndarray, values: np.ndarray) -> np.ndarray:
    lu = op.factorize()
    b = rhs[op.free] - op._coupling @ values
    x = np.zeros(rhs.size)
    x[op.fixed] = values
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return x
    xf = lu.solve(b)
    res = np.linalg.norm(op._free_matrix @ xf - b) / bnorm
    if not np.isfinite(res) or res > RESIDUAL_TOL:
        # one step of iterative refinement before giving up
        xf = xf + lu.solve(b - op._free_matrix @ xf)
        res = np.linalg.norm(op._free_matrix @ xf - b) / bnorm
        if not np.isfinite(res) or res > RESIDUAL_TOL:
            raise SolverError(f"linear solve residual {res:.3e} exceeds {RESIDUAL_TOL}", res)
    x[op.free] = xf
    return x


def step(op: SystemOperator, u_prev, bc: BoundaryData, t: float):
    """One implicit-Euler step; returns ``(u, p)`` coefficient arrays."""
    n = op.n_nodes
    u_prev = np.asarray(getattr(u_prev, "coeffs", u_prev), dtype=float)
    if u_prev.shape != (2 * n,):
        raise ContractError("u_prev is not a velocity field on this operator's mesh")
    rhs = np.zeros(3 * n)
    if op.dt is not None:
        rhs[:n] = op.mass @ u_prev[:n] / op.dt
        rhs[n:2 * n] = op.mass @ u_prev[n:] / op.dt
    x = _solve(op, rhs, _dirichlet_values(op, bc, t))
    return x[:2 * n], x[2 * n:]


def solve_steady(m: Mesh, u0: float, mu: float):
    """Steady Stokes solution, the fixed point of the implicit-Euler step
    with the inflow held at full amplitude. Returns ``(u, p)``."""
    op = assemble(m, mu, None)
    return step(op, np.zeros(2 * m.n_nodes), BoundaryData(u0, steady=True), 0.0)


@dataclass(eq=False)
class Trajectory:
    """Velocity snapshots ``snapshots[k]`` at ``times[k]`` on ``mesh``."""

    mesh: Mesh
    times: np.ndarray
    snapshots: np.ndarray

    def __len__(self):
        return self.times.size

    def __iter__(self):
        for t, u in zip(self.times, self.snapshots):
            yield float(t), Field(self.mesh, "velocity", u)


def simulate(g: GeometryDescriptor | Mesh, sample, dt: float = 0.02, T_end: float = 0.5,
             h: float | None = None) -> Trajectory:
    """Run the time-dependent problem from rest and return T_end/dt snapshots.

    ``g`` is a descriptor (meshed with size ``h``) or an existing mesh;
    ``sample`` is a pair ``(u0, mu)``.
    """
    u0, mu = (float(v) for v in sample)
    # u0 = 0 (fluid at rest) is accepted as a degenerate sample
    for name, val, (lo, hi) in (("u0", u0, (0.0, U0_RANGE[1]) if u0 == 0 else U0_RANGE),
                                ("mu", mu, MU_RANGE)):
        if not lo <= val <= hi:
            raise DomainError(f"{name}={val} outside [{lo}, {hi}]")
    m = g if isinstance(g, Mesh) else generate_mesh(g, h)
    CALLS["simulate"] += 1
    n_steps = int(round(T_end / dt))
    op = assemble(m, mu, dt)
    bc = BoundaryData(u0)
    u = np.zeros(2 * m.n_nodes)
    times = dt * np.arange(1, n_steps + 1)
    snaps = np.empty((n_steps, 2 * m.n_nodes))
    for k, t in enumerate(times):
        u, _ = step(op, u, bc, t)
        snaps[k] = u
    return Trajectory(m, times, snaps)


def poiseuille(m: Mesh, u0: float):
    """Exact Poiseuille velocity for a straight channel, as a callable of (x, y)."""
    half = 0.5 * m.descriptor.D

    def u(x, y):
        return u0 * (1.0 - (y / half) ** 2), np.zeros_like(y)

    return u
