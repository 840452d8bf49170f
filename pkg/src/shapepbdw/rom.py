"""Reduced models by POD in the L2 inner product."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, RankError

CALLS = Counter()


@dataclass(frozen=True, eq=False)
class Subspace:
    """M-orthonormal basis (columns of ``basis``) of a space of discrete fields.

    ``mesh`` is carried for bookkeeping only; compatibility of two subspaces
    is decided by identity of their ``mass`` matrix object.
    """

    basis: np.ndarray
    mass: object
    mesh: object = None
    kind: str = "velocity"

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ndof(self) -> int:
        return self.basis.shape[0]

    def gram(self) -> np.ndarray:
        return self.basis.T @ (self.mass @ self.basis)

    def truncate(self, n: int) -> "Subspace":
        return Subspace(self.basis[:, :n], self.mass, self.mesh, self.kind)


def check_compatible(a, b):
    if a.mass is not b.mass or a.ndof != b.ndof:
        raise ContractError("subspaces live on different meshes or metrics")


def inner(u, v, mass):
    return float(u @ (mass @ v))


def norm(u, mass):
    return float(np.sqrt(max(inner(u, u, mass), 0.0)))


def orthonormalize(vectors: np.ndarray, mass, drop_tol: float | None = None,
                   passes: int = 2):
    """Modified Gram-Schmidt in the ``mass`` inner product.

    With ``drop_tol`` set, a column whose residual norm falls below
    ``drop_tol`` times its original norm is dropped; returns
    ``(basis, kept_indices)``. Without it, returns the basis only.
    """
    vecs = np.array(vectors, dtype=float, copy=True)
    if vecs.ndim == 1:
        vecs = vecs[:, None]
    out = []
    kept = []
    for k in range(vecs.shape[1]):
        v = vecs[:, k]
        n0 = norm(v, mass)
        if n0 == 0.0:
            if drop_tol is not None:
                continue
            raise RankError("zero vector cannot be orthonormalised", len(out))
        for _ in range(passes):
            for q in out:
                v = v - inner(q, v, mass) * q
        nv = norm(v, mass)
        if drop_tol is not None and nv < drop_tol * n0:
            continue
        out.append(v / nv)
        kept.append(k)
    basis = np.column_stack(out) if out else np.zeros((vecs.shape[0], 0))
    if drop_tol is not None:
        return basis, kept
    return basis


def pod(snapshots, mass, n: int, mesh=None, rank_tol: float = 1e-14):
    """POD by the method of snapshots.

    Parameters
    ----------
    snapshots : array (N_s, ndof)
        One snapshot per row.
    mass : sparse matrix
        Gram metric of the ambient space.
    n : int
        Number of modes to keep.

    Returns
    -------
    (Subspace, ndarray)
        The reduced space and all singular values ``sqrt(lambda_k)`` in
        decreasing order.
    """
    S = np.atleast_2d(np.asarray(snapshots, dtype=float))
    CALLS["pod"] += 1
    MS = (mass @ S.T)
    G = S @ MS
    G = 0.5 * (G + G.T)
    lam, vec = np.linalg.eigh(G)
    order = np.argsort(lam)[::-1]
    lam = lam[order]
    vec = vec[:, order]
    lam_max = lam[0] if lam.size else 0.0
    achievable = int(np.sum(lam > rank_tol * lam_max)) if lam_max > 0 else 0
    if n < 1 or n > achievable:
        raise RankError(f"requested n={n} but numerical rank is {achievable}", achievable)
    phi = S.T @ vec[:, :n] / np.sqrt(lam[:n])[None, :]
    basis = orthonormalize(phi, mass)
    sv = np.sqrt(np.clip(lam, 0.0, None))
    return Subspace(basis, mass, mesh), sv


def project(u, V: Subspace):
    """Orthogonal projection of ``u`` (vector or rows of a matrix) onto ``V``."""
    u = np.asarray(getattr(u, "coeffs", u), dtype=float)
    if u.shape[-1] != V.ndof:
        raise ContractError(f"field of length {u.shape[-1]} does not match subspace "
                            f"with {V.ndof} dofs")
    coeff = (u @ (V.mass @ V.basis))
    return coeff @ V.basis.T


def manifold_error(snapshots, V: Subspace, mode: str = "ms") -> float:
    """Empirical worst-case (``wc``) or mean-square (``ms``) distance to ``V``."""
    S = np.atleast_2d(np.asarray(snapshots, dtype=float))
    if S.shape[0] == 0:
        raise ValueError("empty snapshot set")
    R = S - project(S, V)
    d2 = np.einsum("ij,ij->i", R, (V.mass @ R.T).T)
    d2 = np.clip(d2, 0.0, None)
    if mode == "wc":
        return float(np.sqrt(d2.max()))
    if mode == "ms":
        return float(np.sqrt(d2.mean()))
    raise ValueError(f"mode must be 'wc' or 'ms', got {mode!r}")
