"""PBDW state estimation, inf-sup constants and the dimension sweep."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import DimensionError, IllPosedError
from .rom import Subspace, check_compatible

BETA_TOL = 1e-12
TIE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    estimate: np.ndarray
    coeffs_V: np.ndarray
    correction_W: np.ndarray
    beta: float


def _space(S):
    return getattr(S, "subspace", S)


def cross_gramian(V, W) -> np.ndarray:
    """``C = Psi^T M Phi`` for orthonormal bases ``Phi`` of V and ``Psi`` of W."""
    V, W = _space(V), _space(W)
    check_compatible(V, W)
    return W.basis.T @ (V.mass @ V.basis)


def beta(E, F) -> float:
    """Inf-sup constant ``inf_{e in E} ||P_F e|| / ||e||``."""
    E, F = _space(E), _space(F)
    if E.dim < 1 or F.dim < 1:
        raise DimensionError("beta needs nonempty subspaces")
    if E.dim > F.dim:
        return 0.0
    s = np.linalg.svd(cross_gramian(E, F), compute_uv=False)
    return float(min(s.min(), 1.0))


def reconstruct(y, V: Subspace, W) -> ReconstructionResult:
    """PBDW estimate from raw measurements ``y``.

    ``W`` is an :class:`~shapepbdw.observe.ObservationSpace`; ``y`` are the
    raw functional values ``l_i(u)``.
    """
    n, m = V.dim, W.dim
    if n > m:
        raise DimensionError(f"n={n} exceeds m={m}: beta(V_n, W_m) = 0")
    C = cross_gramian(V, W)
    s = np.linalg.svd(C, compute_uv=False)
    b = float(min(s.min(), 1.0))
    if b <= BETA_TOL:
        raise IllPosedError(f"beta(V, W) = {b:.3e} <= {BETA_TOL}; reduce n", b)
    yc = W.coords(y)
    Q, R = la.qr(C, mode="economic")
    z = la.solve_triangular(R, Q.T @ yc)
    corr = yc - C @ z
    est = V.basis @ z + W.basis @ corr
    return ReconstructionResult(est, z, corr, b)


def reconstruct_many(Y, V: Subspace, W) -> np.ndarray:
    """Estimates for each row of ``Y`` (linear, so one factorisation)."""
    Y = np.atleast_2d(Y)
    C = cross_gramian(V, W)
    if V.dim > W.dim:
        raise DimensionError(f"n={V.dim} exceeds m={W.dim}")
    b = float(np.linalg.svd(C, compute_uv=False).min())
    if b <= BETA_TOL:
        raise IllPosedError(f"beta(V, W) = {b:.3e} <= {BETA_TOL}; reduce n", b)
    Yc = W.coords(Y)
    Q, R = la.qr(C, mode="economic")
    Z = la.solve_triangular(R, Q.T @ Yc.T)
    corr = Yc.T - C @ Z
    return (V.basis @ Z + W.basis @ corr).T


@dataclass(frozen=True)
class BoundReport:
    error: float
    bound: float
    holds: bool


def error_bound_check(u, result: ReconstructionResult, V: Subspace,
                      slack: float = 1e-9) -> BoundReport:
    """Check ``||u - A(P_W u)|| <= ||u - P_V u|| / beta(V, W)``."""
    u = np.asarray(getattr(u, "coeffs", u), dtype=float)
    M = V.mass
    e = u - result.estimate
    err = float(np.sqrt(max(e @ (M @ e), 0.0)))
    r = u - V.basis @ (V.basis.T @ (M @ u))
    dist = float(np.sqrt(max(r @ (M @ r), 0.0)))
    bound = dist / result.beta
    return BoundReport(err, bound, err <= bound * (1.0 + slack) + 1e-300)


@dataclass(frozen=True)
class SweepResult:
    n: np.ndarray
    error: np.ndarray
    beta: np.ndarray
    n_star: int


def sweep_n(snapshots, basis: Subspace, W, mode: str = "ms",
            n_max: int | None = None) -> SweepResult:
    """PBDW error over validation ``snapshots`` for nested ``V_1 ... V_nmax``.

    ``basis`` holds the POD modes in decreasing energy order; its leading
    ``n`` columns give ``V_n``. Ties in the minimum go to the smallest n;
    values within ``TIE_TOL`` times the snapshot rms norm of the minimum
    count as ties so round-off does not pick the dimension.
    """
    S = np.atleast_2d(np.asarray(snapshots, dtype=float))
    top = min(basis.dim, W.dim) if n_max is None else min(n_max, basis.dim, W.dim)
    Y = W.measure(S)
    M = basis.mass
    ns, errs, betas = [], [], []
    for n in range(1, top + 1):
        Vn = basis.truncate(n)
        b = beta(Vn, W)
        if b <= BETA_TOL:
            break
        est = reconstruct_many(Y, Vn, W)
        R = S - est
        d2 = np.clip(np.einsum("ij,ij->i", R, (M @ R.T).T), 0.0, None)
        value = np.sqrt(d2.max()) if mode == "wc" else np.sqrt(d2.mean())
        ns.append(n)
        errs.append(float(value))
        betas.append(b)
    errs = np.asarray(errs)
    n_star = 0
    if ns:
        d2 = np.clip(np.einsum("ij,ij->i", S, (M @ S.T).T), 0.0, None)
        tie = TIE_TOL * float(np.sqrt(d2.mean()))
        n_star = int(ns[int(np.nonzero(errs <= errs.min() + tie)[0][0])])
    return SweepResult(np.asarray(ns), errs, np.asarray(betas), n_star)
