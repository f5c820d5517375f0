"""Linear solvers for the constrained saddle-point system.

Two direct paths share one residual contract:

* solve_saddle: monolithic sparse LU, UMFPACK (multifrontal, via cvxopt)
  when available since its fill on these 3D systems is far smaller than
  SuperLU's, with SuperLU (COLAMD) as the fallback.
* solve_substructured: one-level nonoverlapping domain decomposition for
  systems whose monolithic factorization would not fit in memory.  The
  caller provides index groups with no domain-domain coupling; domain
  blocks are factored one at a time and condensed onto a dense interface
  Schur complement.

A MINRES path with a diagonal preconditioner exists as a low-memory
fallback.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


@dataclass
class SolveReport:
    x: np.ndarray
    relative_residual: float
    method: str
    wall_time: float
    iterations: int = 0


def solve_saddle(K: sp.spmatrix, F: np.ndarray, tol: float = 1e-10,
                 method: str = "direct") -> SolveReport:
    """Solve K x = F to relative residual <= tol.

    A singular factorization signals an assembly bug (the scheme matrix is
    provably nonsingular) and raises SolverError.
    """
    if not (0.0 < tol <= 1e-6):
        raise ValueError(f"tol must be in (0, 1e-6], got {tol}")
    t0 = time.perf_counter()
    normF = np.linalg.norm(F)
    if normF == 0.0:
        return SolveReport(np.zeros(K.shape[0]), 0.0, method,
                           time.perf_counter() - t0)

    if method == "direct":
        x = _direct_solve(K, F, tol, normF)
        iters = 0
    elif method == "krylov":
        M = _block_jacobi_preconditioner(K)
        count = [0]

        def cb(_):
            count[0] += 1
        x, info = spla.minres(K, F, M=M, rtol=tol * 1e-2, maxiter=200000,
                              callback=cb)
        if info != 0:
            raise SolverError(f"MINRES did not converge (info={info})")
        iters = count[0]
    else:
        raise ValueError(f"unknown solver method: {method}")

    rel = np.linalg.norm(F - K @ x) / normF
    if not np.isfinite(rel) or rel > tol:
        raise SolverError(f"residual contract violated: {rel:.3e} > {tol:.1e}")
    return SolveReport(x, float(rel), method, time.perf_counter() - t0, iters)


def _direct_solve(K: sp.spmatrix, F: np.ndarray, tol: float,
                  normF: float) -> np.ndarray:
    try:
        from cvxopt import matrix, spmatrix
        from cvxopt import umfpack
    except ImportError:
        return _superlu_solve(K, F, tol, normF)
    coo = K.tocoo()
    A = spmatrix(coo.data, coo.row.astype(np.int64),
                 coo.col.astype(np.int64), size=coo.shape)
    del coo
    try:
        symb = umfpack.symbolic(A)
        num = umfpack.numeric(A, symb)
        X = matrix(F)
        umfpack.solve(A, num, X)
        x = np.asarray(X).ravel().copy()
        # one step of iterative refinement guards against pivot growth
        r = F - K @ x
        if np.linalg.norm(r) > tol * normF:
            R = matrix(r)
            umfpack.solve(A, num, R)
            x = x + np.asarray(R).ravel()
    except ArithmeticError as exc:
        raise SolverError(f"direct factorization failed: {exc}") from exc
    return x


def _superlu_solve(K: sp.spmatrix, F: np.ndarray, tol: float,
                   normF: float) -> np.ndarray:
    try:
        lu = spla.splu(K.tocsc(), permc_spec="COLAMD",
                       options={"SymmetricMode": True})
        x = lu.solve(F)
    except RuntimeError as exc:
        raise SolverError(f"direct factorization failed: {exc}") from exc
    r = F - K @ x
    if np.linalg.norm(r) > tol * normF:
        x = x + lu.solve(r)
    return x


# Below this block size SuperLU is used for domain factorizations: its
# multi-RHS triangular solves are far faster than repeated UMFPACK solves
# and its larger fill is affordable.  Above it, UMFPACK's lower memory wins.
SUPERLU_MAX_BLOCK = 20_000

# Domain factors at most this large are kept for the back-substitution and
# refinement passes; larger ones are refactored on demand so at most one
# big factorization is in memory at a time.
DOMAIN_CACHE_MAX = 10_000


def _domain_factor(Kd: sp.spmatrix):
    """Factor one diagonal block; returns a solve callable for 1-D or 2-D
    right-hand sides.  The factorization is freed when the callable is."""
    use_umfpack = Kd.shape[0] > SUPERLU_MAX_BLOCK
    if use_umfpack:
        try:
            from cvxopt import matrix, spmatrix, umfpack
        except ImportError:
            use_umfpack = False
    if not use_umfpack:
        try:
            lu = spla.splu(Kd.tocsc(), permc_spec="COLAMD",
                           options={"SymmetricMode": True})
        except RuntimeError as exc:
            raise SolverError(
                f"direct factorization failed: {exc}") from exc
        return lu.solve
    coo = Kd.tocoo()
    A = spmatrix(coo.data, coo.row.astype(np.int64),
                 coo.col.astype(np.int64), size=coo.shape)
    del coo
    try:
        symb = umfpack.symbolic(A)
        num = umfpack.numeric(A, symb)
    except ArithmeticError as exc:
        raise SolverError(f"direct factorization failed: {exc}") from exc

    def solve(B):
        one_d = B.ndim == 1
        X = matrix(np.asfortranarray(B if not one_d else B[:, None]))
        umfpack.solve(A, num, X)
        out = np.array(X)
        return out.ravel() if one_d else out

    return solve


def solve_substructured(K: sp.spmatrix, F: np.ndarray, parts,
                        tol: float = 1e-10,
                        chunk: int = 256) -> SolveReport:
    """One-level nonoverlapping Schur-complement solve of K x = F.

    parts = [domain_0, ..., domain_m, interface]: index arrays covering all
    unknowns, with no direct coupling between two domains (every
    cross-domain entry of K touches the interface).  Domain blocks are
    factored one at a time, so peak memory is one domain factorization
    plus the dense interface Schur complement; domains are refactored for
    the back substitution instead of being kept.
    """
    if not (0.0 < tol <= 1e-6):
        raise ValueError(f"tol must be in (0, 1e-6], got {tol}")
    from scipy.linalg import lu_factor, lu_solve
    t0 = time.perf_counter()
    n = K.shape[0]
    normF = np.linalg.norm(F)
    if normF == 0.0:
        return SolveReport(np.zeros(n), 0.0, "substructured",
                           time.perf_counter() - t0)
    K = K.tocsr()
    doms = parts[:-1]
    I = parts[-1]
    # small factors are kept for the later passes; large ones are redone
    # on demand so only one is ever in memory
    cache: dict[int, object] = {}

    def factor(j):
        if j in cache:
            return cache[j]
        solve = _domain_factor(K[doms[j]].tocsc()[:, doms[j]])
        if len(doms[j]) <= DOMAIN_CACHE_MAX:
            cache[j] = solve
        return solve

    # Fortran order lets lu_factor work in place without a transposed copy
    S = K[I].tocsc()[:, I].toarray(order="F")
    g = F[I].copy()
    for j, d in enumerate(doms):
        Bd = K[d].tocsc()[:, I]
        solve = factor(j)
        BdT = Bd.T.tocsr()
        g -= BdT @ solve(F[d])
        cols = np.flatnonzero(np.diff(Bd.indptr))
        for s0 in range(0, len(cols), chunk):
            cc = cols[s0:s0 + chunk]
            S[:, cc] -= BdT @ solve(Bd[:, cc].toarray())
        del solve, Bd, BdT
    S_lu = lu_factor(S, overwrite_a=True, check_finite=False)
    del S
    xI = lu_solve(S_lu, g, check_finite=False)
    x = np.zeros(n)
    x[I] = xI
    for j, d in enumerate(doms):
        solve = factor(j)
        x[d] = solve(F[d] - K[d].tocsc()[:, I] @ xI)
        del solve

    def refine(rhs):
        gl = rhs[I].copy()
        for j, d in enumerate(doms):
            gl -= K[d].tocsc()[:, I].T @ factor(j)(rhs[d])
        y = np.zeros(n)
        y[I] = lu_solve(S_lu, gl, check_finite=False)
        for j, d in enumerate(doms):
            y[d] = factor(j)(rhs[d] - K[d].tocsc()[:, I] @ y[I])
        return y

    rel = np.linalg.norm(F - K @ x) / normF
    passes = 0
    while (not np.isfinite(rel) or rel > tol) and passes < 2:
        x = x + refine(F - K @ x)
        rel = np.linalg.norm(F - K @ x) / normF
        passes += 1
    if not np.isfinite(rel) or rel > tol:
        raise SolverError(f"residual contract violated: {rel:.3e} > {tol:.1e}")
    return SolveReport(x, float(rel), "substructured",
                       time.perf_counter() - t0, passes)


def _block_jacobi_preconditioner(K: sp.spmatrix):
    d = np.abs(K.diagonal())
    d[d == 0.0] = 1.0
    inv = 1.0 / d

    def apply(v):
        return inv * v

    return spla.LinearOperator(K.shape, matvec=apply)
