"""Restarted GMRES / FGMRES with right preconditioning and diagonal scaling.

Sparse storage is scipy CSR; operators may be matrices, scipy
LinearOperators or plain callables (matrix-free).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp

REORTH_TOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule ||r|| <= max(rtol * ||r0||, atol) or ``maxiter`` steps."""

    restart: int = 50
    maxiter: int = 200
    rtol: float = 1e-8
    atol: float = 1e-50

    def __post_init__(self):
        if self.restart < 1 or self.maxiter < 0:
            raise ValueError("restart must be >= 1 and maxiter >= 0")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class KrylovResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)
    converged: bool = False
    hessenberg: list = field(default_factory=list, repr=False)
    basis: np.ndarray | None = field(default=None, repr=False)

    def __iter__(self):
        # allows ``x, its, hist = gmres(...)``
        return iter((self.x, self.iterations, self.residuals))


def as_apply(op) -> Callable[[np.ndarray], np.ndarray]:
    if op is None:
        return lambda x: x.copy()
    if hasattr(op, "matvec"):
        return op.matvec
    if hasattr(op, "apply"):
        return op.apply
    if callable(op):
        return op
    return lambda x: op @ x


def _krylov(op, b, precond, config: SolverConfig, x0, flexible: bool,
            keep_basis: bool = False) -> KrylovResult:
    A = as_apply(op)
    M = as_apply(precond)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A(x) if x0 is not None else b.copy()
    beta = np.linalg.norm(r)
    history = [beta]
    target = max(config.rtol * beta, config.atol)
    result = KrylovResult(x=x, iterations=0, residuals=history)
    if beta <= target:
        result.converged = True
        return result

    m = config.restart
    its = 0
    while its < config.maxiter:
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n)) if flexible else None
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        breakdown = False
        while k < m and its < config.maxiter:
            z = M(V[k])
            if flexible:
                Z[k] = z
            w = A(z)
            h = H[:, k]
            for i in range(k + 1):
                h[i] = V[i] @ w
                w -= h[i] * V[i]
            wn = np.linalg.norm(w)
            if wn > 0 and np.abs(V[:k + 1] @ w).max() > REORTH_TOL * wn:
                for i in range(k + 1):
                    c = V[i] @ w
                    h[i] += c
                    w -= c * V[i]
                wn = np.linalg.norm(w)
            h[k + 1] = wn
            for i in range(k):
                t = cs[i] * h[i] + sn[i] * h[i + 1]
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1]
                h[i] = t
            denom = np.hypot(h[k], h[k + 1])
            if denom == 0.0:
                breakdown = True
                break
            cs[k], sn[k] = h[k] / denom, h[k + 1] / denom
            h[k] = denom
            h[k + 1] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]
            its += 1
            k += 1
            history.append(abs(g[k]))
            if wn <= 1e-14 * denom:
                breakdown = True
                break
            V[k] = w / wn
            if abs(g[k]) <= target:
                break

        if k > 0:
            y = np.linalg.solve(np.triu(H[:k, :k]), g[:k]) if k > 1 else g[:1] / H[0, 0]
            if flexible:
                x = x + Z[:k].T @ y
            else:
                x = x + M(V[:k].T @ y)
        result.hessenberg.append(H[:k + 1, :k].copy())
        if keep_basis:
            result.basis = V[:k + 1].copy() if not breakdown else V[:k].copy()
        r = b - A(x)
        beta = np.linalg.norm(r)
        if beta <= target:
            result.converged = True
            break
        if breakdown and k == 0:
            break
    result.x = x
    result.iterations = its
    if not result.converged:
        result.converged = bool(np.linalg.norm(b - A(x)) <= target)
    return result


def gmres(op, rhs, precond=None, config: SolverConfig | None = None, x0=None,
          keep_basis: bool = False) -> KrylovResult:
    """Right-preconditioned restarted GMRES(m).

    Never raises on non-convergence; check ``result.converged``.
    """
    return _krylov(op, rhs, precond, config or SolverConfig(), x0, False, keep_basis)


def fgmres(op, rhs, precond=None, config: SolverConfig | None = None, x0=None,
           keep_basis: bool = False) -> KrylovResult:
    """Flexible GMRES(m): the preconditioner may change between iterations."""
    return _krylov(op, rhs, precond, config or SolverConfig(), x0, True, keep_basis)


# --- symmetric diagonal scaling -------------------------------------------

EPS_DIAG = 1.0e-15


@dataclass
class ScalingConfig:
    W_v: np.ndarray
    W_p: np.ndarray
    eps_diag: float = EPS_DIAG

    @property
    def W(self) -> np.ndarray:
        return np.concatenate([self.W_v, self.W_p])


def scaling_vector(diag: np.ndarray, eps_diag: float = EPS_DIAG) -> np.ndarray:
    a = np.abs(np.asarray(diag, dtype=float))
    W = np.ones_like(a)
    big = a >= eps_diag
    W[big] = a[big] ** -0.5
    return W


def diag_scale(system, eps_diag: float = EPS_DIAG):
    """W A W applied blockwise to [[A, B], [C, D]]; residuals scaled by W.

    Returns the scaled system and the :class:`ScalingConfig`; recover the
    unscaled solution with ``x = W * x_scaled``.
    """
    from .assembly import BlockSystem

    Wv = scaling_vector(system.A.diagonal(), eps_diag)
    Wp = scaling_vector(system.D.diagonal(), eps_diag)
    dv, dp = sp.diags(Wv), sp.diags(Wp)
    scaled = BlockSystem(
        A=(dv @ system.A @ dv).tocsr(), B=(dv @ system.B @ dp).tocsr(),
        C=(dp @ system.C @ dv).tocsr(), D=(dp @ system.D @ dp).tocsr(),
        R_m=Wv * system.R_m, R_p=Wp * system.R_p, v_dofs=system.v_dofs,
        near_kernel=None if getattr(system, "near_kernel", None) is None
        else system.near_kernel / Wv[:, None])
    return scaled, ScalingConfig(Wv, Wp, eps_diag)


def scale_matrix(M: sp.spmatrix, eps_diag: float = EPS_DIAG):
    """Symmetric scaling of a single square matrix: (W M W, W)."""
    W = scaling_vector(M.diagonal(), eps_diag)
    d = sp.diags(W)
    return (d @ M @ d).tocsr(), W


# --- CSR helpers ------------------------------------------------------------

def csr(matrix) -> sp.csr_matrix:
    """Canonical CSR: sorted column indices, duplicates summed."""
    M = sp.csr_matrix(matrix, dtype=float)
    M.sum_duplicates()
    M.sort_indices()
    return M


def write_matrix_market(path, matrix, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(matrix), comment=comment)


def read_matrix_market(path) -> sp.csr_matrix:
    return csr(scipy.io.mmread(str(path)))
