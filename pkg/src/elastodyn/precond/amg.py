"""Smoothed-aggregation algebraic multigrid.

Aggregation works on nodes: with ``block_size`` b, rows ``b*i .. b*i+b-1``
belong to node i and node-to-node strength uses the Frobenius norm of the
b x b coupling block.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AMGOptions:
    theta: float = 0.08          # strength-of-connection threshold
    smooth_prolongator: bool = True
    smoother: str = "sgs"        # "sgs" or "jacobi"
    jacobi_weight: float = 2.0 / 3.0
    sweeps: int = 1
    max_coarse: int = 300
    max_levels: int = 10
    min_coarsening: float = 0.9  # stop if n_coarse > min_coarsening * n


@dataclass
class Level:
    A: sp.csr_matrix
    P: sp.csr_matrix | None = None
    R: sp.csr_matrix | None = None
    diag: np.ndarray | None = None


@dataclass
class AMGHierarchy:
    levels: list
    options: AMGOptions
    coarse_lu: tuple | None = None
    coarse_pinv: np.ndarray | None = None
    fallback: bool = False
    info: dict = field(default_factory=dict)

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def sizes(self) -> list[int]:
        return [lvl.A.shape[0] for lvl in self.levels]

    def __call__(self, r: np.ndarray) -> np.ndarray:
        return amg_vcycle(self, r)

    def matvec(self, r):
        return amg_vcycle(self, r)


# --- aggregation -------------------------------------------------------------

def _node_strength(A: sp.csr_matrix, node_of: np.ndarray, n: int, theta: float) -> sp.csr_matrix:
    coo = A.tocoo()
    N = sp.coo_matrix((coo.data**2, (node_of[coo.row], node_of[coo.col])), shape=(n, n)).tocsr()
    N.sum_duplicates()
    N.data = np.sqrt(N.data)
    N.sum_duplicates()
    d = N.diagonal()
    coo = N.tocoo()
    off = coo.row != coo.col
    scale = np.sqrt(np.abs(d[coo.row] * d[coo.col]))
    keep = off & (coo.data > theta * scale) & (coo.data > 0)
    S = sp.coo_matrix((np.ones(keep.sum()), (coo.row[keep], coo.col[keep])), shape=N.shape).tocsr()
    # symmetrise the pattern so aggregation is well defined for nonsymmetric A
    S = ((S + S.T) > 0).astype(float).tocsr()
    S.sort_indices()
    return S


@numba.njit(cache=True)
def _aggregate(indptr, indices, n):
    agg = -np.ones(n, dtype=np.int64)
    na = 0
    # pass 1: root nodes whose whole neighbourhood is free
    for i in range(n):
        if agg[i] >= 0 or indptr[i + 1] == indptr[i]:
            continue
        free = True
        for k in range(indptr[i], indptr[i + 1]):
            if agg[indices[k]] >= 0:
                free = False
                break
        if free:
            agg[i] = na
            for k in range(indptr[i], indptr[i + 1]):
                agg[indices[k]] = na
            na += 1
    # pass 2: attach leftovers to a neighbouring aggregate
    tmp = agg.copy()
    for i in range(n):
        if agg[i] >= 0:
            continue
        for k in range(indptr[i], indptr[i + 1]):
            j = indices[k]
            if tmp[j] >= 0:
                agg[i] = tmp[j]
                break
    # pass 3: remaining connected nodes form new aggregates
    for i in range(n):
        if agg[i] >= 0 or indptr[i + 1] == indptr[i]:
            continue
        agg[i] = na
        for k in range(indptr[i], indptr[i + 1]):
            if agg[indices[k]] < 0:
                agg[indices[k]] = na
        na += 1
    return agg, na


def _tentative(agg: np.ndarray, n_agg: int, B: np.ndarray, node_of: np.ndarray):
    """Block-diagonal tentative prolongator with local QR of the nullspace."""
    n_dof, k = B.shape
    rows, cols, vals = [], [], []
    Bc = np.zeros((n_agg * k, k))
    dof_agg = agg[node_of]
    order = np.argsort(dof_agg, kind="stable")
    sorted_agg = dof_agg[order]
    # unaggregated (isolated) dofs have agg == -1 and sort first
    starts = np.searchsorted(sorted_agg, np.arange(n_agg + 1))
    for a in range(n_agg):
        dofs = order[starts[a]:starts[a + 1]]
        Q, R = np.linalg.qr(B[dofs], mode="reduced")
        m = Q.shape[1]
        if m < k:  # aggregate smaller than the nullspace dimension
            Q = np.hstack([Q, np.zeros((Q.shape[0], k - m))])
            R = np.vstack([R, np.zeros((k - m, k))])
        sign = np.where(np.diag(R) < 0, -1.0, 1.0)
        Q, R = Q * sign, R * sign[:, None]
        rr, cc = np.meshgrid(dofs, a * k + np.arange(k), indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
        vals.append(Q.ravel())
        Bc[a * k:(a + 1) * k] = R
    T = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_dof, n_agg * k)).tocsr()
    T.eliminate_zeros()
    return T, Bc


def spectral_radius(M, n: int, iters: int = 20, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = M(x)
        lam = np.linalg.norm(y)
        if lam == 0.0:
            return 0.0
        x = y / lam
    return float(lam)


def _safe_inv_diag(d: np.ndarray) -> np.ndarray:
    out = np.zeros_like(d)
    nz = d != 0
    out[nz] = 1.0 / d[nz]
    return out


def amg_build(A, options: AMGOptions | None = None, block_size: int = 1,
              nullspace: np.ndarray | None = None,
              dof_nodes: np.ndarray | None = None,
              dof_comps: np.ndarray | None = None) -> AMGHierarchy:
    """Build a smoothed-aggregation hierarchy for the square matrix ``A``.

    ``dof_nodes`` maps each row to its mesh node (overrides ``block_size``)
    and ``dof_comps`` to its vector component; the default nullspace is one
    constant vector per component.
    """
    options = options or AMGOptions()
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("AMG needs a square matrix")
    if dof_nodes is None:
        if n % block_size:
            raise ValueError("matrix size is not a multiple of block_size")
        node_of = np.arange(n) // block_size
        comp = np.arange(n) % block_size
        k = block_size
    else:
        dof_nodes = np.asarray(dof_nodes)
        if dof_nodes.shape != (n,):
            raise ValueError("dof_nodes must have one entry per row")
        _, node_of = np.unique(dof_nodes, return_inverse=True)
        comp = np.zeros(n, dtype=np.int64) if dof_comps is None else np.asarray(dof_comps)
        k = int(comp.max()) + 1 if n else 1
    if nullspace is None:
        B = np.zeros((n, k))
        B[np.arange(n), comp] = 1.0
    else:
        B = np.asarray(nullspace, dtype=float).reshape(n, -1)

    levels = [Level(A=A, diag=A.diagonal())]
    while (levels[-1].A.shape[0] > options.max_coarse
           and len(levels) < options.max_levels):
        Al = levels[-1].A
        nl = Al.shape[0]
        n_nodes = int(node_of.max()) + 1
        S = _node_strength(Al, node_of, n_nodes, options.theta)
        agg, n_agg = _aggregate(S.indptr, S.indices, n_nodes)
        if n_agg == 0:
            break
        T, Bc = _tentative(agg, n_agg, B, node_of)
        if T.shape[1] >= options.min_coarsening * nl:
            break
        if options.smooth_prolongator:
            Dinv = _safe_inv_diag(levels[-1].diag)
            rho = spectral_radius(lambda x: Dinv * (Al @ x), nl)
            omega = 4.0 / 3.0 / rho if rho > 0 else 0.0
            P = (T - omega * sp.diags(Dinv) @ (Al @ T)).tocsr()
        else:
            P = T
        R = P.T.tocsr()
        Ac = (R @ Al @ P).tocsr()
        Ac.sum_duplicates()
        Ac.sort_indices()
        levels[-1].P, levels[-1].R = P, R
        levels.append(Level(A=Ac, diag=Ac.diagonal()))
        node_of = np.arange(Bc.shape[0]) // B.shape[1]
        B = Bc

    hier = AMGHierarchy(levels=levels, options=options)
    coarse = levels[-1].A
    if len(levels) == 1 and coarse.shape[0] > options.max_coarse:
        warnings.warn("AMG aggregation failed to coarsen; using single-level Jacobi",
                      RuntimeWarning, stacklevel=2)
        hier.levels = [levels[0]]
        hier.fallback = True
        return hier
    dense = coarse.toarray()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", sla.LinAlgWarning)
            lu = sla.lu_factor(dense, check_finite=True)
        if not np.all(np.isfinite(lu[0])) or np.any(np.diag(lu[0]) == 0.0):
            raise np.linalg.LinAlgError
        hier.coarse_lu = lu
    except (np.linalg.LinAlgError, ValueError, sla.LinAlgWarning):
        hier.coarse_pinv = np.linalg.pinv(dense)
    return hier


# --- smoothing -------------------------------------------------------------

@numba.njit(cache=True)
def _gs_sweep(indptr, indices, data, diag, x, b, forward):
    n = x.shape[0]
    for ii in range(n):
        i = ii if forward else n - 1 - ii
        d = diag[i]
        if d == 0.0:
            continue
        s = b[i]
        for k in range(indptr[i], indptr[i + 1]):
            s -= data[k] * x[indices[k]]
        x[i] += s / d


def _smooth(level: Level, x, b, opts: AMGOptions, pre: bool):
    A = level.A
    if opts.smoother == "jacobi":
        Dinv = _safe_inv_diag(level.diag)
        for _ in range(opts.sweeps):
            x += opts.jacobi_weight * Dinv * (b - A @ x)
        return x
    for _ in range(opts.sweeps):
        # symmetric: forward then backward (reversed order in post-smoothing)
        first = pre
        _gs_sweep(A.indptr, A.indices, A.data, level.diag, x, b, first)
        _gs_sweep(A.indptr, A.indices, A.data, level.diag, x, b, not first)
    return x


def _cycle(h: AMGHierarchy, k: int, b: np.ndarray) -> np.ndarray:
    lvl = h.levels[k]
    if k == len(h.levels) - 1:
        if h.coarse_lu is not None:
            return sla.lu_solve(h.coarse_lu, b)
        return h.coarse_pinv @ b
    x = _smooth(lvl, np.zeros_like(b), b, h.options, pre=True)
    rc = lvl.R @ (b - lvl.A @ x)
    x += lvl.P @ _cycle(h, k + 1, rc)
    return _smooth(lvl, x, b, h.options, pre=False)


def amg_vcycle(h: AMGHierarchy, r: np.ndarray) -> np.ndarray:
    """One V-cycle from a zero initial guess."""
    r = np.asarray(r, dtype=float)
    if h.fallback:
        lvl = h.levels[0]
        Dinv = _safe_inv_diag(lvl.diag)
        x = np.zeros_like(r)
        for _ in range(max(h.options.sweeps, 1)):
            x += Dinv * (r - lvl.A @ x) if x.any() else Dinv * r
        return x
    return _cycle(h, 0, r)


def poisson3d(m: int) -> sp.csr_matrix:
    """7-point Laplacian on an m^3 grid with Dirichlet boundaries."""
    T = sp.diags([-np.ones(m - 1), 2 * np.ones(m), -np.ones(m - 1)], [-1, 0, 1])
    I = sp.identity(m)
    return (sp.kron(sp.kron(T, I), I) + sp.kron(sp.kron(I, T), I)
            + sp.kron(sp.kron(I, I), T)).tocsr()
