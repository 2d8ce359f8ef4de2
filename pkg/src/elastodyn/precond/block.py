"""Block preconditioners for the velocity/pressure system [[A, B], [C, D]].

``SCRSolver`` runs the segregated Schur-complement-reduction sweep: solve
with A, eliminate, solve the Schur complement S = D - C A^-1 B matrix-free,
back-substitute and solve with A again.  With relaxed tolerances it is used
as a variable right preconditioner inside FGMRES.  ``SimplePrecond`` swaps
the Schur solve for S^ = D - C diag(A)^-1 B and the final A-solve for a
diagonal correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..krylov import KrylovResult, SolverConfig, gmres
from .amg import AMGHierarchy, AMGOptions, amg_build


class ZeroDiagonalError(ValueError):
    def __init__(self, row: int):
        super().__init__(f"diag(A) vanishes at row {row}")
        self.row = row


def build_shat(blocks) -> sp.csr_matrix:
    """S^ = D - C diag(A)^-1 B as an explicit CSR matrix."""
    d = blocks.A.diagonal()
    zero = np.flatnonzero(d == 0)
    if zero.size:
        raise ZeroDiagonalError(int(zero[0]))
    S = (blocks.D - blocks.C @ sp.diags(1.0 / d) @ blocks.B).tocsr()
    S.sum_duplicates()
    S.sort_indices()
    return S


@dataclass
class LevelCounter:
    """Accumulates iteration counts of repeated solves at one level."""

    solves: int = 0
    iterations: int = 0
    failures: int = 0

    def add(self, res: KrylovResult):
        self.solves += 1
        self.iterations += res.iterations
        self.failures += 0 if res.converged else 1

    @property
    def mean(self) -> float:
        return self.iterations / self.solves if self.solves else 0.0

    def reset(self):
        self.solves = self.iterations = self.failures = 0


@dataclass(frozen=True)
class NestedConfig:
    """Tolerances of the outer, intermediate (A, S) and inner solvers."""

    outer: SolverConfig = SolverConfig(restart=50, maxiter=200, rtol=1e-8, atol=1e-50)
    A: SolverConfig = SolverConfig(restart=50, maxiter=100, rtol=1e-4, atol=1e-50)
    S: SolverConfig = SolverConfig(restart=50, maxiter=100, rtol=1e-4, atol=1e-50)
    I: SolverConfig = SolverConfig(restart=50, maxiter=100, rtol=1e-4, atol=1e-50)

    @classmethod
    def uniform(cls, rtol: float, inner_rtol: float | None = None, **kw) -> "NestedConfig":
        base = cls(**kw)
        ri = rtol if inner_rtol is None else inner_rtol
        return cls(outer=base.outer, A=base.A.with_(rtol=rtol), S=base.S.with_(rtol=rtol),
                   I=base.I.with_(rtol=ri))

    @classmethod
    def efficient(cls, rtol: float = 1e-4, **kw) -> "NestedConfig":
        """Inner tolerance relaxed by two orders relative to the S-solve."""
        return cls.uniform(rtol, min(100.0 * rtol, 0.5), **kw)

    @property
    def skip_inner(self) -> bool:
        return self.I.rtol >= 1.0


def velocity_amg(blocks, options: AMGOptions | None = None, block_size: int = 3) -> AMGHierarchy:
    """AMG for A, aggregating by mesh node when ``blocks.v_dofs`` is known."""
    v_dofs = getattr(blocks, "v_dofs", None)
    if v_dofs is not None:
        v_dofs = np.asarray(v_dofs)
        return amg_build(blocks.A, options, nullspace=getattr(blocks, "near_kernel", None),
                         dof_nodes=v_dofs // 3, dof_comps=v_dofs % 3)
    bs = block_size if blocks.A.shape[0] % block_size == 0 else 1
    return amg_build(blocks.A, options, bs)


class SchurOperator:
    """x_p -> D x_p - C A^-1 (B x_p), one inner A-solve per application."""

    def __init__(self, blocks, inner: SolverConfig, amg_A=None, counter: LevelCounter | None = None):
        self.B, self.C, self.D = blocks.B, blocks.C, blocks.D
        self.A = blocks.A
        self.inner = inner
        self.amg_A = amg_A
        self.counter = counter if counter is not None else LevelCounter()
        n = self.D.shape[0]
        self.shape = (n, n)

    def matvec(self, x_p: np.ndarray) -> np.ndarray:
        x_p = np.asarray(x_p, dtype=float)
        y = self.B @ x_p                          # 1
        if not np.any(y):
            self.counter.add(KrylovResult(np.zeros(self.A.shape[0]), 0, converged=True))
            return self.D @ x_p
        res = gmres(self.A, y, self.amg_A, self.inner)  # 2
        z = self.C @ res.x                        # 3
        self.counter.add(res)
        return self.D @ x_p - z                   # 4, 5

    __call__ = matvec

    def dense(self) -> np.ndarray:
        """Exact S from a dense inverse of A (small systems only)."""
        A = self.A.toarray()
        return self.D.toarray() - self.C.toarray() @ np.linalg.solve(A, self.B.toarray())


def schur_apply(blocks, x_p, inner: SolverConfig, amg_A=None) -> np.ndarray:
    return SchurOperator(blocks, inner, amg_A).matvec(x_p)


class SCRSolver:
    """Segregated solve of [[A, B], [C, D]] [x_v; x_p] = [r_v; r_p].

    Hierarchies for A and S^ are built once and reused.  Statistics are
    accumulated in ``counters`` ("A", "S", "I").
    """

    def __init__(self, blocks, config: NestedConfig | None = None,
                 amg_options: AMGOptions | None = None, block_size: int = 3,
                 amg_A: AMGHierarchy | None = None, amg_S: AMGHierarchy | None = None):
        self.blocks = blocks
        self.config = config or NestedConfig()
        self.n_v, self.n_p = blocks.A.shape[0], blocks.D.shape[0]
        self.amg_A = amg_A if amg_A is not None else velocity_amg(blocks, amg_options, block_size)
        self.Shat = build_shat(blocks)
        self.amg_S = amg_S if amg_S is not None else amg_build(self.Shat, amg_options, 1)
        self.counters = {"A": LevelCounter(), "S": LevelCounter(), "I": LevelCounter()}
        self.schur = SchurOperator(blocks, self.config.I, self.amg_A, self.counters["I"])

    def solve_A(self, r):
        res = gmres(self.blocks.A, r, self.amg_A, self.config.A)
        self.counters["A"].add(res)
        return res.x

    def solve(self, r_v, r_p):
        b = self.blocks
        x_hat = self.solve_A(r_v)                              # 1
        r_p = r_p - b.C @ x_hat                                # 2
        op = self.Shat if self.config.skip_inner else self.schur
        res = gmres(op, r_p, self.amg_S, self.config.S)        # 3
        self.counters["S"].add(res)
        x_p = res.x
        r_v = r_v - b.B @ x_p                                  # 4
        x_v = self.solve_A(r_v)                                # 5
        return x_v, x_p

    def apply(self, r: np.ndarray) -> np.ndarray:
        x_v, x_p = self.solve(r[:self.n_v], r[self.n_v:])
        return np.concatenate([x_v, x_p])

    __call__ = apply

    def reset_counters(self):
        for c in self.counters.values():
            c.reset()


def scr_solve(blocks, r_v, r_p, config: NestedConfig | None = None, **kw):
    """One SCR sweep; returns ``(x_v, x_p, counters)``."""
    solver = SCRSolver(blocks, config, **kw)
    x_v, x_p = solver.solve(np.asarray(r_v, float), np.asarray(r_p, float))
    return x_v, x_p, solver.counters


class NestedPrecond(SCRSolver):
    """SCR at relaxed tolerances; its action varies, so pair it with FGMRES."""


class SimplePrecond:
    """Factored SIMPLE preconditioner with H = diag(A)^-1."""

    def __init__(self, blocks, config: NestedConfig | None = None,
                 amg_options: AMGOptions | None = None, block_size: int = 3):
        self.blocks = blocks
        self.config = config or NestedConfig()
        self.n_v, self.n_p = blocks.A.shape[0], blocks.D.shape[0]
        self.amg_A = velocity_amg(blocks, amg_options, block_size)
        self.Shat = build_shat(blocks)
        self.amg_S = amg_build(self.Shat, amg_options, 1)
        self.Hinv = 1.0 / blocks.A.diagonal()
        self.counters = {"A": LevelCounter(), "S": LevelCounter(), "I": LevelCounter()}

    def solve(self, r_v, r_p):
        b = self.blocks
        res = gmres(b.A, r_v, self.amg_A, self.config.A)
        self.counters["A"].add(res)
        r_p = r_p - b.C @ res.x
        rs = gmres(self.Shat, r_p, self.amg_S, self.config.S)
        self.counters["S"].add(rs)
        x_v = res.x - self.Hinv * (b.B @ rs.x)
        return x_v, rs.x

    def apply(self, r):
        x_v, x_p = self.solve(r[:self.n_v], r[self.n_v:])
        return np.concatenate([x_v, x_p])

    __call__ = apply

    def dense(self) -> np.ndarray:
        """The preconditioning matrix [[A, A H B], [C, D]] (small systems only)."""
        b = self.blocks
        A = b.A.toarray()
        AHB = A @ (self.Hinv[:, None] * b.B.toarray())
        return np.block([[A, AHB], [b.C.toarray(), b.D.toarray()]])

    def reset_counters(self):
        for c in self.counters.values():
            c.reset()
