"""Linear solvers for the reduced Newton system.

Each solver is a callable ``solver(system) -> (d_dv, d_dp, LinearStats)``
that scales the system, solves it and unscales the result.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from ..krylov import SolverConfig, diag_scale, fgmres, gmres
from .amg import AMGOptions
from .block import NestedConfig, NestedPrecond, SimplePrecond
from .ilu import ILU0, ZeroPivotError

NESTED = "nested"
SIMPLE = "simple"
ILU = "ilu"
DIRECT = "direct"
SOLVERS = (NESTED, SIMPLE, ILU, DIRECT)


@dataclass
class LinearStats:
    n: int = 0
    n_A: float = 0.0
    n_S: float = 0.0
    n_I: float = 0.0
    converged: bool = True
    residuals: list = field(default_factory=list, repr=False)
    time: float = 0.0
    counts: dict = field(default_factory=dict)
    error: str = ""


class _Base:
    name = ""

    def __init__(self, config: NestedConfig | None = None,
                 amg_options: AMGOptions | None = None, scale: bool = True):
        self.config = config or NestedConfig()
        self.amg_options = amg_options
        self.scale = scale
        self.history: list[LinearStats] = []

    def __call__(self, system):
        t0 = time.perf_counter()
        if self.scale:
            scaled, sc = diag_scale(system)
        else:
            scaled, sc = system, None
        rhs = np.concatenate([scaled.R_m, scaled.R_p])
        x, stats = self._solve(scaled, rhs)
        if sc is not None:
            x = sc.W * x
        stats.time = time.perf_counter() - t0
        self.history.append(stats)
        n_v = system.n_v
        return x[:n_v], x[n_v:], stats


class NestedSolver(_Base):
    """FGMRES preconditioned by the relaxed SCR sweep."""

    name = NESTED

    def _solve(self, sys, rhs):
        P = NestedPrecond(sys, self.config, self.amg_options)
        K = sys.full_matrix()
        res = fgmres(K, rhs, P, self.config.outer)
        c = P.counters
        return res.x, LinearStats(
            n=res.iterations, n_A=c["A"].mean, n_S=c["S"].mean, n_I=c["I"].mean,
            converged=res.converged, residuals=list(res.residuals),
            counts={k: (v.solves, v.iterations) for k, v in c.items()})


class SimpleSolver(_Base):
    """FGMRES preconditioned by SIMPLE."""

    name = SIMPLE

    def _solve(self, sys, rhs):
        P = SimplePrecond(sys, self.config, self.amg_options)
        K = sys.full_matrix()
        res = fgmres(K, rhs, P, self.config.outer)
        c = P.counters
        return res.x, LinearStats(
            n=res.iterations, n_A=c["A"].mean, n_S=c["S"].mean, converged=res.converged,
            residuals=list(res.residuals),
            counts={k: (v.solves, v.iterations) for k, v in c.items()})


class ILUSolver(_Base):
    """GMRES on the monolithic system with an ILU(0) preconditioner."""

    name = ILU

    def _solve(self, sys, rhs):
        K = sys.full_matrix()
        try:
            M = ILU0(K)
        except ZeroPivotError as exc:
            return np.zeros_like(rhs), LinearStats(converged=False, error=str(exc))
        res = gmres(K, rhs, M, self.config.outer)
        return res.x, LinearStats(n=res.iterations, converged=res.converged,
                                  residuals=list(res.residuals))


class DirectSolver(_Base):
    """Sparse LU (reference / debugging)."""

    name = DIRECT

    def _solve(self, sys, rhs):
        x = spla.spsolve(sys.full_matrix().tocsc(), rhs)
        return x, LinearStats(n=1)


def make_solver(name: str, config: NestedConfig | None = None,
                amg_options: AMGOptions | None = None, **kw):
    classes = {NESTED: NestedSolver, SIMPLE: SimpleSolver, ILU: ILUSolver, DIRECT: DirectSolver}
    try:
        cls = classes[name]
    except KeyError:
        raise ValueError(f"unknown solver {name!r}; choose from {SOLVERS}") from None
    return cls(config, amg_options, **kw)


__all__ = ["LinearStats", "NestedSolver", "SimpleSolver", "ILUSolver", "DirectSolver",
           "make_solver", "SOLVERS", "SolverConfig"]
