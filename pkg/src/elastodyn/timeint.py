"""Generalized-alpha time stepping with a segregated Newton corrector.

The problem object must provide ``free_v`` (indices of unconstrained
velocity/displacement components), ``residuals(stage, t)`` returning
``(R_m, R_p)`` on free components and ``tangent(stage, t, dt, alpha_m,
alpha_f, gamma, with_residuals=False)`` returning a
:class:`~elastodyn.assembly.BlockSystem`.  :class:`~elastodyn.assembly.Assembler`
satisfies this.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .assembly import BlockSystem, State
from .materials import ElementInversionError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenAlphaParams:
    rho_inf: float
    alpha_m: float
    alpha_f: float
    gamma: float
    dt: float = 1.0

    def with_dt(self, dt: float) -> "GenAlphaParams":
        return GenAlphaParams(self.rho_inf, self.alpha_m, self.alpha_f, self.gamma, dt)


def gen_alpha_params(rho_inf: float = 0.5, dt: float = 1.0) -> GenAlphaParams:
    if not 0.0 <= rho_inf <= 1.0:
        raise ValueError(f"rho_inf must lie in [0, 1], got {rho_inf}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    am = 0.5 * (3.0 - rho_inf) / (1.0 + rho_inf)
    af = 1.0 / (1.0 + rho_inf)
    return GenAlphaParams(rho_inf, am, af, af, dt)


@dataclass(frozen=True)
class NonlinearConfig:
    tol_R: float = 1e-6
    tol_A: float = 1e-6
    l_max: int = 20
    # optional backtracking: halve the update up to this many times when it
    # inverts an element or grows the residual norm by more than
    # ``growth_limit`` (0 = plain Newton)
    max_halvings: int = 0
    growth_limit: float = 1e3

    def __post_init__(self):
        if not (self.tol_R > 0 and self.tol_A > 0):
            raise ValueError("tolerances must be positive")
        if self.l_max < 1:
            raise ValueError("l_max must be >= 1")


class NewtonDivergence(RuntimeError):
    """Newton did not meet the stopping criteria within ``l_max``."""

    def __init__(self, msg, step=None, stats=None):
        super().__init__(msg)
        self.step = step
        self.stats = stats
        self.history = [stats] if stats is not None else []


@dataclass
class IterationStats:
    """One Newton iteration: linear solve counts and timings."""

    residual: float
    n: int = 0
    n_A: float = 0.0
    n_S: float = 0.0
    n_I: float = 0.0
    T_A: float = 0.0
    T_L: float = 0.0
    converged: bool = True
    history: list = field(default_factory=list, repr=False)


@dataclass
class SolveStats:
    """Per-step Newton record."""

    step: int
    t: float
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    converged: bool = False

    @property
    def newton_count(self) -> int:
        return len(self.iterations)

    def mean(self, key: str) -> float:
        vals = [getattr(it, key) for it in self.iterations]
        return float(np.mean(vals)) if vals else 0.0


# --- predictor / stages -----------------------------------------------------

def predict(y_n: State, gamma: float) -> State:
    """Same-displacement predictor: values kept, rates scaled by (gamma-1)/gamma."""
    if gamma == 0:
        raise ValueError("gamma must be nonzero")
    c = (gamma - 1.0) / gamma
    return State(y_n.u.copy(), y_n.p.copy(), y_n.v.copy(),
                 c * y_n.du, c * y_n.dp, c * y_n.dv)


def stage_state(y_n: State, y: State, ga: GenAlphaParams) -> State:
    af, am = ga.alpha_f, ga.alpha_m
    vals = [a + af * (b - a) for a, b in zip(y_n.values(), y.values())]
    rates = [a + am * (b - a) for a, b in zip(y_n.rates(), y.rates())]
    return State(*vals, *rates)


def kinematic_residual(stage: State, free_v) -> np.ndarray:
    return (stage.du - stage.v)[free_v]


def newton_step(y_n: State, y: State, system: BlockSystem, R_k: np.ndarray,
                ga: GenAlphaParams, linear_solver: Callable, free_v) -> tuple:
    """One corrector: solve the reduced system, recover the displacement rate,
    update ``y`` in place.

    Returns ``(d_dv, d_dp, d_du, info)`` with increments on free components.
    """
    am, c1 = ga.alpha_m, ga.alpha_f * ga.gamma * ga.dt
    rhs_m = -system.R_m
    rhs_p = -system.R_p
    if np.any(R_k):
        rhs_m = rhs_m + system.Kmu @ R_k / am
        rhs_p = rhs_p + system.Kpu @ R_k / am
    reduced = BlockSystem(system.A, system.B, system.C, system.D, rhs_m, rhs_p,
                          v_dofs=system.v_dofs, near_kernel=system.near_kernel)
    d_dv, d_dp, info = linear_solver(reduced)
    d_du = (c1 * d_dv - R_k) / am

    gdt = ga.gamma * ga.dt
    y.dv[free_v] += d_dv
    y.dp += d_dp
    y.du[free_v] += d_du
    y.v[free_v] += gdt * d_dv
    y.p += gdt * d_dp
    y.u[free_v] += gdt * d_du
    return d_dv, d_dp, d_du, info


def _info_to_stats(res_norm, info, T_A, T_L) -> IterationStats:
    get = (lambda k, d=0: getattr(info, k, d)) if info is not None else (lambda k, d=0: d)
    return IterationStats(residual=res_norm, n=get("n"), n_A=get("n_A"), n_S=get("n_S"),
                          n_I=get("n_I"), T_A=T_A, T_L=T_L, converged=get("converged", True),
                          history=list(get("residuals", []) or []))


def solve_step(problem, y_n: State, t_n: float, ga: GenAlphaParams,
               linear_solver: Callable, config: NonlinearConfig | None = None,
               step: int = 0) -> tuple[State, SolveStats]:
    """Predictor plus multi-corrector for one step ``t_n -> t_n + dt``."""
    config = config or NonlinearConfig()
    free = problem.free_v
    y = predict(y_n, ga.gamma)
    t_stage = t_n + ga.alpha_f * ga.dt
    stats = SolveStats(step=step, t=t_n + ga.dt)
    r0 = None
    cached = None
    for l in range(config.l_max + 1):
        t0 = time.perf_counter()
        if cached is None:
            stage = stage_state(y_n, y, ga)
            R_m, R_p = problem.residuals(stage, t_stage)
            R_k = kinematic_residual(stage, free)
            norm = _norm(R_k, R_p, R_m)
        else:
            stage, R_m, R_p, R_k, norm = cached
            cached = None
        stats.residuals.append(norm)
        if r0 is None:
            r0 = norm
        if norm <= config.tol_A or norm <= config.tol_R * r0:
            stats.converged = True
            break
        if l == config.l_max:
            break
        system = problem.tangent(stage, t_stage, ga.dt, ga.alpha_m, ga.alpha_f,
                                 ga.gamma, with_residuals=False)
        system.R_m, system.R_p = R_m, R_p
        T_A = time.perf_counter() - t0
        t1 = time.perf_counter()
        y_prev = y.copy() if config.max_halvings else None
        *_, info = newton_step(y_n, y, system, R_k, ga, linear_solver, free)
        T_L = time.perf_counter() - t1
        if config.max_halvings:
            cached = _backtrack(problem, y_n, y_prev, y, ga, t_stage, free,
                                config.growth_limit * norm,
                                config.max_halvings)
        stats.iterations.append(_info_to_stats(norm, info, T_A, T_L))
        if info is not None and not getattr(info, "converged", True):
            log.warning("step %d iteration %d: linear solver did not converge", step, l + 1)
    if not stats.converged:
        raise NewtonDivergence(
            f"Newton failed at step {step} (t={stats.t:g}) after {config.l_max} "
            f"iterations; residual history {['%.3e' % r for r in stats.residuals]}",
            step=step, stats=stats)
    return y, stats


def _norm(R_k, R_p, R_m) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.sqrt(R_k @ R_k + R_p @ R_p + R_m @ R_m))


def _backtrack(problem, y_n, y_prev, y, ga, t_stage, free, limit, max_halvings):
    """Shrink ``y - y_prev`` in place until the residual is acceptable.

    Returns the residual data of the accepted iterate.
    """
    delta = [b - a for a, b in zip(y_prev.values() + y_prev.rates(), y.values() + y.rates())]
    s = 1.0
    for k in range(max_halvings + 1):
        try:
            stage = stage_state(y_n, y, ga)
            R_m, R_p = problem.residuals(stage, t_stage)
            R_k = kinematic_residual(stage, free)
            norm = _norm(R_k, R_p, R_m)
            if (np.isfinite(norm) and norm <= limit) or k == max_halvings:
                return stage, R_m, R_p, R_k, norm
        except ElementInversionError:
            if k == max_halvings:
                raise
        s *= 0.5
        for dst, a, d in zip(y.values() + y.rates(), y_prev.values() + y_prev.rates(), delta):
            dst[...] = a + s * d


def advance(problem, initial_state: State, t_span: tuple[float, float], ga: GenAlphaParams,
            linear_solver: Callable, config: NonlinearConfig | None = None,
            callback: Callable | None = None):
    """Step from ``t_span[0]`` to ``t_span[1]`` with fixed ``ga.dt``.

    Returns ``(times, states, stats)``.  ``callback(step, t, state, stats)``
    is invoked after each step.
    """
    t0, t1 = t_span
    n_steps = int(round((t1 - t0) / ga.dt))
    if n_steps < 1 or not np.isclose(t0 + n_steps * ga.dt, t1, rtol=1e-9, atol=1e-14):
        raise ValueError("time span must be a positive multiple of dt")
    y = initial_state.copy()
    times, states, all_stats = [t0], [y.copy()], []
    for k in range(n_steps):
        t = t0 + k * ga.dt
        try:
            y, st = solve_step(problem, y, t, ga, linear_solver, config, step=k + 1)
        except NewtonDivergence as exc:
            exc.history = all_stats + exc.history
            raise
        times.append(t + ga.dt)
        states.append(y.copy())
        all_stats.append(st)
        if callback is not None:
            callback(k + 1, t + ga.dt, y, st)
    return np.array(times), states, all_stats


# --- dense checks of the block reduction -----------------------------------

def factored_tangent(system: BlockSystem, ga: GenAlphaParams):
    """Lower and upper factors of the full three-field tangent.

    Unknown ordering is (d_du, d_dp, d_dv) and equation ordering
    (kinematic, mass, momentum).  ``L @ U`` is the full tangent.
    """
    am, c1 = ga.alpha_m, ga.alpha_f * ga.gamma * ga.dt
    n_v, n_p = system.n_v, system.n_p
    Iv, Ip = sp.identity(n_v), sp.identity(n_p)
    L = sp.bmat([[Iv, None, None],
                 [(1.0 / am) * system.Kpu, Ip, None],
                 [(1.0 / am) * system.Kmu, None, Iv]], format="csr")
    U = sp.bmat([[am * Iv, None, -c1 * Iv],
                 [None, system.D, system.C],
                 [None, system.B, system.A]], format="csr")
    return L, U
