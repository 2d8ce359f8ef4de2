"""Block-compression and tensile benchmarks, parameter sweeps and linear benches."""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..assembly import Assembler, LinearRamp, Loads, State
from ..materials import ElementInversionError, Material
from ..mesh import BoundaryTag, generate_cube_mesh, generate_slab_mesh
from ..precond.solvers import SOLVERS, make_solver
from ..timeint import (NewtonDivergence, NonlinearConfig, advance, gen_alpha_params,
                       kinematic_residual, predict, stage_state)
from .config import BLOCK_COMPRESSION, TENSILE_TEST, BenchmarkConfig
from .output import (LOAD_COLUMNS, STEP_COLUMNS, SWEEP_STAT_COLUMNS, step_rows, write_csv,
                     write_vtk)

log = logging.getLogger(__name__)

CUBE_SUPPORTS = {
    BoundaryTag.SYMMETRY_X: [0],
    BoundaryTag.SYMMETRY_Y: [1],
    BoundaryTag.BOTTOM: [2],
    BoundaryTag.TOP: [0, 1],
    BoundaryTag.TOP_LOADED: [0, 1],
}
SLAB_SUPPORTS = {
    BoundaryTag.SYMMETRY_X: [0],
    BoundaryTag.SYMMETRY_Y: [1],
    BoundaryTag.SYMMETRY_Z: [2],
    BoundaryTag.LOADED_END: [1, 2],  # the loaded face moves only along the load
}


@dataclass
class RunResult:
    config: BenchmarkConfig
    mesh: object
    times: np.ndarray
    states: list
    stats: list
    status: str = "ok"
    message: str = ""
    wall: float = 0.0
    load_curve: list = field(default_factory=list)
    files: list = field(default_factory=list)
    asm: Assembler | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def final_state(self) -> State:
        return self.states[-1]

    def summary(self) -> dict:
        return summarize(self.stats, self.status, self.wall)


def build_problem(config: BenchmarkConfig) -> Assembler:
    material = Material(config.material_params(), config.model)
    ramp = LinearRamp(config.t_ramp)
    if config.benchmark == BLOCK_COMPRESSION:
        mesh = generate_cube_mesh(config.n)
        loads = Loads(tractions={BoundaryTag.TOP_LOADED: np.array([0.0, 0.0, -config.load])},
                      ramp=ramp, dirichlet=dict(CUBE_SUPPORTS))
    elif config.benchmark == TENSILE_TEST:
        mesh = generate_slab_mesh(config.nx, config.ny, config.nz)
        ly, lz = mesh.nodes[:, 1].max(), mesh.nodes[:, 2].max()
        # the quarter cross-section carries a quarter of the total force
        traction = config.load / 4.0 / (ly * lz)
        loads = Loads(tractions={BoundaryTag.LOADED_END: np.array([traction, 0.0, 0.0])},
                      ramp=ramp, dirichlet=dict(SLAB_SUPPORTS))
    else:
        raise ValueError(f"unknown benchmark {config.benchmark!r}")
    return Assembler(mesh, material, loads, c_m=config.c_m)


def make_linear_solver(config: BenchmarkConfig):
    return make_solver(config.solver, config.nested_config())


def fiber_alignment(asm: Assembler, u: np.ndarray) -> np.ndarray:
    """Per element cosine between the two deformed fibre directions."""
    p = asm.material.params
    ue = u.reshape(-1, 3)[asm.mesh.tets]
    F = np.eye(3) + np.einsum("eAi,eAI->eiI", ue, asm.grad)
    a1, a2 = np.asarray(p.a1), np.asarray(p.a2)
    f1, f2 = F @ a1, F @ a2
    return np.einsum("ei,ei->e", f1, f2) / (np.linalg.norm(f1, axis=1) * np.linalg.norm(f2, axis=1))


def jacobians(asm: Assembler, u: np.ndarray) -> np.ndarray:
    ue = u.reshape(-1, 3)[asm.mesh.tets]
    F = np.eye(3) + np.einsum("eAi,eAI->eiI", ue, asm.grad)
    return np.linalg.det(F)


def end_displacement(asm: Assembler, u: np.ndarray) -> float:
    nodes = asm.mesh.nodes_on(BoundaryTag.LOADED_END)
    return float(u.reshape(-1, 3)[nodes, 0].mean())


def _snapshot(asm, state, path):
    cell = {"J": jacobians(asm, state.u)}
    if asm.material.model != "neo-hookean":
        cell["fiber_alignment"] = fiber_alignment(asm, state.u)
    return write_vtk(path, asm.mesh,
                     point_data={"displacement": state.u, "velocity": state.v,
                                 "pressure": state.p},
                     cell_data=cell)


def run_benchmark(config: BenchmarkConfig, linear_solver=None) -> RunResult:
    """Time-step one benchmark; failures are reported, not raised."""
    t0 = time.perf_counter()
    asm = build_problem(config)
    solver = linear_solver if linear_solver is not None else make_linear_solver(config)
    ga = gen_alpha_params(config.rho_inf, config.dt)
    nl = NonlinearConfig(config.tol_R, config.tol_A, config.l_max, config.max_halvings)
    out = Path(config.output_dir) if config.output_dir else None
    prefix = config.tag or config.benchmark
    files = []
    curve = []

    def callback(step, t, y, st):
        if config.benchmark == TENSILE_TEST:
            curve.append({"step": step, "t": t, "load": config.load * asm.loads.ramp(t),
                          "displacement": end_displacement(asm, y.u)})
        if out is not None and config.vtk_every and step % config.vtk_every == 0:
            files.append(_snapshot(asm, y, out / f"{prefix}_{step:04d}.vtk"))

    status, message = "ok", ""
    times, states, stats = np.array([0.0]), [asm.zero_state()], []
    if config.n_steps > 0:
        try:
            times, states, stats = advance(asm, asm.zero_state(), (0.0, config.n_steps * config.dt),
                                           ga, solver, nl, callback)
        except NewtonDivergence as exc:
            status, message = "NC", str(exc)
            stats = exc.history
        except (ElementInversionError, FloatingPointError, np.linalg.LinAlgError) as exc:
            status, message = "NC", f"{type(exc).__name__}: {exc}"
    if status != "ok":
        log.warning("%s: %s", prefix, message)
    res = RunResult(config=config, mesh=asm.mesh, times=times, states=states, stats=stats,
                    status=status, message=message, load_curve=curve, asm=asm)
    res.wall = time.perf_counter() - t0
    if out is not None:
        files.append(write_csv(out / f"{prefix}_stats.csv", step_rows(stats), STEP_COLUMNS))
        if curve:
            files.append(write_csv(out / f"{prefix}_load_displacement.csv", curve, LOAD_COLUMNS))
        if status == "ok" and config.vtk_every:
            files.append(_snapshot(asm, res.final_state, out / f"{prefix}_final.vtk"))
    res.files = files
    return res


def run_block_compression(config: BenchmarkConfig | None = None, **overrides) -> RunResult:
    config = (config or BenchmarkConfig()).replace(benchmark=BLOCK_COMPRESSION, **overrides)
    return run_benchmark(config)


def run_tensile_test(config: BenchmarkConfig | None = None, **overrides) -> RunResult:
    base = config or tensile_defaults()
    return run_benchmark(base.replace(benchmark=TENSILE_TEST, **overrides))


def tensile_defaults(**overrides) -> BenchmarkConfig:
    """Desk-scale tensile test: 2 N reached at t = 100 s in 200 steps."""
    kw = dict(benchmark=TENSILE_TEST, mu=7.64e4, kappa=None, dt=0.5, n_steps=200, max_halvings=8,
              t_ramp=100.0, load=2.0e5)
    kw.update(overrides)
    return BenchmarkConfig(**kw)


def summarize(stats, status: str = "ok", wall: float = 0.0) -> dict:
    """Averages over all Newton iterations of all steps."""
    its = [it for st in stats for it in st.iterations]

    def mean(key):
        return float(np.mean([getattr(it, key) for it in its])) if its else 0.0

    return {"status": status, "steps": len(stats),
            "newton": float(np.mean([st.newton_count for st in stats])) if stats else 0.0,
            "n": mean("n"), "n_A": mean("n_A"), "n_S": mean("n_S"), "n_I": mean("n_I"),
            "T_A": float(sum(it.T_A for it in its)), "T_L": float(sum(it.T_L for it in its)),
            "wall": wall}


def run_sweep(base: BenchmarkConfig, sweep: dict, output: str | Path | None = None) -> list[dict]:
    """Cartesian product over ``sweep`` (key -> list of values), one row per cell.

    Failed cells are recorded with status ``NC``.
    """
    keys = list(sweep)
    rows = []
    if keys and all(len(sweep[k]) for k in keys):
        for values in itertools.product(*(sweep[k] for k in keys)):
            cell = dict(zip(keys, values))
            try:
                cfg = base.replace(output_dir=None, **cell)
                res = run_benchmark(cfg)
                summary = res.summary()
            except (ValueError, ArithmeticError) as exc:
                summary = summarize([], "NC", 0.0)
                log.warning("sweep cell %s failed: %s", cell, exc)
            rows.append({**cell, **summary})
    if output is not None:
        write_csv(output, rows, keys + SWEEP_STAT_COLUMNS)
    return rows


# --- single linear systems ------------------------------------------------------

def first_newton_system(config: BenchmarkConfig, step: int = 1, state: State | None = None):
    """The reduced block system of the first Newton iteration of ``step``.

    ``state`` is the converged state at the beginning of the step (zero by
    default).
    """
    asm = build_problem(config)
    ga = gen_alpha_params(config.rho_inf, config.dt)
    y_n = state if state is not None else asm.zero_state()
    y = predict(y_n, ga.gamma)
    stage = stage_state(y_n, y, ga)
    t = (step - 1 + ga.alpha_f) * config.dt
    sys = asm.tangent(stage, t, ga.dt, ga.alpha_m, ga.alpha_f, ga.gamma)
    R_k = kinematic_residual(stage, asm.free_v)
    sys.R_m = -(sys.R_m - sys.Kmu @ R_k / ga.alpha_m)
    sys.R_p = -(sys.R_p - sys.Kpu @ R_k / ga.alpha_m)
    return sys, asm


LINEAR_BENCH_COLUMNS = ["solver", "n", "n_A", "n_S", "n_I", "converged", "time",
                        "rel_residual", "error"]


def linear_bench(config: BenchmarkConfig, solvers=SOLVERS, system=None,
                 output: str | Path | None = None, matrix_market: str | Path | None = None):
    """Solve one assembled Newton system with each solver in ``solvers``."""
    if system is None:
        system, _ = first_newton_system(config)
    if matrix_market is not None:
        from ..krylov import write_matrix_market
        d = Path(matrix_market)
        d.mkdir(parents=True, exist_ok=True)
        for name in "ABCD":
            write_matrix_market(d / f"{name}.mtx", getattr(system, name))
    K = system.full_matrix()
    rhs = np.concatenate([system.R_m, system.R_p])
    rows = []
    for name in solvers:
        cfg = config.replace(solver=name)
        solver = make_linear_solver(cfg)
        dv, dp, st = solver(system)
        x = np.concatenate([dv, dp])
        rel = float(np.linalg.norm(K @ x - rhs) / max(np.linalg.norm(rhs), 1e-300))
        rows.append({"solver": name, "n": st.n, "n_A": st.n_A, "n_S": st.n_S, "n_I": st.n_I,
                     "converged": int(st.converged), "time": st.time, "rel_residual": rel,
                     "error": st.error})
    if output is not None:
        write_csv(output, rows, LINEAR_BENCH_COLUMNS)
    return rows
