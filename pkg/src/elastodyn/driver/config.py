"""Benchmark configuration and its INI representation."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..krylov import SolverConfig
from ..materials import GOH, KPA, MPA, NEO_HOOKEAN, MaterialParams
from ..precond.block import NestedConfig

BLOCK_COMPRESSION = "block-compression"
TENSILE_TEST = "tensile-test"
BENCHMARKS = (BLOCK_COMPRESSION, TENSILE_TEST)

CIRCUMFERENTIAL_DEG = 49.98
AXIAL_DEG = 40.02


@dataclass
class BenchmarkConfig:
    """Flat parameter set for one run; every field maps to one INI key."""

    benchmark: str = BLOCK_COMPRESSION
    # mesh: cube cells per edge, slab cells per direction
    n: int = 4
    nx: int = 12
    ny: int = 4
    nz: int = 2
    # time stepping
    dt: float = 1e-3
    n_steps: int = 10
    rho_inf: float = 0.5
    t_ramp: float = 1e-2
    # load: traction magnitude (dyn/cm^2) for the cube, total force (dyn) for the slab
    load: float = 320.0 * MPA
    # material
    rho0: float = 1.0
    mu: float = 80.194 * MPA
    kappa: float | None = 400889.806 * MPA
    nu: float | None = None
    eta: float = 1.0
    phi: float = CIRCUMFERENTIAL_DEG
    kd: float = 0.0
    k1: float = 996.6 * KPA
    k2: float = 524.6
    c_m: float = 1e-3
    # linear solver
    solver: str = "nested"
    outer_rtol: float = 1e-8
    outer_atol: float = 1e-50
    outer_restart: int = 50
    outer_maxiter: int = 200
    A_rtol: float = 1e-4
    S_rtol: float = 1e-4
    I_rtol: float = 1e-4
    A_maxiter: int = 100
    S_maxiter: int = 100
    I_maxiter: int = 100
    sub_atol: float = 1e-50
    sub_restart: int = 50
    # nonlinear solver
    tol_R: float = 1e-6
    tol_A: float = 1e-6
    l_max: int = 20
    max_halvings: int = 0
    # output
    output_dir: str | None = None
    vtk_every: int = 0
    tag: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.benchmark not in BENCHMARKS:
            raise ValueError(f"unknown benchmark {self.benchmark!r}; choose from {BENCHMARKS}")
        if self.nu is not None and not 0.0 <= self.nu <= 0.5:
            raise ValueError(f"nu must lie in [0, 0.5], got {self.nu}")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.dt <= 0 or self.n_steps < 0 or self.t_ramp <= 0:
            raise ValueError("dt and t_ramp must be positive, n_steps non-negative")
        for k in ("n", "nx", "ny", "nz"):
            if getattr(self, k) < 1:
                raise ValueError(f"{k} must be >= 1")

    def replace(self, **changes) -> "BenchmarkConfig":
        return dataclasses.replace(self, **changes)

    # -- derived objects ---------------------------------------------------
    @property
    def model(self) -> str:
        return NEO_HOOKEAN if self.benchmark == BLOCK_COMPRESSION else GOH

    def material_params(self) -> MaterialParams:
        if self.benchmark == TENSILE_TEST:
            return MaterialParams.from_fiber_angle(
                self.phi, rho0=self.rho0, mu=self.mu * self.eta, kappa=None,
                k1=self.k1, k2=self.k2, kd=self.kd)
        mu = self.mu * self.eta
        if self.nu is not None:
            return MaterialParams.from_poisson(mu, self.nu, rho0=self.rho0)
        kappa = None if self.kappa is None else self.kappa * self.eta
        return MaterialParams(rho0=self.rho0, mu=mu, kappa=kappa)

    def nested_config(self) -> NestedConfig:
        def sub(rtol, maxiter):
            return SolverConfig(restart=self.sub_restart, maxiter=maxiter, rtol=rtol,
                                atol=self.sub_atol)
        return NestedConfig(
            outer=SolverConfig(restart=self.outer_restart, maxiter=self.outer_maxiter,
                               rtol=self.outer_rtol, atol=self.outer_atol),
            A=sub(self.A_rtol, self.A_maxiter), S=sub(self.S_rtol, self.S_maxiter),
            I=sub(self.I_rtol, self.I_maxiter))


_FIELDS = {f.name: f for f in fields(BenchmarkConfig)}


def parse_value(key: str, text: str):
    """Convert an INI/CLI string to the type of ``BenchmarkConfig.key``."""
    if key not in _FIELDS:
        raise KeyError(f"unknown configuration key {key!r}")
    text = str(text).strip()
    default = _FIELDS[key].default
    if text.lower() in ("none", "") and (default is None or key in ("kappa", "nu", "output_dir")):
        return None
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(float(text))
    if isinstance(default, float) or key in ("kappa", "nu"):
        return float(text)
    return text


def read_ini(path) -> tuple[dict, dict]:
    """Parsed ``[run]`` values and ``[sweep]`` lists of an INI file.

    Sweep values are comma-separated lists.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str
    with open(path) as fh:
        cp.read_file(fh)
    values = {}
    if cp.has_section("run"):
        for k, v in cp.items("run"):
            values[k] = parse_value(k, v)
    sweep = {}
    if cp.has_section("sweep"):
        for k, v in cp.items("sweep"):
            items = [s for s in (x.strip() for x in v.split(",")) if s]
            sweep[k] = [parse_value(k, s) for s in items]
    return values, sweep


def load_config(path) -> tuple[BenchmarkConfig, dict]:
    """``BenchmarkConfig`` from the ``[run]`` section plus the sweep lists."""
    values, sweep = read_ini(path)
    return BenchmarkConfig(**values), sweep


def save_config(config: BenchmarkConfig, path, sweep: dict | None = None) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["run"] = {k: str(getattr(config, k)) for k in _FIELDS}
    if sweep:
        cp["sweep"] = {k: ", ".join(str(x) for x in v) for k, v in sweep.items()}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        cp.write(fh)
