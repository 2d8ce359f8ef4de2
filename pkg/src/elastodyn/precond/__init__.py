from .amg import AMGHierarchy, AMGOptions, amg_build, amg_vcycle
from .block import (LevelCounter, NestedConfig, NestedPrecond, SCRSolver, SchurOperator,
                    SimplePrecond, ZeroDiagonalError, build_shat, schur_apply, scr_solve,
                    velocity_amg)
from .ilu import ILU0, Jacobi, ZeroPivotError, ilu0_apply, ilu0_build
from .solvers import (DirectSolver, ILUSolver, LinearStats, NestedSolver, SimpleSolver,
                      make_solver)

__all__ = [
    "AMGHierarchy", "AMGOptions", "amg_build", "amg_vcycle",
    "LevelCounter", "NestedConfig", "NestedPrecond", "SCRSolver", "SchurOperator",
    "SimplePrecond", "ZeroDiagonalError", "build_shat", "schur_apply", "scr_solve",
    "velocity_amg", "ILU0", "Jacobi", "ZeroPivotError", "ilu0_apply", "ilu0_build",
    "DirectSolver", "ILUSolver", "LinearStats", "NestedSolver", "SimpleSolver", "make_solver",
]
