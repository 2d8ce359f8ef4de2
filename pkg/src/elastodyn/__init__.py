"""Hyper-elastodynamics with a mixed stabilized formulation and nested block solvers."""

from .assembly import Assembler, BlockSystem, LinearRamp, Loads, State
from .materials import GOH, KPA, MPA, NEO_HOOKEAN, Material, MaterialParams
from .mesh import BoundaryTag, Mesh, generate_cube_mesh, generate_slab_mesh, single_tet_mesh
from .timeint import NonlinearConfig, advance, gen_alpha_params

__version__ = "0.1.0"
