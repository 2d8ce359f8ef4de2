from .benchmarks import (CUBE_SUPPORTS, LINEAR_BENCH_COLUMNS, SLAB_SUPPORTS, RunResult,
                         build_problem, end_displacement, fiber_alignment, first_newton_system,
                         jacobians, linear_bench, run_benchmark, run_block_compression, run_sweep,
                         run_tensile_test, summarize, tensile_defaults)
from .config import (AXIAL_DEG, BENCHMARKS, BLOCK_COMPRESSION, CIRCUMFERENTIAL_DEG, TENSILE_TEST,
                     BenchmarkConfig, load_config, parse_value, read_ini, save_config)
from .output import read_csv, read_vtk_points_cells, write_csv, write_vtk
