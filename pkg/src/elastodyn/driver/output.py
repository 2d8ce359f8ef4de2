"""CSV statistics and legacy-VTK field output."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

VTK_TETRA = 10

STEP_COLUMNS = ["step", "t", "newton", "iteration", "residual", "n", "n_A", "n_S", "n_I",
                "T_A", "T_L", "linear_converged"]
LOAD_COLUMNS = ["step", "t", "load", "displacement"]
SWEEP_STAT_COLUMNS = ["status", "steps", "newton", "n", "n_A", "n_S", "n_I", "T_A", "T_L",
                      "wall"]


def step_rows(stats) -> list[dict]:
    """One row per Newton iteration, with the step's Newton count repeated."""
    rows = []
    for st in stats:
        for k, it in enumerate(st.iterations, start=1):
            rows.append({"step": st.step, "t": st.t, "newton": st.newton_count, "iteration": k,
                         "residual": it.residual, "n": it.n, "n_A": it.n_A, "n_S": it.n_S,
                         "n_I": it.n_I, "T_A": it.T_A, "T_L": it.T_L,
                         "linear_converged": int(it.converged)})
    return rows


def write_csv(path, rows: list[dict], columns: list[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row.get(k, "")) for k in columns})
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_vtk(path, mesh, point_data: dict | None = None, cell_data: dict | None = None,
              title: str = "elastodyn") -> Path:
    """ASCII legacy VTK unstructured grid of linear tetrahedra.

    Arrays with 3 components per entry are written as VECTORS, others as
    SCALARS.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nodes, tets = mesh.nodes, mesh.tets
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(nodes)} double"]
    lines += [" ".join(f"{x:.16g}" for x in p) for p in nodes]
    lines.append(f"CELLS {len(tets)} {5 * len(tets)}")
    lines += ["4 " + " ".join(str(int(i)) for i in t) for t in tets]
    lines.append(f"CELL_TYPES {len(tets)}")
    lines += [str(VTK_TETRA)] * len(tets)

    def block(data: dict, n: int):
        out = []
        for name, arr in data.items():
            a = np.asarray(arr, dtype=float).reshape(n, -1)
            if a.shape[1] == 3:
                out.append(f"VECTORS {name} double")
            else:
                out.append(f"SCALARS {name} double {a.shape[1]}")
                out.append("LOOKUP_TABLE default")
            out += [" ".join(f"{x:.16g}" for x in row) for row in a]
        return out

    if point_data:
        lines.append(f"POINT_DATA {len(nodes)}")
        lines += block(point_data, len(nodes))
    if cell_data:
        lines.append(f"CELL_DATA {len(tets)}")
        lines += block(cell_data, len(tets))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_points_cells(path):
    """Minimal reader for files produced by :func:`write_vtk` (tests, tooling)."""
    tokens = Path(path).read_text().split("\n")
    i = 0
    points = cells = None
    while i < len(tokens):
        line = tokens[i].split()
        if line and line[0] == "POINTS":
            n = int(line[1])
            points = np.array([list(map(float, tokens[i + 1 + k].split())) for k in range(n)])
            i += n
        elif line and line[0] == "CELLS":
            n = int(line[1])
            cells = np.array([list(map(int, tokens[i + 1 + k].split()))[1:] for k in range(n)])
            i += n
        i += 1
    return points, cells
