"""Structured linear-tetrahedral meshes for the cube and slab benchmarks."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class BoundaryTag(str, enum.Enum):
    BOTTOM = "bottom"
    TOP = "top"
    TOP_LOADED = "top-loaded-quarter"
    SYMMETRY_X = "symmetry-x"
    SYMMETRY_Y = "symmetry-y"
    SYMMETRY_Z = "symmetry-z"
    LOADED_END = "loaded-end"
    FREE = "free"


# Kuhn subdivision of the unit cell: each tet walks from corner (0,0,0) to
# (1,1,1) along one permutation of the axes.  Translation invariant, hence
# conforming across neighbouring cells.
_KUHN_PATHS = ((0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0))

# Local faces opposite to vertex 0..3, ordered so that the normal points
# outward for a positively oriented tet.
_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])


@dataclass(frozen=True)
class Mesh:
    """Linear tetrahedral mesh (lengths in cm).

    ``boundary_facets`` holds outward-oriented node triples and
    ``facet_tags`` the matching :class:`BoundaryTag` per facet.
    """

    nodes: np.ndarray
    tets: np.ndarray
    boundary_facets: np.ndarray
    facet_tags: np.ndarray
    element_diameters: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.tets.shape[0]

    def signed_volumes(self) -> np.ndarray:
        return tet_volumes(self.nodes, self.tets)

    def facets_with(self, tag: BoundaryTag | str) -> np.ndarray:
        return self.boundary_facets[self.facet_tags == BoundaryTag(tag).value]

    def nodes_on(self, tag: BoundaryTag | str) -> np.ndarray:
        return np.unique(self.facets_with(tag))

    def facet_areas(self, facets: np.ndarray | None = None) -> np.ndarray:
        facets = self.boundary_facets if facets is None else facets
        x = self.nodes[facets]
        return 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1)


def tet_volumes(nodes: np.ndarray, tets: np.ndarray) -> np.ndarray:
    x = nodes[tets]
    e = x[:, 1:] - x[:, :1]
    return np.linalg.det(e) / 6.0


def longest_edges(nodes: np.ndarray, tets: np.ndarray) -> np.ndarray:
    x = nodes[tets]
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    lengths = np.stack([np.linalg.norm(x[:, a] - x[:, b], axis=1) for a, b in pairs], axis=1)
    return lengths.max(axis=1)


def _structured_box(nx: int, ny: int, nz: int, lx: float, ly: float, lz: float):
    for name, n in (("nx", nx), ("ny", ny), ("nz", nz)):
        if int(n) != n or n < 1:
            raise ValueError(f"{name} must be a positive integer, got {n}")
    for name, length in (("lx", lx), ("ly", ly), ("lz", lz)):
        if not length > 0:
            raise ValueError(f"{name} must be positive, got {length}")

    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    zs = np.linspace(0.0, lz, nz + 1)
    # node id = i + (nx+1)*(j + (ny+1)*k)
    zz, yy, xx = np.meshgrid(zs, ys, xs, indexing="ij")
    nodes = np.column_stack([xx.ravel(), yy.ravel(), zz.ravel()])

    def nid(i, j, k):
        return i + (nx + 1) * (j + (ny + 1) * k)

    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    tets = []
    for path in _KUHN_PATHS:
        corner = np.zeros((3, i.size), dtype=np.int64)
        verts = [nid(i, j, k)]
        for axis in path:
            corner[axis] += 1
            verts.append(nid(i + corner[0], j + corner[1], k + corner[2]))
        tets.append(np.stack(verts, axis=1))
    # interleave so that the 6 tets of one cell are contiguous
    tets = np.stack(tets, axis=1).reshape(-1, 4)

    vol = tet_volumes(nodes, tets)
    flip = vol < 0
    tets[flip] = tets[flip][:, [0, 2, 1, 3]]
    return nodes, tets


def _boundary_facets(tets: np.ndarray) -> np.ndarray:
    faces = tets[:, _FACES].reshape(-1, 3)
    key = np.sort(faces, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    return faces[counts[inverse] == 1]


def _tag_facets(nodes, facets, rules):
    """Tag each facet by the first matching (tag, predicate) rule on its centroid."""
    centroids = nodes[facets].mean(axis=1)
    tags = np.full(len(facets), "", dtype=object)
    for tag, predicate in rules:
        mask = (tags == "") & predicate(centroids)
        tags[mask] = tag.value
    if np.any(tags == ""):
        raise RuntimeError("untagged boundary facets remain")
    return tags.astype(str)


def generate_cube_mesh(n: int, edge_length: float = 0.1) -> Mesh:
    """Cube [0, L]^3 split into n^3 cells of 6 tets each.

    Faces are tagged for the block-compression setup: the quarter
    ``x, y < L/2`` of the top face carries the load, ``x = 0`` and ``y = 0``
    are symmetry planes, ``z = 0`` is the support and ``x = L``, ``y = L``
    are traction free.
    """
    L = float(edge_length)
    nodes, tets = _structured_box(n, n, n, L, L, L)
    facets = _boundary_facets(tets)
    tol = 1e-9 * L
    rules = [
        (BoundaryTag.BOTTOM, lambda c: c[:, 2] < tol),
        (BoundaryTag.TOP_LOADED,
         lambda c: (c[:, 2] > L - tol) & (c[:, 0] < 0.5 * L) & (c[:, 1] < 0.5 * L)),
        (BoundaryTag.TOP, lambda c: c[:, 2] > L - tol),
        (BoundaryTag.SYMMETRY_X, lambda c: c[:, 0] < tol),
        (BoundaryTag.SYMMETRY_Y, lambda c: c[:, 1] < tol),
        (BoundaryTag.FREE, lambda c: np.ones(len(c), dtype=bool)),
    ]
    tags = _tag_facets(nodes, facets, rules)
    return Mesh(nodes, tets, facets, tags, longest_edges(nodes, tets))


def generate_slab_mesh(nx: int, ny: int, nz: int,
                       lx: float = 0.5, ly: float = 0.15, lz: float = 0.025) -> Mesh:
    """One-eighth tensile specimen [0, lx] x [0, ly] x [0, lz].

    ``x = 0``, ``y = 0``, ``z = 0`` are symmetry planes and ``x = lx`` is the
    loaded end; the outer faces are free.
    """
    nodes, tets = _structured_box(nx, ny, nz, lx, ly, lz)
    facets = _boundary_facets(tets)
    tol = 1e-9 * min(lx, ly, lz)
    rules = [
        (BoundaryTag.LOADED_END, lambda c: c[:, 0] > lx - tol),
        (BoundaryTag.SYMMETRY_X, lambda c: c[:, 0] < tol),
        (BoundaryTag.SYMMETRY_Y, lambda c: c[:, 1] < tol),
        (BoundaryTag.SYMMETRY_Z, lambda c: c[:, 2] < tol),
        (BoundaryTag.FREE, lambda c: np.ones(len(c), dtype=bool)),
    ]
    tags = _tag_facets(nodes, facets, rules)
    return Mesh(nodes, tets, facets, tags, longest_edges(nodes, tets))


def single_tet_mesh(scale: float = 1.0) -> Mesh:
    """One reference-like tet, slightly skewed so that no gradient is trivial."""
    nodes = scale * np.array([[0.0, 0.0, 0.0],
                              [1.0, 0.1, 0.0],
                              [0.2, 0.9, 0.1],
                              [0.1, 0.2, 1.1]])
    tets = np.array([[0, 1, 2, 3]])
    facets = tets[:, _FACES].reshape(-1, 3)
    tags = np.array([BoundaryTag.FREE.value] * 4)
    return Mesh(nodes, tets, facets, tags, longest_edges(nodes, tets))
