"""Indexed triangle meshes and the diagnostics the rest of the package relies on.

A mesh is accepted as printable when every edge is shared by exactly two
triangles with opposite winding (closed, consistently oriented 2-manifold)
and the face-adjacency graph has a single connected component.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class GeometryError(ValueError):
    """A solid that cannot be built or exported as requested."""


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Vertices (mm) and index triples. Coordinates are float32-exact so a
    binary STL round trip reproduces them bit for bit."""

    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        if len(t) and (t.min() < 0 or t.max() >= len(v)):
            raise GeometryError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    # ── basic measures ──

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def corners(self) -> np.ndarray:
        """(m, 3, 3) corner coordinates."""
        return self.vertices[self.triangles]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if not len(self.vertices):
            z = np.zeros(3)
            return z, z
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def extents(self) -> np.ndarray:
        lo, hi = self.bounds()
        return hi - lo

    def volume(self) -> float:
        """Signed enclosed volume, mm^3 (positive for outward orientation)."""
        if not len(self.triangles):
            return 0.0
        a, b, c = np.moveaxis(self.corners(), 1, 0)
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def area(self) -> float:
        if not len(self.triangles):
            return 0.0
        a, b, c = np.moveaxis(self.corners(), 1, 0)
        return float(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())

    # ── topology ──

    def _directed_edges(self) -> np.ndarray:
        t = self.triangles
        return np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])

    def is_watertight(self) -> bool:
        """Every undirected edge appears exactly twice, once per direction."""
        if not len(self.triangles):
            return True
        e = self._directed_edges()
        if np.any(e[:, 0] == e[:, 1]):
            return False  # collapsed triangle
        # opposite-direction pairing: each directed edge must occur once and
        # its reverse must also occur once
        order = np.lexsort((e[:, 1], e[:, 0]))
        es = e[order]
        if np.any(np.all(es[1:] == es[:-1], axis=1)):
            return False  # same directed edge twice = inconsistent winding
        rev = e[:, ::-1]
        undirected = np.sort(e, axis=1)
        order = np.lexsort((undirected[:, 1], undirected[:, 0]))
        u = undirected[order]
        counts_ok = len(u) % 2 == 0 and np.all(u[0::2] == u[1::2])
        if not counts_ok:
            return False
        # the two members of each pair are one forward and one reverse edge
        d = e[order]
        return bool(np.all(d[0::2] == d[1::2, ::-1]))

    def component_count(self) -> int:
        """Connected components of the face graph (faces joined by shared edges)."""
        m = len(self.triangles)
        if m == 0:
            return 0
        e = np.sort(self._directed_edges(), axis=1)
        face = np.tile(np.arange(m), 3)
        order = np.lexsort((e[:, 1], e[:, 0]))
        es, fs = e[order], face[order]
        same = np.all(es[1:] == es[:-1], axis=1)
        i, j = fs[:-1][same], fs[1:][same]
        g = coo_matrix((np.ones(len(i)), (i, j)), shape=(m, m))
        n, _ = connected_components(g, directed=False)
        return int(n)

    def degenerate_count(self, tol: float = 1e-12) -> int:
        if not len(self.triangles):
            return 0
        a, b, c = np.moveaxis(self.corners(), 1, 0)
        areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
        return int(np.count_nonzero(areas <= tol))


def weld(vertices: np.ndarray, triangles: np.ndarray) -> TriMesh:
    """Merge exactly identical vertices and drop index-collapsed triangles."""
    v = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64).reshape(-1, 3))
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if not len(v):
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    uniq, inverse = np.unique(v.view([("", v.dtype)] * 3), return_inverse=True)
    v_out = uniq.view(v.dtype).reshape(-1, 3)
    t_out = inverse.reshape(-1)[t]
    keep = (
        (t_out[:, 0] != t_out[:, 1])
        & (t_out[:, 1] != t_out[:, 2])
        & (t_out[:, 2] != t_out[:, 0])
    )
    return TriMesh(v_out, t_out[keep])


def require_printable(mesh: TriMesh, what: str = "mesh") -> None:
    """Raise unless the mesh is watertight and a single component."""
    if not mesh.is_watertight():
        raise GeometryError(f"{what} is not watertight")
    if mesh.component_count() != 1:
        raise GeometryError(f"{what} has {mesh.component_count()} components, expected 1")
