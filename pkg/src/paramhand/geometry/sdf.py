"""Signed-distance scaffolding for the primitive-composition solids.

Solids are assembled from 2D profiles (discs, convex polygons) extruded
along an axis and combined by minimum, with polynomial blends along chosen
seams. Sampling is paint-by-rectangle: the grid starts out "far outside"
and every leaf writes its values only inside its own padded bounding box,
so the cost scales with the material volume rather than the grid volume.
Fields are exact near their zero set — which is all the mesher consumes —
and merely sign-correct elsewhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from skimage import measure

from .mesh import GeometryError, TriMesh, weld

# grid nodes are offset off the lattice so primitive faces at round
# coordinates never coincide with a sample point (zero field values make
# marching cubes emit degenerate triangles)
_GRID_NUDGE = 0.493
_MIN_ABS = 1e-9
_CHUNK = 4_000_000  # max points materialized per paint call


# ─────────────────────────────── 2D profiles ───────────────────────────────


class Disc:
    def __init__(self, center: Sequence[float], radius: float):
        self.c = np.asarray(center, dtype=float)
        self.r = float(radius)

    def bounds(self):
        return self.c - self.r, self.c + self.r

    def values(self, uv: np.ndarray) -> np.ndarray:
        return np.hypot(uv[:, 0] - self.c[0], uv[:, 1] - self.c[1]) - self.r


class ConvexPoly:
    """Intersection of edge half-planes; the zero set is the exact polygon."""

    def __init__(self, corners: Sequence[Sequence[float]]):
        p = np.asarray(corners, dtype=float)
        if len(p) < 3:
            raise GeometryError("polygon needs at least three corners")
        a, b = p[1:-1] - p[0], p[2:] - p[0]
        area2 = (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]).sum()
        if area2 < 0.0:
            p = p[::-1]  # normalize to counter-clockwise
        edges = np.roll(p, -1, axis=0) - p
        n = np.stack([edges[:, 1], -edges[:, 0]], axis=1)  # outward normals
        lengths = np.linalg.norm(n, axis=1)
        if np.any(lengths <= 0.0):
            raise GeometryError("degenerate polygon edge")
        self.p = p
        self.n = n / lengths[:, None]
        self.offset = np.einsum("ij,ij->i", self.n, p)

    def bounds(self):
        return self.p.min(axis=0), self.p.max(axis=0)

    def values(self, uv: np.ndarray) -> np.ndarray:
        return (uv @ self.n.T - self.offset).max(axis=1)


class Profile:
    """Union of 2D pieces."""

    def __init__(self, *pieces):
        self.pieces = pieces

    def bounds(self):
        los, his = zip(*(p.bounds() for p in self.pieces))
        return np.min(los, axis=0), np.max(his, axis=0)

    def values(self, uv: np.ndarray) -> np.ndarray:
        return np.minimum.reduce([p.values(uv) for p in self.pieces])


# ─────────────────────────────── sample grid ───────────────────────────────


@dataclass(frozen=True)
class Grid:
    origin: np.ndarray  # world position of node (0, 0, 0)
    pitch: float
    shape: tuple[int, int, int]
    margin: float  # how far past a leaf box to keep exact values

    def window(self, lo: np.ndarray, hi: np.ndarray) -> tuple[slice, slice, slice] | None:
        i0 = np.floor((lo - self.margin - self.origin) / self.pitch).astype(int)
        i1 = np.ceil((hi + self.margin - self.origin) / self.pitch).astype(int) + 1
        i0 = np.maximum(i0, 0)
        i1 = np.minimum(i1, self.shape)
        if np.any(i1 <= i0):
            return None
        return tuple(slice(a, b) for a, b in zip(i0, i1))

    def points(self, win: tuple[slice, slice, slice]) -> np.ndarray:
        axes = [
            self.origin[k] + self.pitch * np.arange(win[k].start, win[k].stop)
            for k in range(3)
        ]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return pts.reshape(-1, 3)


# ─────────────────────────────── 3D fields ───────────────────────────────


class Field:
    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def values(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def paint(self, F: np.ndarray, grid: Grid) -> None:
        """Write min(F, field) over this field's padded box, in x-slabs."""
        win = grid.window(*self.aabb())
        if win is None:
            return
        nyz = (win[1].stop - win[1].start) * (win[2].stop - win[2].start)
        step = max(1, _CHUNK // max(nyz, 1))
        for x0 in range(win[0].start, win[0].stop, step):
            sub = (slice(x0, min(x0 + step, win[0].stop)), win[1], win[2])
            view = F[sub]
            vals = self.values(grid.points(sub)).reshape(view.shape)
            np.minimum(view, vals, out=view)


_PLANE_AXES = {"xy": (0, 1, 2), "yx": (1, 0, 2), "yz": (1, 2, 0), "zy": (2, 1, 0)}


class Extruded(Field):
    """2D profile in a coordinate plane, extruded along the remaining axis."""

    def __init__(self, profile, lo: float, hi: float, plane: str = "xy"):
        if hi <= lo:
            raise GeometryError("empty extrusion range")
        self.profile = profile
        self.u, self.v, self.w = _PLANE_AXES[plane]
        self.lo, self.hi = float(lo), float(hi)

    def aabb(self):
        plo, phi = self.profile.bounds()
        lo, hi = np.empty(3), np.empty(3)
        lo[self.u], lo[self.v], lo[self.w] = plo[0], plo[1], self.lo
        hi[self.u], hi[self.v], hi[self.w] = phi[0], phi[1], self.hi
        return lo, hi

    def values(self, pts: np.ndarray) -> np.ndarray:
        d2 = self.profile.values(pts[:, (self.u, self.v)])
        c = 0.5 * (self.lo + self.hi)
        dw = np.abs(pts[:, self.w] - c) - 0.5 * (self.hi - self.lo)
        inside = np.minimum(np.maximum(d2, dw), 0.0)
        return inside + np.hypot(np.maximum(d2, 0.0), np.maximum(dw, 0.0))


class Placed(Field):
    """Rigidly transformed field (rotation R, translation t)."""

    def __init__(self, R: np.ndarray, t: np.ndarray, field: Field):
        self.R = np.asarray(R, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.field = field

    def aabb(self):
        lo, hi = self.field.aabb()
        corners = np.array(
            [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
        )
        world = corners @ self.R.T + self.t
        return world.min(axis=0), world.max(axis=0)

    def values(self, pts: np.ndarray) -> np.ndarray:
        return self.field.values((pts - self.t) @ self.R)


def _box_distance(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    d = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
    return np.linalg.norm(d, axis=1)


class Union(Field):
    """Minimum over parts. Painting recurses so each leaf only touches its
    own box; direct evaluation prunes with per-part boxes and falls back to
    a positive box distance far from everything."""

    def __init__(self, parts: Sequence[Field], margin: float = 1.0):
        if not parts:
            raise GeometryError("empty union")
        self.parts = list(parts)
        self.margin = float(margin)
        self.boxes = [p.aabb() for p in self.parts]

    def aabb(self):
        los, his = zip(*self.boxes)
        return np.min(los, axis=0), np.max(his, axis=0)

    def paint(self, F: np.ndarray, grid: Grid) -> None:
        for part in self.parts:
            part.paint(F, grid)

    def values(self, pts: np.ndarray) -> np.ndarray:
        out = np.full(len(pts), np.inf)
        covered = np.zeros(len(pts), dtype=bool)
        for part, (lo, hi) in zip(self.parts, self.boxes):
            m = np.all((pts >= lo - self.margin) & (pts <= hi + self.margin), axis=1)
            if m.any():
                out[m] = np.minimum(out[m], part.values(pts[m]))
                covered |= m
        far = ~covered
        if far.any():
            out[far] = np.minimum.reduce(
                [_box_distance(pts[far], lo, hi) for lo, hi in self.boxes]
            )
        return out


def _smin(a: np.ndarray, b: np.ndarray, k: float) -> np.ndarray:
    h = np.clip(0.5 + 0.5 * (b - a) / k, 0.0, 1.0)
    return b * (1.0 - h) + a * h - k * h * (1.0 - h)


class Scene(Field):
    """A union of solids plus seam parts blended in with a fillet.

    Each seam part (a ligament strap) is combined as smin(solids, part), so
    the junction where it meets bone gains a fillet of radius ~k while the
    rest of the model is a plain union.
    """

    def __init__(self, solids: Union, seams: Sequence[Field] = (), k: float = 0.4):
        self.solids = solids
        self.seams = list(seams)
        self.k = float(k)

    def aabb(self):
        lo, hi = self.solids.aabb()
        for s in self.seams:
            slo, shi = s.aabb()
            lo, hi = np.minimum(lo, slo), np.maximum(hi, shi)
        return lo - self.k, hi + self.k

    def paint(self, F: np.ndarray, grid: Grid) -> None:
        self.solids.paint(F, grid)
        for part in self.seams:
            lo, hi = part.aabb()
            win = grid.window(lo - self.k, hi + self.k)
            if win is None:
                continue
            pts = grid.points(win)
            vals = _smin(self.solids.values(pts), part.values(pts), self.k)
            view = F[win]
            np.minimum(view, vals.reshape(view.shape), out=view)

    def values(self, pts: np.ndarray) -> np.ndarray:
        v = self.solids.values(pts)
        for part in self.seams:
            v = _smin(v, part.values(pts), self.k)
        return v


# ─────────────────────────────── meshing ───────────────────────────────


def paint_field(field: Field, pitch: float, pad: int = 3):
    """Rasterize the field; returns (F, origin)."""
    lo, hi = field.aabb()
    origin = lo - pad * pitch + _GRID_NUDGE * pitch
    shape = tuple(np.ceil((hi + pad * pitch - origin) / pitch).astype(int) + 1)
    grid = Grid(origin, float(pitch), shape, margin=3.0 * pitch)
    F = np.full(shape, np.float32(3.0 * pitch))
    field.paint(F, grid)
    return F, origin


def mesh_field(field: Field, pitch: float) -> TriMesh:
    """March the painted field and return a welded, outward-oriented mesh
    with float32-exact coordinates."""
    F, origin = paint_field(field, pitch)
    if not np.any(F < 0.0):
        raise GeometryError("solid is empty at this resolution")
    np.copyto(F, _MIN_ABS, where=np.abs(F) < _MIN_ABS)
    verts, faces, _, _ = measure.marching_cubes(F, level=0.0, spacing=(pitch,) * 3)
    verts = (verts.astype(np.float64) + origin).astype(np.float32).astype(np.float64)
    mesh = weld(verts, faces)
    if mesh.volume() < 0.0:
        mesh = TriMesh(mesh.vertices, mesh.triangles[:, ::-1])
    return mesh
