"""Binary STL export/import.

Layout: 80-byte header, little-endian uint32 triangle count, then per
triangle 12 little-endian float32 (unit normal, three vertices) plus a
two-byte attribute word — 50 bytes per triangle, 84 + 50*n total. Output is
deterministic: a fixed header, no timestamps, and normals recomputed from
vertex order.
"""

from __future__ import annotations

import io
import numpy as np

from .mesh import GeometryError, TriMesh, weld

_HEADER = b"paramhand tendon-hand solid model (binary STL)"

_TRI_DTYPE = np.dtype(
    [("normal", "<f4", (3,)), ("verts", "<f4", (3, 3)), ("attr", "<u2")]
)


def _facet_normals(corners: np.ndarray) -> np.ndarray:
    a, b, c = np.moveaxis(corners, 1, 0)
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = np.where(norm > 0.0, n / norm, 0.0)
    return n


def stl_bytes(mesh: TriMesh, strict: bool = True) -> bytes:
    """Serialize without touching the filesystem."""
    if strict and not mesh.is_watertight():
        raise GeometryError("refusing to export a non-watertight mesh (strict mode)")
    m = mesh.n_triangles
    rec = np.zeros(m, dtype=_TRI_DTYPE)
    if m:
        corners = mesh.corners()
        rec["verts"] = corners.astype("<f4")
        rec["normal"] = _facet_normals(corners).astype("<f4")
    head = _HEADER[:80].ljust(80, b"\0")
    return head + np.uint32(m).tobytes() + rec.tobytes()


def _ascii_lines(mesh: TriMesh):
    yield "solid paramhand\n"
    corners = mesh.corners()
    normals = _facet_normals(corners) if len(corners) else corners
    for n, tri in zip(normals, corners):
        yield f"  facet normal {n[0]:.9e} {n[1]:.9e} {n[2]:.9e}\n"
        yield "    outer loop\n"
        for v in tri:
            yield f"      vertex {v[0]:.9e} {v[1]:.9e} {v[2]:.9e}\n"
        yield "    endloop\n"
        yield "  endfacet\n"
    yield "endsolid paramhand\n"


def export_stl(mesh: TriMesh, destination, ascii_format: bool = False, strict: bool = True) -> int:
    """Write the mesh to a path or binary file object; returns bytes written."""
    if ascii_format:
        if strict and not mesh.is_watertight():
            raise GeometryError("refusing to export a non-watertight mesh (strict mode)")
        data = "".join(_ascii_lines(mesh)).encode("ascii")
    else:
        data = stl_bytes(mesh, strict=strict)
    if hasattr(destination, "write"):
        destination.write(data)
    else:
        with open(destination, "wb") as fh:
            fh.write(data)
    return len(data)


def import_stl(source) -> TriMesh:
    """Read a binary STL; identical float32 vertices are re-welded so the
    topology diagnostics work on the imported mesh."""
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if len(data) < 84:
        raise GeometryError(f"not a binary STL: {len(data)} bytes")
    count = int(np.frombuffer(data[80:84], dtype="<u4")[0])
    if len(data) != 84 + 50 * count:
        if data[:5] == b"solid":
            raise GeometryError("ASCII STL import is not supported")
        raise GeometryError(
            f"binary STL size mismatch: {len(data)} bytes for {count} triangles"
        )
    rec = np.frombuffer(data[84:], dtype=_TRI_DTYPE)
    verts = rec["verts"].astype(np.float64).reshape(-1, 3)
    tris = np.arange(3 * count, dtype=np.int64).reshape(-1, 3)
    return weld(verts, tris)
