"""Printable solids: fingers as rolling-bone chains tied by ligament straps,
hands as placed fingers plus a palm slab derived from the metacarpal bases.

The finger is modelled in its printed state: bones laid out straight along
+y with an uncompressed standoff gap at every joint, so the only material
crossing a joint is the dorsal ligament strap. Pulley guides are wedge ramps
whose exposed slope rises at the hand's inward-curvature angle, which is what
ties the printability bound tan(theta_c) >= (t_p + r_p) / l_p to the solid
model: a ramp of base l_p at angle theta_c clears the guide height t_p + r_p
exactly when the bound holds.

Frames match the kinematics convention: +x palmar, +y distal, +z lateral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..handspec import (
    BONE_NAMES,
    FingerSpec,
    HandSpec,
    JOINT_NAMES,
    LigamentSpec,
    PulleySpec,
    min_print_angle,
)
from ..kinematics import placement_transform
from .mesh import GeometryError, TriMesh, require_printable
from .sdf import ConvexPoly, Disc, Extruded, Field, Placed, Profile, Scene, Union, mesh_field

JOINT_STANDOFF_MM = 0.8  # printed gap between facing joint surfaces (pre-tension)
STRAP_BOND_MM = 2.0  # ligament overlap onto each bone shaft past the joint circle
WEDGE_EMBED_MM = 0.6  # pulley ramps root this deep under the local surface
WEDGE_ROOF_MM = 0.6  # flat crest so a near-vertical ramp stays a solid fin
FILLET_MM = 0.4  # blend radius where straps meet bone
PALM_REACH = 0.35  # fraction of each metacarpal included in the palm footprint
PALM_CHAMFER_MM = 3.0  # cap on the palmar-rim chamfer height
GUIDE_HEADROOM_MM = 0.8  # ramp height allowance above the t_p + r_p guide channel


# ─────────────────────────────── grid pitch ───────────────────────────────


def _pitch(finger_like, ligament: LigamentSpec, pulley: PulleySpec, tol: float, coarse: bool) -> float:
    """Sample pitch from the tessellation tolerance and the thinnest features.

    The chord-error term handles curved surfaces; the feature terms keep the
    ligament straps, pulley walls, and the joint standoff resolvable. A hand
    grid: spans ~10x more volume than a finger, so it trades a little strap
    oversampling away (divisor 1.6 vs 2.5) to stay inside time and memory.
    """
    r_min = min(min(f.joint_diameters) for f in finger_like) / 2.0
    f = 1.6 if coarse else 2.5
    pitch = min(
        math.sqrt(8.0 * r_min * tol),
        ligament.t_lig / f,
        pulley.t_p / f,
        JOINT_STANDOFF_MM / (1.9 if coarse else 2.0),
    )
    return float(np.clip(pitch, 0.05, 0.8))


# ─────────────────────────────── finger solid ───────────────────────────────


def _stack(finger: FingerSpec) -> list[float]:
    """Base y of each bone in the straight printed chain."""
    y = [0.0]
    for length, d in zip(finger.bone_lengths[:3], finger.joint_diameters):
        y.append(y[-1] + length + d + JOINT_STANDOFF_MM)
    return y


def _bone_profiles(finger: FingerSpec, base: list[float]):
    """Per-bone (profile, half-depth interpolation) in stack coordinates."""
    r = [d / 2.0 for d in finger.joint_diameters]
    out = []
    for k, length in enumerate(finger.bone_lengths):
        y0 = base[k]
        y1 = y0 + length
        ra = r[k - 1] if k > 0 else r[0]  # proximal half-depth
        rb = r[k] if k < 3 else r[2]  # distal half-depth
        pieces = [ConvexPoly([(-ra, y0), (ra, y0), (rb, y1), (-rb, y1)])]
        if k > 0:
            pieces.append(Disc((0.0, y0), ra))  # proximal rolling surface
        if k < 3:
            pieces.append(Disc((0.0, y1), rb))  # distal rolling surface
        out.append((Profile(*pieces), (y0, y1, ra, rb)))
    return out


def _half_depth(span, y: float) -> float:
    y0, y1, ra, rb = span
    s = 0.0 if y1 == y0 else np.clip((y - y0) / (y1 - y0), 0.0, 1.0)
    return ra + s * (rb - ra)


@dataclass(frozen=True)
class _Wedge:
    bone: int
    peak_y: float  # guide position: the crest sits here, ramp falls away
    direction: float  # -1 ramp falls proximally, +1 distally
    dorsal: bool
    joint: int  # joint whose gap the guide serves (for error reporting)


def _guide_wedges(finger: FingerSpec, base: list[float]) -> list[_Wedge]:
    pl = finger.placement
    r = [d / 2.0 for d in finger.joint_diameters]
    out = []
    for j in range(3):
        end = base[j] + finger.bone_lengths[j]
        out.append(_Wedge(j, end - r[j] - pl.l_2, -1.0, False, j))
        out.append(_Wedge(j + 1, base[j + 1] + r[j] + pl.l_1, +1.0, False, j))
        out.append(_Wedge(j, end - r[j] - pl.extensor_offset, -1.0, True, j))
        out.append(_Wedge(j + 1, base[j + 1] + r[j] + pl.extensor_offset, +1.0, True, j))
    return out


def _wedge_field(w: _Wedge, finger: FingerSpec, pulley: PulleySpec, theta_c: float,
                 base: list[float], spans) -> Field:
    """Right-trapezoid ramp embedded in the bone surface, crest toward the joint."""
    span = spans[w.bone]
    y0, y1 = span[0], span[1]
    height = min(pulley.l_p * math.tan(theta_c), pulley.t_p + pulley.r_p + GUIDE_HEADROOM_MM)
    run = height / math.tan(theta_c)  # base of the exposed slope at exactly theta_c
    foot = WEDGE_ROOF_MM + run
    # a guide pushed toward its own joint (negative placement offset) would
    # bridge the gap; a guide that merely runs out of shaft on a short bone is
    # slid back onto it
    toward_joint = w.peak_y > y1 + 1e-9 if w.direction < 0 else w.peak_y < y0 - 1e-9
    if toward_joint:
        a, b = BONE_NAMES[w.joint], BONE_NAMES[w.joint + 1]
        raise GeometryError(
            f"{finger.name}: pulley guide on the {BONE_NAMES[w.bone]} lands inside "
            f"the joint gap — bone solids {a!r} and {b!r} would intersect"
        )
    foot = min(foot, y1 - y0)
    peak = float(np.clip(w.peak_y, y0 + foot if w.direction < 0 else y0, y1 if w.direction < 0 else y1 - foot))
    ys = (peak, peak - w.direction * foot)
    emb = min(_half_depth(span, ys[0]), _half_depth(span, ys[1])) - WEDGE_EMBED_MM
    corners = [
        (emb, ys[1]),
        (emb, ys[0]),
        (emb + height, ys[0]),
        (emb + height, ys[0] - w.direction * WEDGE_ROOF_MM),
    ]
    if w.dorsal:
        corners = [(-x, y) for x, y in corners]
    wp = min(2.0 * (pulley.t_p + pulley.r_p), finger.w)
    return Extruded(Profile(ConvexPoly(corners)), -wp / 2.0, wp / 2.0, plane="xy")


def _finger_leaves(finger: FingerSpec, ligament: LigamentSpec, pulley: PulleySpec,
                   theta_c: float) -> tuple[list[Field], list[Field]]:
    """(bone/guide solids, ligament straps) in the finger's own frame."""
    base = _stack(finger)
    profiles = _bone_profiles(finger, base)
    spans = [span for _, span in profiles]
    hw = finger.w / 2.0
    parts: list[Field] = [Extruded(prof, -hw, hw, plane="xy") for prof, _ in profiles]
    for w in _guide_wedges(finger, base):
        parts.append(_wedge_field(w, finger, pulley, theta_c, base, spans))

    straps: list[Field] = []
    r = [d / 2.0 for d in finger.joint_diameters]
    hs = ligament.w_lig / 2.0
    for j in range(3):
        c_prox = base[j] + finger.bone_lengths[j]  # proximal circle centre
        c_dist = base[j + 1]
        rect = ConvexPoly([
            (-r[j], c_prox - STRAP_BOND_MM),
            (-r[j] + ligament.t_lig, c_prox - STRAP_BOND_MM),
            (-r[j] + ligament.t_lig, c_dist + STRAP_BOND_MM),
            (-r[j], c_dist + STRAP_BOND_MM),
        ])
        straps.append(Extruded(Profile(rect), -hs, hs, plane="xy"))
    return parts, straps


def build_finger_mesh(finger: FingerSpec, ligament: LigamentSpec, pulley: PulleySpec,
                      theta_c: float, tol: float = 0.05) -> TriMesh:
    """Mesh one printed finger: four bone solids joined only by the straps."""
    pitch = _pitch([finger], ligament, pulley, tol, coarse=False)
    parts, straps = _finger_leaves(finger, ligament, pulley, theta_c)
    scene = Scene(Union(parts, max(1.0, 3.0 * pitch)), straps, FILLET_MM)
    mesh = mesh_field(scene, pitch)
    require_printable(mesh, f"finger {finger.name!r} mesh")
    return mesh


def bone_shaft_mesh(length: float, width: float, depth: float) -> TriMesh:
    """An isolated rectangular shaft, mainly a meshing-fidelity probe."""
    rect = ConvexPoly([
        (-depth / 2.0, 0.0), (depth / 2.0, 0.0),
        (depth / 2.0, length), (-depth / 2.0, length),
    ])
    field = Extruded(Profile(rect), -width / 2.0, width / 2.0, plane="xy")
    pitch = float(np.clip(min(length, width, depth) / 20.0, 0.05, 0.4))
    return mesh_field(field, pitch)


# ─────────────────────────────── palm + hand ───────────────────────────────


class _Palm(Field):
    """Extruded convex footprint with the palmar rim chamfered at theta_c."""

    def __init__(self, hull_yz: np.ndarray, x_lo: float, x_hi: float, theta_c: float):
        self.poly = ConvexPoly(hull_yz)
        self.x_lo, self.x_hi = x_lo, x_hi
        chamfer = min(PALM_CHAMFER_MM, 0.4 * (x_hi - x_lo))
        self.start = x_hi - chamfer
        self.cot = 1.0 / math.tan(theta_c) if theta_c < math.pi / 2 - 1e-9 else 0.0

    def aabb(self):
        lo, hi = self.poly.bounds()
        return np.array([self.x_lo, lo[0], lo[1]]), np.array([self.x_hi, hi[0], hi[1]])

    def values(self, pts: np.ndarray) -> np.ndarray:
        d2 = self.poly.values(pts[:, 1:])
        c = 0.5 * (self.x_lo + self.x_hi)
        dx = np.abs(pts[:, 0] - c) - 0.5 * (self.x_hi - self.x_lo)
        slab = np.minimum(np.maximum(d2, dx), 0.0) + np.hypot(np.maximum(d2, 0.0), np.maximum(dx, 0.0))
        rim = d2 + np.maximum(pts[:, 0] - self.start, 0.0) * self.cot
        return np.maximum(slab, rim)


def _placed_leaves(f: FingerSpec, spec: HandSpec):
    """World-frame (solids, straps, transform) for one placed finger."""
    T = placement_transform(f, spec.theta_c)
    parts, straps = _finger_leaves(f, spec.ligament, spec.pulley, spec.theta_c)
    return (
        [Placed(T.R, T.t, p) for p in parts],
        [Placed(T.R, T.t, s) for s in straps],
        T,
    )


def _palm_field(spec: HandSpec) -> tuple[_Palm, dict]:
    pts2d = []
    x_spans = {}
    centers_x = []
    for f in spec.fingers:
        T = placement_transform(f, spec.theta_c)
        r0 = f.d_mcp / 2.0
        hw = f.w / 2.0
        corners = [
            (sx * r0, y, sz * hw)
            for sx in (-1, 1)
            for sz in (-1, 1)
            for y in (0.0, PALM_REACH * f.l_meta)
        ]
        world = np.array([T.apply(c) for c in corners])
        pts2d.extend(world[:, 1:])
        at_base = world[[0, 2, 4, 6]]  # the y = 0 corners
        x_spans[f.name] = (float(at_base[:, 0].min()), float(at_base[:, 0].max()))
        centers_x.append(T.apply((0.0, 0.0, 0.0))[0])
    thickness = float(np.mean([f.d_mcp for f in spec.fingers]))
    x_c = float(np.mean(centers_x))
    try:
        hull = ConvexHull(np.asarray(pts2d))
    except QhullError as e:
        raise GeometryError(f"palm footprint is degenerate: {e}") from e
    footprint = np.asarray(pts2d)[hull.vertices]
    palm = _Palm(footprint, x_c - thickness / 2.0, x_c + thickness / 2.0, spec.theta_c)
    for name, (lo, hi) in x_spans.items():
        overlap = min(palm.x_hi, hi) - max(palm.x_lo, lo)
        if overlap < 0.5:
            raise GeometryError(
                f"palm slab cannot bridge finger {name!r}: metacarpal base sits "
                f"{-overlap:.1f} mm clear of the palm in the palmar direction"
            )
    return palm, x_spans


def _check_finger_collisions(spec: HandSpec, fields, transforms, pitch: float = 0.8) -> None:
    """Coarse occupancy scan; phalanx overlap between two fingers is a build error.

    Metacarpal-zone interpenetration is tolerated — those segments fuse into
    the palm anyway — which is what lets closely packed bases share material
    while crossed or coincident fingers are still rejected.
    """
    cut = {
        f.name: f.l_meta + 0.5 * (f.d_mcp + JOINT_STANDOFF_MM) for f in spec.fingers
    }
    boxes = [f.aabb() for f in fields]
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            lo = np.maximum(boxes[i][0], boxes[j][0])
            hi = np.minimum(boxes[i][1], boxes[j][1])
            if np.any(hi <= lo):
                continue
            axes = [np.arange(a, b + pitch, pitch) for a, b in zip(lo, hi)]
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
            fi, fj = spec.fingers[i], spec.fingers[j]
            both = (fields[i].values(pts) < 0.0) & (fields[j].values(pts) < 0.0)
            if not both.any():
                continue
            Ti, Tj = transforms[i], transforms[j]
            local_i = (pts[both] - Ti.t) @ Ti.R
            local_j = (pts[both] - Tj.t) @ Tj.R
            if np.any(local_i[:, 1] > cut[fi.name]) or np.any(local_j[:, 1] > cut[fj.name]):
                raise GeometryError(f"fingers {fi.name!r} and {fj.name!r} collide")


def build_hand_mesh(spec: HandSpec, tol: float = 0.05) -> TriMesh:
    """Mesh the whole hand: placed fingers unioned with the palm slab."""
    pitch = _pitch(spec.fingers, spec.ligament, spec.pulley, tol, coarse=True)
    margin = max(1.0, 3.0 * pitch)
    solids: list[Field] = []
    seams: list[Field] = []
    per_finger = []
    transforms = []
    for f in spec.fingers:
        parts, straps, T = _placed_leaves(f, spec)
        solids.extend(parts)
        seams.extend(straps)
        per_finger.append(Union(parts + straps, margin))
        transforms.append(T)
    _check_finger_collisions(spec, per_finger, transforms)
    palm, _ = _palm_field(spec)
    solids.append(palm)
    scene = Scene(Union(solids, margin), seams, FILLET_MM)
    mesh = mesh_field(scene, pitch)
    require_printable(mesh, "hand mesh")
    return mesh


# ─────────────────────────────── print constraint ───────────────────────────────


@dataclass(frozen=True)
class FeatureCheck:
    name: str
    thickness: float  # mm, thin dimension of the feature
    layer_span: float  # mm, vertical extent of its cross-section at theta_c
    ok: bool


@dataclass(frozen=True)
class PrintReport:
    min_required_angle: float  # radians
    actual_angle: float
    features: tuple[FeatureCheck, ...]
    ok: bool

    def summary(self) -> str:
        lines = [
            f"print angle {self.actual_angle:.4f} rad "
            f"(minimum {self.min_required_angle:.4f}): "
            f"{'ok' if self.actual_angle >= self.min_required_angle - 1e-12 else 'TOO SHALLOW'}"
        ]
        for fc in self.features:
            lines.append(
                f"{'PASS' if fc.ok else 'FAIL'}  {fc.name:<34} span {fc.layer_span:.3f} mm"
            )
        lines.append("PASS" if self.ok else "FAIL")
        return "\n".join(lines)


def check_print_constraint(spec: HandSpec, layer_height: float = 0.2) -> PrintReport:
    """Angle bound plus a per-feature check that each thin cross-section,
    tilted at theta_c, still spans a full print layer."""
    if layer_height <= 0.0:
        raise ValueError("layer_height must be positive")
    required = min_print_angle(spec.pulley)
    cos_t = math.cos(spec.theta_c)

    def span(thickness: float) -> float:
        return math.inf if cos_t <= 1e-12 else thickness / cos_t

    features = []
    for f in spec.fingers:
        for joint in JOINT_NAMES:
            for label, t in (
                ("ligament", spec.ligament.t_lig),
                ("pulley_palmar", spec.pulley.t_p),
                ("pulley_dorsal", spec.pulley.t_p),
            ):
                s = span(t)
                features.append(
                    FeatureCheck(f"{f.name}.{joint}.{label}", t, s, s >= layer_height - 1e-12)
                )
    ok = all(fc.ok for fc in features) and spec.theta_c >= required - 1e-12
    return PrintReport(required, spec.theta_c, tuple(features), ok)
