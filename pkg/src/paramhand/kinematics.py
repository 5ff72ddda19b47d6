"""Rolling-joint finger kinematics and tendon-path geometry.

Frame conventions (finger frame, all bones at the zero pose):
    +y  distal along the straight finger
    +x  palmar (positive flexion curls the finger toward +x)
    +z  lateral

Each joint is a pair of equal circles (diameter d) in rolling contact. For a
flexion angle theta the distal circle centre sits at d*(sin(theta/2),
cos(theta/2)) in the proximal circle frame and the distal bone is rotated by
theta. The instantaneous centre of the rolling motion is the contact point,
which is what the analytic Jacobians below use. The MCP joint composes an
abduction rotation about the palmar axis through the zero-pose contact point
proximally of the flexion roll.

Tendons are polylines over via-points fixed to the bones. A segment that
crosses a joint is routed around the joint circle pair by a tangent-arc
construction carried out in the joint's bending plane; out-of-plane offset is
handled with the unrolled-cylinder composition sqrt(S^2 + dn^2), which keeps
the analytic length gradient exact. Wrap angles feed the capstan friction
model in statics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .handspec import FingerSpec

DOF_NAMES = ("mcp_flex", "mcp_abd", "pip", "dip")
N_DOF = 4
# bones moved by each dof (bone 0 metacarpal .. 3 distal)
DOF_BODIES = ({1, 2, 3}, {1, 2, 3}, {2, 3}, {3})
JOINT_OF_DOF = (0, 0, 1, 2)  # joint index per dof (mcp, mcp, pip, dip)

GUIDE_STANDOFF_MM = 0.5  # tendon channel centreline above the local surface

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


class RoutingError(ValueError):
    """Tendon path cannot be constructed (via-point inside a joint circle)."""


# ─────────────────────────────── transforms ───────────────────────────────


def rot_flex(theta: float) -> np.ndarray:
    """Rotation curling +y toward +x (about -z) by theta."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_abd(psi: float) -> np.ndarray:
    """Rotation tipping +y toward +z (about +x) by psi."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_spread(theta: float) -> np.ndarray:
    return rot_abd(theta)  # finger spread uses the same palmar axis

def rot_roll(phi: float) -> np.ndarray:
    """Rotation about the finger long axis +y."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class Transform:
    R: np.ndarray
    t: np.ndarray

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3), np.zeros(3))

    @staticmethod
    def translation(t: Sequence[float]) -> "Transform":
        return Transform(np.eye(3), np.asarray(t, dtype=float))

    @staticmethod
    def rotation(R: np.ndarray) -> "Transform":
        return Transform(np.asarray(R, dtype=float), np.zeros(3))

    def __matmul__(self, other: "Transform") -> "Transform":
        return Transform(self.R @ other.R, self.R @ other.t + self.t)

    def apply(self, p: Sequence[float]) -> np.ndarray:
        return self.R @ np.asarray(p, dtype=float) + self.t

    def inverse(self) -> "Transform":
        Rt = self.R.T
        return Transform(Rt, -Rt @ self.t)


def rolling_transform(diameter: float, theta: float) -> Transform:
    """Proximal circle frame -> distal circle frame for a rolled joint."""
    h = 0.5 * theta
    t = diameter * np.array([math.sin(h), math.cos(h), 0.0])
    return Transform(rot_flex(theta), t)


# ─────────────────────────────── pose / limits ───────────────────────────────


@dataclass(frozen=True)
class Pose:
    """Joint angles in radians."""

    mcp_flex: float = 0.0
    mcp_abd: float = 0.0
    pip: float = 0.0
    dip: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.mcp_flex, self.mcp_abd, self.pip, self.dip])

    @staticmethod
    def from_array(q: Sequence[float]) -> "Pose":
        q = np.asarray(q, dtype=float)
        return Pose(float(q[0]), float(q[1]), float(q[2]), float(q[3]))

    @staticmethod
    def from_degrees(mcp_flex=0.0, mcp_abd=0.0, pip=0.0, dip=0.0) -> "Pose":
        r = math.radians
        return Pose(r(mcp_flex), r(mcp_abd), r(pip), r(dip))


def _deg_pair(lo: float, hi: float) -> tuple[float, float]:
    return (math.radians(lo), math.radians(hi))


@dataclass(frozen=True)
class JointLimits:
    """Hard-stop ranges, radians. Defaults are the printed-hand ranges.

    The MCP abduction bound depends on MCP flexion: full range extended,
    a narrow range at 90 degrees flexion, linear in between and clamped
    beyond 90 degrees.
    """

    mcp_flex: tuple[float, float] = _deg_pair(-83.0, 110.0)
    mcp_abd_extended: tuple[float, float] = _deg_pair(-41.0, 31.0)
    mcp_abd_flexed: tuple[float, float] = _deg_pair(-8.0, 7.0)
    pip: tuple[float, float] = _deg_pair(3.0, 101.0)
    dip: tuple[float, float] = _deg_pair(-9.0, 108.0)

    def mcp_abd(self, mcp_flex: float) -> tuple[float, float]:
        s = min(max(mcp_flex / (math.pi / 2.0), 0.0), 1.0)
        lo = (1 - s) * self.mcp_abd_extended[0] + s * self.mcp_abd_flexed[0]
        hi = (1 - s) * self.mcp_abd_extended[1] + s * self.mcp_abd_flexed[1]
        return (lo, hi)

    def bounds(self, q: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper bound arrays for a dof vector (abd bound at its flexion)."""
        abd = self.mcp_abd(float(q[0]))
        lo = np.array([self.mcp_flex[0], abd[0], self.pip[0], self.dip[0]])
        hi = np.array([self.mcp_flex[1], abd[1], self.pip[1], self.dip[1]])
        return lo, hi


# ─────────────────────────────── forward kinematics ───────────────────────────────


@dataclass(frozen=True)
class DofInfo:
    name: str
    axis: np.ndarray  # world rotation axis (unit)
    pivot: np.ndarray  # a point on the axis
    bodies: frozenset  # bone indices moved by this dof


@dataclass(frozen=True)
class JointGeometry:
    name: str
    radius: float
    prox_center: np.ndarray  # world
    dist_center: np.ndarray
    prox_body: int
    dist_body: int

    @property
    def contact(self) -> np.ndarray:
        return 0.5 * (self.prox_center + self.dist_center)

    @property
    def normal(self) -> np.ndarray:
        v = self.dist_center - self.prox_center
        return v / np.linalg.norm(v)


@dataclass(frozen=True)
class FingerFrames:
    finger: FingerSpec
    pose: Pose
    bones: tuple[Transform, Transform, Transform, Transform]
    pres: tuple[Transform, Transform, Transform]  # pre-roll frame of each joint
    joints: tuple[JointGeometry, JointGeometry, JointGeometry]
    dofs: tuple[DofInfo, DofInfo, DofInfo, DofInfo]
    tip: np.ndarray

    def point(self, bone: int, local: Sequence[float]) -> np.ndarray:
        return self.bones[bone].apply(local)

    def point_velocity(self, dof: int, bone: int, p_world: np.ndarray) -> np.ndarray:
        """dp/dq for unit rate of one dof (rigid-body velocity field)."""
        info = self.dofs[dof]
        if bone not in info.bodies:
            return np.zeros(3)
        return np.cross(info.axis, p_world - info.pivot)

    def point_jacobian(self, bone: int, p_world: np.ndarray) -> np.ndarray:
        """(N_DOF, 3) array of dp/dq_j."""
        return np.stack([self.point_velocity(j, bone, p_world) for j in range(N_DOF)])

    def frame_velocity(self, joint: int, dof: int, p_world: np.ndarray) -> np.ndarray:
        """Velocity field of joint's pre-roll frame under one dof."""
        if joint == 0:
            # pre-MCP frame carries the abduction rotation, nothing else
            if dof == 1:
                return self.point_velocity(1, 1, p_world)
            return np.zeros(3)
        return self.point_velocity(dof, joint, p_world)  # bone `joint` fixed frame


def fk(finger: FingerSpec, pose: Pose) -> FingerFrames:
    d_mcp, d_pip, d_dip = finger.joint_diameters

    t_meta = Transform.identity()
    j_mcp = Transform.translation((0.0, finger.l_meta, 0.0))

    # MCP: abduction about +x through the zero-pose contact, then the roll
    c0 = np.array([0.0, d_mcp / 2.0, 0.0])
    t_abd = Transform.translation(c0) @ Transform.rotation(rot_abd(pose.mcp_abd)) @ Transform.translation(-c0)
    pre_mcp = j_mcp @ t_abd
    t_prox = pre_mcp @ rolling_transform(d_mcp, pose.mcp_flex)

    j_pip = t_prox @ Transform.translation((0.0, finger.l_prox, 0.0))
    t_inte = j_pip @ rolling_transform(d_pip, pose.pip)

    j_dip = t_inte @ Transform.translation((0.0, finger.l_inte, 0.0))
    t_dist = j_dip @ rolling_transform(d_dip, pose.dip)

    tip = t_dist.apply((0.0, finger.l_dist, 0.0))

    def contact_point(pre: Transform, d: float, theta: float) -> np.ndarray:
        h = 0.5 * theta
        return pre.apply((d / 2.0 * math.sin(h), d / 2.0 * math.cos(h), 0.0))

    joints = (
        JointGeometry("mcp", d_mcp / 2.0, pre_mcp.apply((0.0, 0.0, 0.0)), t_prox.t.copy(), 0, 1),
        JointGeometry("pip", d_pip / 2.0, j_pip.t.copy(), t_inte.t.copy(), 1, 2),
        JointGeometry("dip", d_dip / 2.0, j_dip.t.copy(), t_dist.t.copy(), 2, 3),
    )

    dofs = (
        DofInfo(
            "mcp_flex",
            pre_mcp.R @ -_Z,
            contact_point(pre_mcp, d_mcp, pose.mcp_flex),
            frozenset(DOF_BODIES[0]),
        ),
        DofInfo("mcp_abd", j_mcp.R @ _X, j_mcp.apply(c0), frozenset(DOF_BODIES[1])),
        DofInfo(
            "pip",
            j_pip.R @ -_Z,
            contact_point(j_pip, d_pip, pose.pip),
            frozenset(DOF_BODIES[2]),
        ),
        DofInfo(
            "dip",
            j_dip.R @ -_Z,
            contact_point(j_dip, d_dip, pose.dip),
            frozenset(DOF_BODIES[3]),
        ),
    )

    return FingerFrames(
        finger=finger,
        pose=pose,
        bones=(t_meta, t_prox, t_inte, t_dist),
        pres=(pre_mcp, j_pip, j_dip),
        joints=joints,
        dofs=dofs,
        tip=tip,
    )


def fingertip(finger: FingerSpec, pose: Pose) -> np.ndarray:
    return fk(finger, pose).tip


def placement_transform(finger: FingerSpec, theta_c: float) -> Transform:
    """Finger frame -> hand frame: origin, spread, inward curvature roll."""
    roll = -math.copysign(theta_c, finger.origin[2]) if finger.origin[2] != 0.0 else 0.0
    return (
        Transform.translation(finger.origin)
        @ Transform.rotation(rot_spread(finger.theta_f))
        @ Transform.rotation(rot_roll(roll))
    )


# ─────────────────────────────── tendon routes ───────────────────────────────


@dataclass(frozen=True)
class TendonRoute:
    """Ordered via-points (bone index, local point) from base exit to anchor.

    side: local direction the tendon is offset toward, picks the wrap side
    around joint circles ("+x" palmar flexors, "-x" extensor, "+-z" lateral).
    plane: "flexion" crossings wrap the joint circle pair in the bending
    plane; "lateral" crossings wrap the joint's side silhouette (radius w/2)
    in the abduction plane.
    """

    name: str
    points: tuple[tuple[int, tuple[float, float, float]], ...]
    side: tuple[float, float, float]
    plane: str = "flexion"

    @property
    def crossed_joints(self) -> tuple[int, ...]:
        out = []
        for (ba, _), (bb, _) in zip(self.points, self.points[1:]):
            if bb != ba:
                if bb != ba + 1:
                    raise RoutingError(f"{self.name}: segment skips bones {ba}->{bb}")
                out.append(ba)  # joint k connects bones k and k+1
        return tuple(out)


FLEXOR_TENDONS = ("flexor_distal", "flexor_intermediate")
ALL_TENDONS = ("flexor_distal", "flexor_intermediate", "extensor", "abductor", "adductor")
THUMB_TENDONS = ALL_TENDONS + ("opposition",)


def default_routes(finger: FingerSpec, opposition_base: Sequence[float] | None = None) -> tuple[TendonRoute, ...]:
    """Five standard tendons, plus the opposition tendon on a thumb.

    Via-point offsets are measured along the bone from the joint circle rim
    (where the shaft meets the joint cylinder): l_1 on the distal side of a
    joint, l_2 on the proximal side. Palmar/dorsal guide height clears the
    adjacent joint circle by the guide standoff; lateral guides clear the
    joint side silhouette (w/2) the same way.
    """
    pl = finger.placement
    d_mcp, d_pip, d_dip = finger.joint_diameters
    r = {0: d_mcp / 2.0, 1: d_pip / 2.0, 2: d_dip / 2.0}
    lengths = finger.bone_lengths

    def h(joint: int) -> float:
        return r[joint] + GUIDE_STANDOFF_MM

    # a bone's distal joint centre sits at y = bone length in its own frame;
    # its proximal joint centre is the frame origin (y = 0)
    def palmar(joint: int, bone: int, y: float) -> tuple[int, tuple]:
        return (bone, (h(joint), y, 0.0))

    def dorsal(joint: int, bone: int, y: float) -> tuple[int, tuple]:
        return (bone, (-h(joint), y, 0.0))

    l1, l2 = pl.l_1, pl.l_2
    e = pl.extensor_offset
    lat = pl.lateral_offset
    w2 = finger.w / 2.0 + GUIDE_STANDOFF_MM

    def flexor_points(last_joint: int, anchor_bone: int) -> tuple:
        pts = [(0, (h(0), 2.0, 0.0))]  # base exit near the finger origin
        pts.append(palmar(0, 0, lengths[0] - r[0] - l2))
        pts.append(palmar(0, 1, r[0] + l1))
        if last_joint >= 1:
            pts.append(palmar(1, 1, lengths[1] - r[1] - l2))
            pts.append(palmar(1, 2, r[1] + l1))
        if last_joint >= 2:
            pts.append(palmar(2, 2, lengths[2] - r[2] - l2))
            pts.append(palmar(2, 3, r[2] + l1))
        ab = anchor_bone
        anchor_h = r[min(ab - 1, 2)] + GUIDE_STANDOFF_MM
        pts.append((ab, (anchor_h, 0.55 * lengths[ab], 0.0)))
        return tuple(pts)

    def extensor_points() -> tuple:
        pts = [(0, (-h(0), 2.0, 0.0))]
        pts.append(dorsal(0, 0, lengths[0] - r[0] - e))
        pts.append(dorsal(0, 1, r[0] + e))
        pts.append(dorsal(1, 1, lengths[1] - r[1] - e))
        pts.append(dorsal(1, 2, r[1] + e))
        pts.append(dorsal(2, 2, lengths[2] - r[2] - e))
        pts.append(dorsal(2, 3, r[2] + e))
        pts.append((3, (-(r[2] + GUIDE_STANDOFF_MM), 0.55 * lengths[3], 0.0)))
        return tuple(pts)

    def lateral_points(sign: float) -> tuple:
        z = sign * w2
        return (
            (0, (0.0, 2.0, z)),
            (0, (0.0, lengths[0] - r[0] - lat, z)),
            (1, (0.0, r[0] + lat, z)),
            (1, (0.0, 0.55 * lengths[1], z)),
        )

    routes = [
        TendonRoute("flexor_distal", flexor_points(2, 3), (1.0, 0.0, 0.0)),
        TendonRoute("flexor_intermediate", flexor_points(1, 2), (1.0, 0.0, 0.0)),
        TendonRoute("extensor", extensor_points(), (-1.0, 0.0, 0.0)),
        TendonRoute("abductor", lateral_points(+1.0), (0.0, 0.0, 1.0), plane="lateral"),
        TendonRoute("adductor", lateral_points(-1.0), (0.0, 0.0, -1.0), plane="lateral"),
    ]

    if finger.is_thumb:
        zo = -0.45 * finger.w
        if opposition_base is None:
            opposition_base = (0.6 * finger.w, 0.4 * lengths[0], -2.0 * finger.w)
        ob = tuple(float(v) for v in opposition_base)
        routes.append(
            TendonRoute(
                "opposition",
                (
                    (0, ob),
                    (0, (h(0), lengths[0] - r[0] - lat, zo)),
                    (1, (h(0), r[0] + lat, zo)),
                    (1, (0.8 * h(0), 0.5 * lengths[1], 0.6 * zo)),
                ),
                (1.0, 0.0, 0.0),
            )
        )
    return tuple(routes)


# ─────────────────────────────── wrap geometry (2D) ───────────────────────────────


def _point_segment_distance(p, a, b) -> float:
    abx, aby = b[0] - a[0], b[1] - a[1]
    apx, apy = p[0] - a[0], p[1] - a[1]
    denom = abx * abx + aby * aby
    if denom == 0.0:
        return math.hypot(apx, apy)
    t = (apx * abx + apy * aby) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    return math.hypot(apx - t * abx, apy - t * aby)


def _tangent_point(e, c, radius: float):
    """Touch point of the tangent from e to the circle, on the +u wrap side."""
    mx, my = e[0] - c[0], e[1] - c[1]
    dm = math.hypot(mx, my)
    if dm <= radius * (1.0 + 1e-12):
        return None
    mu = math.atan2(my, mx)
    phi = math.acos(min(radius / dm, 1.0))
    a1, a2 = mu + phi, mu - phi
    a = a1 if math.cos(a1) >= math.cos(a2) else a2
    return (c[0] + radius * math.cos(a), c[1] + radius * math.sin(a))


def _arc_span(c, radius: float, t_in, t_out) -> float:
    """Unsigned arc angle from t_in to t_out whose midpoint lies at +u."""
    a1 = math.atan2(t_in[1] - c[1], t_in[0] - c[0])
    a2 = math.atan2(t_out[1] - c[1], t_out[0] - c[0])
    ccw = (a2 - a1) % (2.0 * math.pi)
    if math.cos(a1 + 0.5 * ccw) >= 0.0:
        return ccw
    return 2.0 * math.pi - ccw


@dataclass(frozen=True)
class _Wrap2D:
    """Taut plan path: nodes tagged a/p/d/b, plan length, per-circle arcs."""

    nodes: tuple  # ((xy, tag), ...)
    length: float
    arc_prox: float
    arc_dist: float


def _solve_wrap_2d(a, b, cp, cd, radius: float, name: str) -> _Wrap2D:
    # plan frames are built with +u on the wrap side; points are (u, v) tuples
    a = (float(a[0]), float(a[1]))
    b = (float(b[0]), float(b[1]))
    cp = (float(cp[0]), float(cp[1]))
    cd = (float(cd[0]), float(cd[1]))
    for e in (a, b):
        for c in (cp, cd):
            if math.hypot(e[0] - c[0], e[1] - c[1]) <= radius * (1.0 - 1e-9):
                raise RoutingError(f"{name}: via-point inside joint circle")

    def clears(p, q, c) -> bool:
        return _point_segment_distance(c, p, q) >= radius * (1.0 - 1e-9)

    candidates: list[_Wrap2D] = []

    if clears(a, b, cp) and clears(a, b, cd):
        candidates.append(
            _Wrap2D(((a, "a"), (b, "b")), math.hypot(b[0] - a[0], b[1] - a[1]), 0.0, 0.0)
        )

    split = math.hypot(cd[0] - cp[0], cd[1] - cp[1]) > 1e-9
    for c, tag, other in ((cp, "p", cd), (cd, "d", cp)) if split else ((cp, "p", cp),):
        t_in = _tangent_point(a, c, radius)
        t_out = _tangent_point(b, c, radius)
        if t_in is None or t_out is None:
            continue
        arc = _arc_span(c, radius, t_in, t_out)
        if arc >= math.pi:  # wrapped past half the circle: not a taut path
            continue
        if split and not (clears(a, t_in, other) and clears(t_out, b, other)):
            continue
        length = (
            math.hypot(t_in[0] - a[0], t_in[1] - a[1])
            + arc * radius
            + math.hypot(b[0] - t_out[0], b[1] - t_out[1])
        )
        candidates.append(
            _Wrap2D(
                ((a, "a"), (t_in, tag), (t_out, tag), (b, "b")),
                length,
                arc if tag == "p" else 0.0,
                arc if tag == "d" else 0.0,
            )
        )

    # wrap around both circles with the common-tangent hand-off
    if split:
        t_in = _tangent_point(a, cp, radius)
        t_out = _tangent_point(b, cd, radius)
        if t_in is not None and t_out is not None:
            dx, dy = cd[0] - cp[0], cd[1] - cp[1]
            dnorm = math.hypot(dx, dy)
            px, py = dy / dnorm, -dx / dnorm
            if px < 0.0:
                px, py = -px, -py
            h1 = (cp[0] + radius * px, cp[1] + radius * py)
            h2 = (cd[0] + radius * px, cd[1] + radius * py)
            arc_p = _arc_span(cp, radius, t_in, h1)
            arc_d = _arc_span(cd, radius, h2, t_out)
            if arc_p < math.pi and arc_d < math.pi:
                length = (
                    math.hypot(t_in[0] - a[0], t_in[1] - a[1])
                    + arc_p * radius
                    + math.hypot(h2[0] - h1[0], h2[1] - h1[1])
                    + arc_d * radius
                    + math.hypot(b[0] - t_out[0], b[1] - t_out[1])
                )
                candidates.append(
                    _Wrap2D(
                        ((a, "a"), (t_in, "p"), (h1, "p"), (h2, "d"), (t_out, "d"), (b, "b")),
                        length,
                        arc_p,
                        arc_d,
                    )
                )

    if not candidates:
        raise RoutingError(f"{name}: no feasible wrap path")
    return min(candidates, key=lambda w: w.length)


# ─────────────────────────────── tendon paths ───────────────────────────────


@dataclass(frozen=True)
class PathSegment:
    a: np.ndarray  # world endpoints
    b: np.ndarray
    body_a: int
    body_b: int

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.b - self.a))

    @property
    def direction(self) -> np.ndarray:
        v = self.b - self.a
        return v / np.linalg.norm(v)


@dataclass(frozen=True)
class Crossing:
    """One joint-crossing tendon span, solved in the joint's plan frame."""

    joint: int
    body_a: int
    body_b: int
    plan_nodes: tuple  # ((xy, tag), ...) in plan coordinates
    node_n: tuple  # out-of-plane coordinate per node (linear in arclength)
    eu: np.ndarray  # world plan basis
    ev: np.ndarray
    en: np.ndarray  # world plan normal (cylinder axis direction)
    origin: np.ndarray  # world point at plan (0, 0), n = 0
    plan_length: float
    dn: float  # n_b - n_a
    arc_prox: float
    arc_dist: float
    radius: float
    moving_obstacle: bool  # distal circle rolls with the joint dof
    fixed_frame: bool  # plan frame is bone-0 fixed (lateral crossings)

    @property
    def length(self) -> float:
        return math.hypot(self.plan_length, self.dn)

    def lift(self, xy: np.ndarray, n: float) -> np.ndarray:
        return self.origin + xy[0] * self.eu + xy[1] * self.ev + n * self.en

    def nodes3d(self) -> tuple:
        return tuple((self.lift(xy, n), tag) for (xy, tag), n in zip(self.plan_nodes, self.node_n))


@dataclass(frozen=True)
class TendonPath:
    route: TendonRoute
    segments: tuple[PathSegment, ...]  # all straight spans, world coords
    crossings: tuple[Crossing, ...]
    length: float
    wrap_angle: float  # accumulated arc + via-point kink angle, rad


def _crossing(frames: FingerFrames, route: TendonRoute, joint: int, pa, ba, pb, bb) -> Crossing:
    finger = frames.finger
    jg = frames.joints[joint]
    sl = np.asarray(route.side, dtype=float)

    if route.plane == "lateral" and joint == 0:
        # fixed side-silhouette circle (radius w/2) about the abduction
        # pivot; plan = (z, y) of the pre-abduction MCP frame (bone 0)
        sign = 1.0 if sl[2] >= 0.0 else -1.0
        orig = np.array([0.0, finger.l_meta, 0.0])
        eu = sign * _Z
        ev = _Y.copy()
        radius = finger.w / 2.0
        cp_plan = (0.0, jg.radius)
        cd_plan = cp_plan
        moving = False
        fixed_frame = True
    else:
        # bending-plane crossing: plan = (x, y) of the pre-roll joint frame,
        # with +u flipped onto the tendon's wrap side
        pre = frames.pres[joint]
        sign = 1.0 if sl[0] >= 0.0 else -1.0
        orig = pre.t
        eu = pre.R @ (sign * _X)
        ev = pre.R @ _Y
        radius = jg.radius
        theta = (frames.pose.mcp_flex, frames.pose.pip, frames.pose.dip)[joint]
        hh = 0.5 * theta
        cp_plan = (0.0, 0.0)
        cd_plan = (2.0 * radius * sign * math.sin(hh), 2.0 * radius * math.cos(hh))
        moving = True
        fixed_frame = False
    en = np.cross(eu, ev)

    def to_plan(p: np.ndarray) -> tuple[tuple, float]:
        d = p - orig
        return (float(d @ eu), float(d @ ev)), float(d @ en)

    a2, na = to_plan(pa)
    b2, nb = to_plan(pb)

    sol = _solve_wrap_2d(a2, b2, cp_plan, cd_plan, radius, route.name)

    # distribute the out-of-plane offset linearly over the plan arclength
    s_acc = [0.0]
    for (p1, t1), (p2, t2) in zip(sol.nodes, sol.nodes[1:]):
        if t1 == t2 and t1 in ("p", "d"):
            c = cp_plan if t1 == "p" else cd_plan
            ds = _arc_span(c, radius, p1, p2) * radius
        else:
            ds = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
        s_acc.append(s_acc[-1] + ds)
    S = s_acc[-1]
    if S < 1e-12:
        node_n = tuple(na for _ in sol.nodes)
    else:
        node_n = tuple(na + (s / S) * (nb - na) for s in s_acc)

    return Crossing(
        joint=joint,
        body_a=ba,
        body_b=bb,
        plan_nodes=sol.nodes,
        node_n=node_n,
        eu=eu,
        ev=ev,
        en=en,
        origin=orig,
        plan_length=sol.length,
        dn=nb - na,
        arc_prox=sol.arc_prox,
        arc_dist=sol.arc_dist,
        radius=radius,
        moving_obstacle=moving,
        fixed_frame=fixed_frame,
    )


def tendon_path(frames: FingerFrames, route: TendonRoute) -> TendonPath:
    world_pts = [(b, frames.point(b, p)) for b, p in route.points]

    segments: list[PathSegment] = []
    crossings: list[Crossing] = []
    length = 0.0
    wrap_angle = 0.0

    for (ba, pa), (bb, pb) in zip(world_pts, world_pts[1:]):
        if bb == ba:
            seg = PathSegment(pa, pb, ba, bb)
            segments.append(seg)
            length += seg.length
            continue
        if bb != ba + 1:
            raise RoutingError(f"{route.name}: segment skips bones {ba}->{bb}")
        cr = _crossing(frames, route, ba, pa, ba, pb, bb)
        crossings.append(cr)
        length += cr.length
        wrap_angle += cr.arc_prox + cr.arc_dist
        # expose the lifted straight spans for consumers
        n3 = cr.nodes3d()
        body_of = {"a": cr.body_a, "b": cr.body_b, "p": frames.joints[cr.joint].prox_body, "d": frames.joints[cr.joint].dist_body}
        for (p1, t1), (p2, t2) in zip(n3, n3[1:]):
            if t1 == t2 and t1 in ("p", "d"):
                continue  # arc
            segments.append(PathSegment(p1, p2, body_of[t1], body_of[t2]))

    # kink angles where consecutive straight spans meet at a via-point
    for s1, s2 in zip(segments, segments[1:]):
        if s1.length < 1e-12 or s2.length < 1e-12:
            continue
        if float(np.linalg.norm(s1.b - s2.a)) < 1e-9:
            d = float(np.clip(s1.direction @ s2.direction, -1.0, 1.0))
            wrap_angle += math.acos(d)

    return TendonPath(route=route, segments=tuple(segments), crossings=tuple(crossings), length=length, wrap_angle=wrap_angle)


def tendon_length(finger: FingerSpec, pose: Pose, route: TendonRoute) -> float:
    return tendon_path(fk(finger, pose), route).length


def tendon_length_gradient(frames: FingerFrames, path: TendonPath) -> np.ndarray:
    """dL/dq (N_DOF,), exact for the plan + unrolled-offset path model.

    Per crossing, dL = (S/L) dS + (dn/L) d(dn). The plan length differential
    is the 2D support form: endpoint terms use the via-point velocity
    relative to the joint frame; tangent nodes on the rolling distal circle
    use its relative rigid motion; nodes on the fixed proximal circle do not
    move. The offset differential has endpoint terms only.
    """
    g = [0.0] * N_DOF
    axes = [(float(d.axis[0]), float(d.axis[1]), float(d.axis[2])) for d in frames.dofs]
    pivots = [(float(d.pivot[0]), float(d.pivot[1]), float(d.pivot[2])) for d in frames.dofs]
    bodies = [d.bodies for d in frames.dofs]

    for cr in path.crossings:
        L = cr.length
        if L < 1e-12:
            continue
        S, dn = cr.plan_length, cr.dn
        dist_body = frames.joints[cr.joint].dist_body
        ox, oy, oz = (float(cr.origin[0]), float(cr.origin[1]), float(cr.origin[2]))
        eux, euy, euz = (float(cr.eu[0]), float(cr.eu[1]), float(cr.eu[2]))
        evx, evy, evz = (float(cr.ev[0]), float(cr.ev[1]), float(cr.ev[2]))
        enx, eny, enz = (float(cr.en[0]), float(cr.en[1]), float(cr.en[2]))
        nodes = cr.plan_nodes
        nn = len(nodes)
        tags = [t for _, t in nodes]
        pts = [
            (
                ox + u * eux + v * evx + w * enx,
                oy + u * euy + v * evy + w * eny,
                oz + u * euz + v * evz + w * enz,
            )
            for ((u, v), _), w in zip(nodes, cr.node_n)
        ]
        node_body = []
        for t in tags:
            if t == "a":
                node_body.append(cr.body_a)
            elif t == "b":
                node_body.append(cr.body_b)
            elif t == "d" and cr.moving_obstacle:
                node_body.append(dist_body)
            else:
                node_body.append(None)  # fixed obstacle node: relv = 0

        for dof in range(N_DOF):
            bset = bodies[dof]
            if cr.fixed_frame:
                fbody = None
            elif cr.joint == 0:
                fbody = 1 if dof == 1 else None  # pre-MCP frame carries abduction only
            else:
                fbody = cr.joint
            frame_moves = fbody is not None and fbody in bset
            if not frame_moves and not any(b in bset for b in node_body if b is not None):
                continue
            ax, ay, az = axes[dof]
            px, py, pz = pivots[dof]
            # plan components of each node's velocity relative to the joint frame
            ru = [0.0] * nn
            rv = [0.0] * nn
            rn = [0.0] * nn
            for i in range(nn):
                body = node_body[i]
                if body is None:
                    continue
                wx = wy = wz = 0.0
                x, y, z = pts[i]
                if body in bset:
                    rx, ry, rz = x - px, y - py, z - pz
                    wx = ay * rz - az * ry
                    wy = az * rx - ax * rz
                    wz = ax * ry - ay * rx
                if frame_moves:
                    rx, ry, rz = x - px, y - py, z - pz
                    wx -= ay * rz - az * ry
                    wy -= az * rx - ax * rz
                    wz -= ax * ry - ay * rx
                if wx == 0.0 and wy == 0.0 and wz == 0.0:
                    continue
                ru[i] = wx * eux + wy * euy + wz * euz
                rv[i] = wx * evx + wy * evy + wz * evz
                rn[i] = wx * enx + wy * eny + wz * enz
            dS = 0.0
            for i in range(nn - 1):
                t1, t2 = tags[i], tags[i + 1]
                if t1 == t2 and t1 in ("p", "d"):
                    continue  # arc: rolling contact does no work on the length
                (u1, v1), (u2, v2) = nodes[i][0], nodes[i + 1][0]
                du, dv = u2 - u1, v2 - v1
                norm = math.hypot(du, dv)
                if norm < 1e-12:
                    continue
                dS += (du * (ru[i + 1] - ru[i]) + dv * (rv[i + 1] - rv[i])) / norm
            g[dof] += (S / L) * dS + (dn / L) * (rn[nn - 1] - rn[0])
    return np.array(g)


def moment_arm_matrix(finger: FingerSpec, pose: Pose, routes: Sequence[TendonRoute] | None = None) -> np.ndarray:
    """M[t][j] = -dL_t/dq_j; positive entries flex/abduct the joint."""
    if routes is None:
        routes = default_routes(finger)
    frames = fk(finger, pose)
    return np.stack([-tendon_length_gradient(frames, tendon_path(frames, r)) for r in routes])


def moment_arm_matrix_fd(finger: FingerSpec, pose: Pose, routes: Sequence[TendonRoute] | None = None, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference reference for the analytic moment arms."""
    if routes is None:
        routes = default_routes(finger)
    q0 = pose.as_array()
    out = np.zeros((len(routes), N_DOF))
    for j in range(N_DOF):
        qp, qm = q0.copy(), q0.copy()
        qp[j] += h
        qm[j] -= h
        fp, fm = fk(finger, Pose.from_array(qp)), fk(finger, Pose.from_array(qm))
        for t, r in enumerate(routes):
            lp = tendon_path(fp, r).length
            lm = tendon_path(fm, r).length
            out[t, j] = -(lp - lm) / (2.0 * h)
    return out
