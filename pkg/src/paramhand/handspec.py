"""Parametric hand description: types, validation, presets, landmark fitting.

All lengths are millimetres, all angles radians unless a name says otherwise.
Angles are converted to degrees only at file and CLI boundaries.

A hand is five (or any number of) fingers sharing one pulley/ligament/print
parameter block. Each finger contributes ten free parameters (four bone
lengths, three joint diameters, width, origin, spread angle) and the shared
block contributes six (l_p, t_p, r_p, w_lig, t_lig, theta_c).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

Vec3 = tuple[float, float, float]


class SpecError(ValueError):
    """A hand specification that cannot be interpreted at all."""


class SpecFormatError(SpecError):
    """Malformed or non-conforming JSON spec file."""


# ─────────────────────────── shared parameter blocks ───────────────────────────


@dataclass(frozen=True)
class PulleySpec:
    """Printable tendon guide dimensions, shared across the hand."""

    l_p: float = 3.0  # base length along the bone, mm
    t_p: float = 1.2  # wall thickness, mm
    r_p: float = 0.5  # internal channel radius, mm


@dataclass(frozen=True)
class LigamentSpec:
    """Flexure strap partially constraining each rolling joint."""

    w_lig: float = 4.0  # strap width across the bone, mm
    t_lig: float = 0.5  # strap thickness, mm


@dataclass(frozen=True)
class PulleyPlacement:
    """Per-bone tendon via-point offsets, measured from the joint contact.

    l_1 sits on the distal side of a joint, l_2 on the proximal side. The
    default 4:1 split routes the crossing segment nearly parallel to the
    distal bone, which keeps the rolling contact seated under tension.
    """

    l_1: float = 12.0  # distal offset, mm
    l_2: float = 3.0  # proximal offset, mm
    extensor_offset: float = 3.0  # dorsal via-point offset from each contact, mm
    lateral_offset: float = 3.0  # abductor/adductor via-point offset, mm


@dataclass(frozen=True)
class JointSpec:
    kind: str  # "mcp" | "pip" | "dip"
    diameter: float  # rolling circle diameter d, mm


# ─────────────────────────────── finger / hand ───────────────────────────────

BONE_NAMES = ("metacarpal", "proximal", "intermediate", "distal")
JOINT_NAMES = ("mcp", "pip", "dip")


@dataclass(frozen=True)
class FingerSpec:
    name: str
    l_meta: float  # metacarpal length, mm
    l_prox: float  # proximal phalanx length, mm
    l_inte: float  # intermediate phalanx length, mm
    l_dist: float  # distal phalanx length, mm
    w: float  # finger width, mm
    d_mcp: float  # joint diameters, mm
    d_pip: float
    d_dip: float
    origin: Vec3 = (0.0, 0.0, 0.0)  # metacarpal base in the palm frame, mm
    theta_f: float = 0.0  # spread about the palm normal, rad
    is_thumb: bool = False
    placement: PulleyPlacement = field(default_factory=PulleyPlacement)

    @property
    def bone_lengths(self) -> tuple[float, float, float, float]:
        return (self.l_meta, self.l_prox, self.l_inte, self.l_dist)

    @property
    def joint_diameters(self) -> tuple[float, float, float]:
        return (self.d_mcp, self.d_pip, self.d_dip)

    def joint(self, name: str) -> JointSpec:
        try:
            i = JOINT_NAMES.index(name)
        except ValueError:
            raise SpecError(f"unknown joint {name!r}") from None
        return JointSpec(kind=name, diameter=self.joint_diameters[i])

    def mcp_to_tip(self) -> float:
        """Straight length from MCP contact to fingertip at the zero pose."""
        return (
            self.d_mcp / 2.0
            + self.l_prox
            + self.d_pip
            + self.l_inte
            + self.d_dip
            + self.l_dist
        )


@dataclass(frozen=True)
class HandSpec:
    fingers: tuple[FingerSpec, ...]
    pulley: PulleySpec = field(default_factory=PulleySpec)
    ligament: LigamentSpec = field(default_factory=LigamentSpec)
    theta_c: float = 0.6  # inward curvature / print angle, rad
    actuation: dict | None = None  # raw actuation block, parsed by actuation.py

    def finger(self, name: str) -> FingerSpec:
        for f in self.fingers:
            if f.name == name:
                return f
        raise SpecError(f"no finger named {name!r}")

    @property
    def thumb(self) -> FingerSpec:
        thumbs = [f for f in self.fingers if f.is_thumb]
        if not thumbs:
            raise SpecError("hand has no thumb")
        return thumbs[0]


def count_free_parameters(hand: HandSpec) -> int:
    """Free design parameters: ten per finger plus the six shared ones."""
    per_finger = (
        len(BONE_NAMES)  # bone lengths
        + len(JOINT_NAMES)  # joint diameters
        + 1  # width
        + 1  # origin
        + 1  # spread angle
    )
    shared = 6  # l_p, t_p, r_p, w_lig, t_lig, theta_c
    return per_finger * len(hand.fingers) + shared


def min_print_angle(pulley: PulleySpec) -> float:
    """Smallest inward curvature that still lets pulleys span a print layer."""
    return math.atan2(pulley.t_p + pulley.r_p, pulley.l_p)


# ───────────────────────────── validation registry ─────────────────────────────


@dataclass(frozen=True)
class Rule:
    """One manufacturability/geometry constraint.

    check(hand, finger) returns (ok, detail). Finger is None for shared rules.
    """

    name: str
    scope: str  # "finger" | "hand"
    check: Callable[[HandSpec, FingerSpec | None], tuple[bool, str]]


def _fmt(value: float) -> str:
    return f"{value:.6g}"


def _rule_ge(name: str, lhs: Callable, rhs: Callable, scope: str = "finger") -> Rule:
    def check(hand: HandSpec, finger: FingerSpec | None) -> tuple[bool, str]:
        a, b = lhs(hand, finger), rhs(hand, finger)
        return a >= b - 1e-12, f"{_fmt(a)} >= {_fmt(b)}"

    return Rule(name, scope, check)


def _rule_range(name: str, val: Callable, lo: Callable, hi: Callable, scope: str) -> Rule:
    def check(hand: HandSpec, finger: FingerSpec | None) -> tuple[bool, str]:
        v, a, b = val(hand, finger), lo(hand, finger), hi(hand, finger)
        return a - 1e-12 <= v <= b + 1e-12, f"{_fmt(a)} <= {_fmt(v)} <= {_fmt(b)}"

    return Rule(name, scope, check)


def _min_feature(hand: HandSpec, _f) -> float:
    return 2.0 * (hand.pulley.t_p + hand.pulley.r_p)


RULES: tuple[Rule, ...] = (
    _rule_ge(
        "l_meta >= d_mcp/2 + l_p",
        lambda h, f: f.l_meta,
        lambda h, f: f.d_mcp / 2 + h.pulley.l_p,
    ),
    _rule_ge(
        "l_prox >= (d_mcp + d_pip)/2 + 2*l_p",
        lambda h, f: f.l_prox,
        lambda h, f: (f.d_mcp + f.d_pip) / 2 + 2 * h.pulley.l_p,
    ),
    _rule_ge(
        "l_inte >= (d_pip + d_dip)/2 + 2*l_p",
        lambda h, f: f.l_inte,
        lambda h, f: (f.d_pip + f.d_dip) / 2 + 2 * h.pulley.l_p,
    ),
    _rule_ge("l_dist >= d_dip", lambda h, f: f.l_dist, lambda h, f: f.d_dip),
    _rule_ge("w >= 2*(t_p + r_p)", lambda h, f: f.w, _min_feature),
    _rule_ge("d_mcp >= 2*(t_p + r_p)", lambda h, f: f.d_mcp, _min_feature),
    _rule_ge("d_pip >= 2*(t_p + r_p)", lambda h, f: f.d_pip, _min_feature),
    _rule_ge("d_dip >= 2*(t_p + r_p)", lambda h, f: f.d_dip, _min_feature),
    _rule_range(
        "theta_f in [-pi, pi]",
        lambda h, f: f.theta_f,
        lambda h, f: -math.pi,
        lambda h, f: math.pi,
        "finger",
    ),
    _rule_range(
        "w_lig in [0.4, min finger w]",
        lambda h, f: h.ligament.w_lig,
        lambda h, f: 0.4,
        lambda h, f: min(g.w for g in h.fingers),
        "hand",
    ),
    _rule_range(
        "t_lig in [0.1, 0.8]",
        lambda h, f: h.ligament.t_lig,
        lambda h, f: 0.1,
        lambda h, f: 0.8,
        "hand",
    ),
    _rule_ge("l_p >= 3", lambda h, f: h.pulley.l_p, lambda h, f: 3.0, "hand"),
    _rule_ge("t_p >= 1.2", lambda h, f: h.pulley.t_p, lambda h, f: 1.2, "hand"),
    _rule_ge("r_p >= 0.5", lambda h, f: h.pulley.r_p, lambda h, f: 0.5, "hand"),
    _rule_range(
        "theta_c in [atan((t_p+r_p)/l_p), pi/2]",
        lambda h, f: h.theta_c,
        lambda h, f: min_print_angle(h.pulley),
        lambda h, f: math.pi / 2,
        "hand",
    ),
)


@dataclass(frozen=True)
class RuleResult:
    rule: str
    subject: str  # finger name or "hand"
    ok: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    results: tuple[RuleResult, ...]

    @property
    def failures(self) -> tuple[RuleResult, ...]:
        return tuple(r for r in self.results if not r.ok)

    def summary(self) -> str:
        lines = [f"{'PASS' if r.ok else 'FAIL'}  {r.subject:<10} {r.rule}  ({r.detail})" for r in self.results]
        lines.append(f"{'OK' if self.ok else 'INVALID'}: {len(self.failures)} failed of {len(self.results)}")
        return "\n".join(lines)


def validate(hand: HandSpec) -> ValidationReport:
    """Run every registered constraint against the hand."""
    results: list[RuleResult] = []
    for rule in RULES:
        if rule.scope == "finger":
            for f in hand.fingers:
                ok, detail = rule.check(hand, f)
                results.append(RuleResult(rule.name, f.name, ok, detail))
        else:
            ok, detail = rule.check(hand, None)
            results.append(RuleResult(rule.name, "hand", ok, detail))
    return ValidationReport(ok=all(r.ok for r in results), results=tuple(results))


# ───────────────────────────────── landmarks ─────────────────────────────────


def from_landmarks(points: Sequence[Sequence[float]], scale: float = 1.0) -> tuple[float, ...]:
    """Consecutive landmark distances, scaled. Raises on coincident points.

    Landmarks run proximal to distal (base, mcp, pip, dip, tip for a full
    finger); k+1 points yield k segment lengths.
    """
    if len(points) < 2:
        raise SpecError("need at least two landmark points")
    if scale <= 0.0:
        raise SpecError("scale must be positive")
    lengths = []
    for a, b in zip(points, points[1:]):
        if len(a) != len(b):
            raise SpecError("landmark dimensionality mismatch")
        d = math.dist(a, b)
        if d == 0.0:
            raise SpecError(f"coincident landmarks {tuple(a)}")
        lengths.append(d * scale)
    return tuple(lengths)


def finger_from_landmarks(
    name: str,
    points: Sequence[Sequence[float]],
    scale: float = 1.0,
    **overrides,
) -> FingerSpec:
    """Build a finger from five landmarks (base, mcp, pip, dip, tip).

    Joint diameters and width default to fractions of the derived lengths
    unless overridden.
    """
    lengths = from_landmarks(points, scale)
    if len(lengths) != 4:
        raise SpecError("finger landmarks must be five points (four segments)")
    l_meta, l_prox, l_inte, l_dist = lengths
    defaults = dict(
        d_mcp=0.32 * l_prox,
        d_pip=0.36 * l_inte,
        d_dip=0.40 * l_dist,
        w=0.30 * l_prox,
    )
    defaults.update(overrides)
    return FingerSpec(
        name=name,
        l_meta=l_meta,
        l_prox=l_prox,
        l_inte=l_inte,
        l_dist=l_dist,
        **defaults,
    )


# ─────────────────────────────────── presets ───────────────────────────────────

# Index finger is the reference digit; thumb ratios (0.85 length sum, 1.09
# joint diameters, 1.27 width) and the narrow-digit preset ratios (1.07
# MCP-to-tip, 0.44 diameters, 0.49 width, applied to the middle finger) are
# fixed design relationships. The middle finger is scaled so its MCP-to-tip
# length is exactly 150 mm.

_INDEX = dict(l_meta=65.0, l_prox=56.0, l_inte=33.0, l_dist=22.0, w=16.0, d_mcp=18.0, d_pip=12.0, d_dip=9.0)

THUMB_LENGTH_RATIO = 0.85
THUMB_DIAMETER_RATIO = 1.09
THUMB_WIDTH_RATIO = 1.27
AYEAYE_TIP_RATIO = 1.07
AYEAYE_DIAMETER_RATIO = 0.44
AYEAYE_WIDTH_RATIO = 0.49
MAX_FINGER_LENGTH = 150.0  # mm, longest (middle) finger MCP to tip


def _human_fingers() -> tuple[FingerSpec, ...]:
    index = FingerSpec(name="index", origin=(0.0, 0.0, 20.0), theta_f=0.05, **_INDEX)

    # middle: slightly larger joints, bones chosen to hit 150 mm MCP-to-tip
    d_mcp, d_pip, d_dip = 18.9, 12.6, 9.45
    bones_total = MAX_FINGER_LENGTH - (d_mcp / 2 + d_pip + d_dip)
    l_prox = round(bones_total * 0.5046, 1)
    l_inte = round(bones_total * 0.2979, 1)
    l_dist = bones_total - l_prox - l_inte
    middle = FingerSpec(
        name="middle",
        l_meta=62.0,
        l_prox=l_prox,
        l_inte=l_inte,
        l_dist=l_dist,
        w=16.5,
        d_mcp=d_mcp,
        d_pip=d_pip,
        d_dip=d_dip,
        origin=(0.0, 2.0, 0.0),
        theta_f=0.0,
    )

    ring = FingerSpec(
        name="ring",
        l_meta=58.0,
        l_prox=54.0,
        l_inte=33.0,
        l_dist=21.5,
        w=15.5,
        d_mcp=18.0,
        d_pip=12.0,
        d_dip=9.0,
        origin=(0.0, 0.0, -20.0),
        theta_f=-0.08,
    )
    little = FingerSpec(
        name="little",
        l_meta=53.0,
        l_prox=44.0,
        l_inte=25.0,
        l_dist=19.0,
        w=14.0,
        d_mcp=15.3,
        d_pip=10.2,
        d_dip=7.65,
        origin=(0.0, -4.0, -38.0),
        theta_f=-0.15,
    )

    idx_sum = sum(index.bone_lengths)
    thumb_sum = THUMB_LENGTH_RATIO * idx_sum  # 149.6 for the defaults
    l_meta, l_prox, l_inte = 55.0, 42.0, 30.0
    thumb = FingerSpec(
        name="thumb",
        l_meta=l_meta,
        l_prox=l_prox,
        l_inte=l_inte,
        l_dist=thumb_sum - (l_meta + l_prox + l_inte),
        w=THUMB_WIDTH_RATIO * index.w,
        d_mcp=THUMB_DIAMETER_RATIO * index.d_mcp,
        d_pip=THUMB_DIAMETER_RATIO * index.d_pip,
        d_dip=THUMB_DIAMETER_RATIO * index.d_dip,
        # Printed abducted (radial of the index, slightly palmar) so the
        # one-piece print is collision free; opposition comes from actuation.
        origin=(-10.0, 5.0, 42.0),
        theta_f=0.8,
        is_thumb=True,
    )
    return (thumb, index, middle, ring, little)


def _mirror(f: FingerSpec) -> FingerSpec:
    ox, oy, oz = f.origin
    return replace(f, name=f.name + "_m", origin=(ox, oy, -oz), theta_f=-f.theta_f)


def _ayeaye_fingers(human: tuple[FingerSpec, ...]) -> tuple[FingerSpec, ...]:
    """Human hand with the middle finger swapped for a long narrow probe digit."""
    out = []
    index = next(f for f in human if f.name == "index")
    for f in human:
        if f.name != "middle":
            out.append(f)
            continue
        d_mcp = AYEAYE_DIAMETER_RATIO * index.d_mcp
        d_pip = AYEAYE_DIAMETER_RATIO * index.d_pip
        d_dip = AYEAYE_DIAMETER_RATIO * index.d_dip
        target_tip = AYEAYE_TIP_RATIO * index.mcp_to_tip()
        bones_total = target_tip - (d_mcp / 2 + d_pip + d_dip)
        k = bones_total / (f.l_prox + f.l_inte + f.l_dist)
        out.append(
            replace(
                f,
                l_meta=k * f.l_meta,
                l_prox=k * f.l_prox,
                l_inte=k * f.l_inte,
                l_dist=k * f.l_dist,
                w=AYEAYE_WIDTH_RATIO * index.w,
                d_mcp=d_mcp,
                d_pip=d_pip,
                d_dip=d_dip,
            )
        )
    return tuple(out)


PRESET_NAMES = ("human", "mirrored", "ayeaye")


def preset(name: str) -> HandSpec:
    """Built-in hand designs: human, mirrored (two thumbs), ayeaye."""
    human = _human_fingers()
    if name == "human":
        fingers = human
    elif name == "mirrored":
        by_name = {f.name: f for f in human}
        fingers = (
            by_name["thumb"],
            by_name["index"],
            by_name["middle"],
            _mirror(by_name["index"]),
            _mirror(by_name["thumb"]),
        )
    elif name == "ayeaye":
        fingers = _ayeaye_fingers(human)
    else:
        raise SpecError(f"unknown preset {name!r} (choose from {PRESET_NAMES})")
    return HandSpec(fingers=fingers)


# ─────────────────────────────── JSON spec files ───────────────────────────────

_FINGER_FIELDS = {
    "name", "is_thumb", "l_meta", "l_prox", "l_inte", "l_dist",
    "w", "d_mcp", "d_pip", "d_dip", "origin", "theta_f", "placement",
}
_PLACEMENT_FIELDS = {"l_1", "l_2", "extensor_offset", "lateral_offset"}
_HAND_FIELDS = {"fingers", "pulley", "ligament", "theta_c", "actuation"}
_PULLEY_FIELDS = {"l_p", "t_p", "r_p"}
_LIGAMENT_FIELDS = {"w_lig", "t_lig"}


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise SpecFormatError(f"unknown field(s) {unknown} in {where}")


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise SpecFormatError(f"missing field {key!r} in {where}")
    return obj[key]


def _num(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SpecFormatError(f"expected number in {where}, got {x!r}")
    return float(x)


def hand_to_dict(hand: HandSpec) -> dict:
    """JSON-ready dict; angles in degrees at this boundary."""
    return {
        "theta_c": math.degrees(hand.theta_c),
        "pulley": {"l_p": hand.pulley.l_p, "t_p": hand.pulley.t_p, "r_p": hand.pulley.r_p},
        "ligament": {"w_lig": hand.ligament.w_lig, "t_lig": hand.ligament.t_lig},
        "fingers": [
            {
                "name": f.name,
                "is_thumb": f.is_thumb,
                "l_meta": f.l_meta,
                "l_prox": f.l_prox,
                "l_inte": f.l_inte,
                "l_dist": f.l_dist,
                "w": f.w,
                "d_mcp": f.d_mcp,
                "d_pip": f.d_pip,
                "d_dip": f.d_dip,
                "origin": list(f.origin),
                "theta_f": math.degrees(f.theta_f),
                "placement": {
                    "l_1": f.placement.l_1,
                    "l_2": f.placement.l_2,
                    "extensor_offset": f.placement.extensor_offset,
                    "lateral_offset": f.placement.lateral_offset,
                },
            }
            for f in hand.fingers
        ],
        **({"actuation": hand.actuation} if hand.actuation is not None else {}),
    }


def hand_from_dict(data: dict) -> HandSpec:
    if not isinstance(data, dict):
        raise SpecFormatError("spec root must be an object")
    _reject_unknown(data, _HAND_FIELDS, "spec root")

    pulley = PulleySpec()
    if "pulley" in data:
        p = data["pulley"]
        _reject_unknown(p, _PULLEY_FIELDS, "pulley")
        pulley = PulleySpec(**{k: _num(v, f"pulley.{k}") for k, v in p.items()})

    ligament = LigamentSpec()
    if "ligament" in data:
        g = data["ligament"]
        _reject_unknown(g, _LIGAMENT_FIELDS, "ligament")
        ligament = LigamentSpec(**{k: _num(v, f"ligament.{k}") for k, v in g.items()})

    theta_c = math.radians(_num(data["theta_c"], "theta_c")) if "theta_c" in data else HandSpec.theta_c

    raw_fingers = _require(data, "fingers", "spec root")
    if not isinstance(raw_fingers, list) or not raw_fingers:
        raise SpecFormatError("fingers must be a non-empty list")
    fingers = []
    for i, rf in enumerate(raw_fingers):
        where = f"fingers[{i}]"
        if not isinstance(rf, dict):
            raise SpecFormatError(f"{where} must be an object")
        _reject_unknown(rf, _FINGER_FIELDS, where)
        placement = PulleyPlacement()
        if "placement" in rf:
            pl = rf["placement"]
            _reject_unknown(pl, _PLACEMENT_FIELDS, f"{where}.placement")
            placement = PulleyPlacement(**{k: _num(v, f"{where}.placement.{k}") for k, v in pl.items()})
        origin = rf.get("origin", [0.0, 0.0, 0.0])
        if not (isinstance(origin, list) and len(origin) == 3):
            raise SpecFormatError(f"{where}.origin must be [x, y, z]")
        fingers.append(
            FingerSpec(
                name=str(_require(rf, "name", where)),
                is_thumb=bool(rf.get("is_thumb", False)),
                l_meta=_num(_require(rf, "l_meta", where), f"{where}.l_meta"),
                l_prox=_num(_require(rf, "l_prox", where), f"{where}.l_prox"),
                l_inte=_num(_require(rf, "l_inte", where), f"{where}.l_inte"),
                l_dist=_num(_require(rf, "l_dist", where), f"{where}.l_dist"),
                w=_num(_require(rf, "w", where), f"{where}.w"),
                d_mcp=_num(_require(rf, "d_mcp", where), f"{where}.d_mcp"),
                d_pip=_num(_require(rf, "d_pip", where), f"{where}.d_pip"),
                d_dip=_num(_require(rf, "d_dip", where), f"{where}.d_dip"),
                origin=tuple(_num(v, f"{where}.origin") for v in origin),
                theta_f=math.radians(_num(rf.get("theta_f", 0.0), f"{where}.theta_f")),
                placement=placement,
            )
        )

    actuation = data.get("actuation")
    if actuation is not None and not isinstance(actuation, dict):
        raise SpecFormatError("actuation must be an object")

    return HandSpec(
        fingers=tuple(fingers),
        pulley=pulley,
        ligament=ligament,
        theta_c=theta_c,
        actuation=actuation,
    )


def save_spec(hand: HandSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(hand_to_dict(hand), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_spec(path) -> HandSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise SpecFormatError(f"invalid JSON: {e}") from e
    return hand_from_dict(data)
