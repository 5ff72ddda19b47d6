"""Modular actuation: mixer pulleys, switching lever, passive racks, grasp pull.

One actuator drives a mixer pulley carrying one stage per connected tendon;
take-up is stage radius x rotation.  Unconnected tendons hang on passive
spring racks.  Three stock layouts:

  single     one pulley on the distal flexor of every finger
  switching  one pulley plus a lever that swaps each active tendon between
             the two members of its spring pair (state A / state B)
  double     two pulleys with disjoint tendon sets: A curls thumb+index
             (intermediate flexors, thumb ab/adductor), B mirrors `single`

Fingers equilibrate independently (statics is per finger); the pulley couples
them only through the shared rotation.  Force-driven inputs march the
rotation quasi-statically until drum torque balances the commanded input
tendon force.  The grasp model is planar: each finger works in its own
flexion plane, a thumb's plane is mirrored so its palmar normal opposes the
fingers', and the object is a circle shared by all participating planes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from . import kinematics as K
from . import statics as S
from .handspec import FingerSpec, HandSpec

__all__ = [
    "ActuationError",
    "ActuatorInput",
    "ActuationConfig",
    "GraspPull",
    "MixerPulley",
    "HUMAN_STAGE_RADII",
    "PASSIVE_MINOR",
    "PASSIVE_MAJOR",
    "SERIES_K",
    "double_pulley",
    "grasp_pull_force",
    "grasp_scenario",
    "hand_routes",
    "simulate_actuation",
    "single_pulley",
    "stage_radius",
    "switching",
    "tendon_takeup",
    "trajectory_csv",
]


class ActuationError(ValueError):
    pass


# ─────────────────────────────── constants ───────────────────────────────

HUMAN_STAGE_RADII = {"thumb": 21.0, "middle": 19.4, "index": 18.3, "ring": 18.3, "little": 16.0}
# reference MCP diameters the stage radii were sized against; other joint
# sizes scale their stage proportionally
_REF_D_MCP = {"thumb": 1.09 * 18.0, "index": 18.0, "middle": 18.9, "ring": 18.0, "little": 15.3}

PASSIVE_MINOR = 0.11  # N/mm rack for abductor/adductor
PASSIVE_MAJOR = 0.32  # N/mm rack for the remaining passive tendons
SERIES_K = 0.87  # N/mm series spring on active tendons
MU_SURFACE = 0.3  # object surface friction
PRETENSION_N = 0.5  # nominal resting tension target
REST_POSE = K.Pose.from_degrees(0.0, 0.0, 3.0, -9.0)

Key = tuple  # (finger name, tendon name)


def stage_radius(finger: FingerSpec) -> float:
    """Mixer stage radius for one finger, scaled by its MCP size."""
    base = finger.name.removesuffix("_m")
    if base not in HUMAN_STAGE_RADII:
        base = "index"
    return HUMAN_STAGE_RADII[base] * (finger.d_mcp / _REF_D_MCP[base])


# ─────────────────────────────── configuration ───────────────────────────────


@dataclass(frozen=True)
class MixerPulley:
    """One rigid pulley: stage radius per connected tendon key."""

    stages: Mapping[Key, float]
    input_radius: float | None = None  # drive drum; defaults to largest stage

    def __post_init__(self):
        for key, r in self.stages.items():
            if not (r > 0.0):
                raise ActuationError(f"stage radius for {key} must be > 0")

    @property
    def drum(self) -> float:
        if self.input_radius is not None:
            return self.input_radius
        return max(self.stages.values(), default=1.0)


@dataclass(frozen=True)
class ActuatorInput:
    """One drive command: rotation(s) or input tendon force, plus lever state."""

    phi: float | tuple | None = None  # rad; (phi_a, phi_b) for double
    force: float | None = None  # N on the input tendon
    state: str = "A"  # switching lever position

    def __post_init__(self):
        if (self.phi is None) == (self.force is None):
            raise ActuationError("give exactly one of phi or force")
        if self.state not in ("A", "B"):
            raise ActuationError(f"unknown switch state {self.state!r}")


@dataclass(frozen=True)
class ActuationConfig:
    """Normalized tendon assignment: pulleys + switch pairs + passive racks."""

    variant: str  # "single" | "switching" | "double"
    pulleys: Mapping[str, MixerPulley]  # "main" or "a"/"b"
    passive: Mapping[Key, float]  # rack stiffness for every unconnected tendon
    switch_pairs: Mapping[Key, tuple] = field(default_factory=dict)  # (k_A, k_B)
    series_k: float = SERIES_K
    pretension: float = PRETENSION_N
    mu_s: float = MU_SURFACE

    @property
    def pulley(self) -> MixerPulley:
        return self.pulleys["main"]

    @property
    def pulley_a(self) -> MixerPulley:
        return self.pulleys["a"]

    @property
    def pulley_b(self) -> MixerPulley:
        return self.pulleys["b"]

    def active_keys(self) -> tuple:
        out = []
        for p in self.pulleys.values():
            out.extend(p.stages.keys())
        return tuple(out)

    def series_stiffness(self, key: Key, state: str) -> float:
        if key in self.switch_pairs:
            k_a, k_b = self.switch_pairs[key]
            return k_a if state == "A" else k_b
        return self.series_k

    def check_assignment(self, routes: Mapping[str, Sequence[K.TendonRoute]]) -> None:
        """Every routed tendon assigned exactly once, pulley sets disjoint."""
        active = list(self.active_keys())
        if len(set(active)) != len(active):
            raise ActuationError("a tendon is connected to more than one pulley stage")
        seen = set(active)
        for key in self.passive:
            if key in seen:
                raise ActuationError(f"tendon {key} is both active and passive")
            seen.add(key)
        for fname, rts in routes.items():
            for r in rts:
                if (fname, r.name) not in seen:
                    raise ActuationError(f"tendon {(fname, r.name)} left unassigned")


# ─────────────────────────────── routing ───────────────────────────────


def _opposition_anchor(hand: HandSpec, thumb: FingerSpec) -> tuple:
    """Palmar face of the nearest non-thumb metacarpal, in the thumb frame."""
    others = [f for f in hand.fingers if not f.is_thumb]
    if not others:
        return (0.6 * thumb.w, 0.4 * thumb.l_meta, -2.0 * thumb.w)
    target = min(others, key=lambda f: abs(f.origin[2] - thumb.origin[2]))
    t_t = K.placement_transform(thumb, hand.theta_c)
    t_o = K.placement_transform(target, hand.theta_c)
    world = t_o.apply((-0.5 * target.d_mcp, 0.4 * target.l_meta, 0.0))
    return tuple(t_t.inverse().apply(world))


def hand_routes(hand: HandSpec) -> dict:
    """Default tendon routes per finger; thumbs anchor opposition on a neighbor."""
    out = {}
    for f in hand.fingers:
        if f.is_thumb:
            out[f.name] = K.default_routes(f, opposition_base=_opposition_anchor(hand, f))
        else:
            out[f.name] = K.default_routes(f)
    return out


def _rack_stiffness(tendon: str) -> float:
    return PASSIVE_MINOR if tendon in ("abductor", "adductor") else PASSIVE_MAJOR


def _passive_rest(routes: Mapping[str, Sequence[K.TendonRoute]], active) -> dict:
    out = {}
    for fname, rts in routes.items():
        for r in rts:
            key = (fname, r.name)
            if key not in active:
                out[key] = _rack_stiffness(r.name)
    return out


def single_pulley(hand: HandSpec, routes: Mapping | None = None) -> ActuationConfig:
    """One stage per finger on its distal flexor."""
    routes = routes if routes is not None else hand_routes(hand)
    stages = {(f.name, "flexor_distal"): stage_radius(f) for f in hand.fingers}
    pulley = MixerPulley(stages)
    cfg = ActuationConfig("single", {"main": pulley}, _passive_rest(routes, set(stages)))
    cfg.check_assignment(routes)
    return cfg


def switching(hand: HandSpec, routes: Mapping | None = None) -> ActuationConfig:
    """Five-stage pulley whose series springs swap between lever states.

    Active: distal flexors of thumb/middle/index/ring plus the thumb
    abductor.  State A couples the two thumb tendons and the index flexor
    rigidly; state B inverts every pair.
    """
    routes = routes if routes is not None else hand_routes(hand)
    thumb = hand.thumb.name
    order = [(thumb, "flexor_distal"), ("middle", "flexor_distal"),
             ("index", "flexor_distal"), ("ring", "flexor_distal"),
             (thumb, "abductor")]
    by_name = {f.name: f for f in hand.fingers}
    missing = [k for k in order if k[0] not in by_name]
    if missing:
        raise ActuationError(f"switching layout needs fingers {sorted({k[0] for k in missing})}")
    stages = {key: stage_radius(by_name[key[0]]) for key in order}
    rigid_in_a = {(thumb, "flexor_distal"), (thumb, "abductor"), ("index", "flexor_distal")}
    pairs = {
        key: ((S.RIGID, SERIES_K) if key in rigid_in_a else (SERIES_K, S.RIGID))
        for key in order
    }
    cfg = ActuationConfig(
        "switching", {"main": MixerPulley(stages)},
        _passive_rest(routes, set(stages)), switch_pairs=pairs,
    )
    cfg.check_assignment(routes)
    return cfg


def double_pulley(hand: HandSpec, routes: Mapping | None = None) -> ActuationConfig:
    """Pulley A: thumb+index intermediate flexors and thumb ab/adductor;
    pulley B: every distal flexor (mirror of `single`)."""
    routes = routes if routes is not None else hand_routes(hand)
    by_name = {f.name: f for f in hand.fingers}
    thumb = hand.thumb.name
    if "index" not in by_name:
        raise ActuationError("double-pulley layout needs an index finger")
    a_keys = [(thumb, "flexor_intermediate"), ("index", "flexor_intermediate"),
              (thumb, "abductor"), (thumb, "adductor")]
    a_stages = {key: stage_radius(by_name[key[0]]) for key in a_keys}
    b_stages = {(f.name, "flexor_distal"): stage_radius(f) for f in hand.fingers}
    cfg = ActuationConfig(
        "double",
        {"a": MixerPulley(a_stages), "b": MixerPulley(b_stages)},
        _passive_rest(routes, set(a_stages) | set(b_stages)),
    )
    cfg.check_assignment(routes)
    return cfg


_FACTORIES = {"single": single_pulley, "switching": switching, "double": double_pulley}


def config_for(hand: HandSpec, variant: str | None = None) -> ActuationConfig:
    """Stock config by name, or from the spec's actuation block."""
    if variant is None:
        variant = (hand.actuation or {}).get("variant", "single")
    if variant not in _FACTORIES:
        raise ActuationError(f"unknown actuation variant {variant!r}")
    return _FACTORIES[variant](hand)


# ─────────────────────────────── take-up ───────────────────────────────


def _phi_by_pulley(config: ActuationConfig, inp: ActuatorInput) -> dict:
    if inp.phi is None:
        raise ActuationError("take-up needs a rotation input")
    if config.variant == "double":
        if not (isinstance(inp.phi, tuple) and len(inp.phi) == 2):
            raise ActuationError("double-pulley input needs phi = (phi_a, phi_b)")
        return {"a": float(inp.phi[0]), "b": float(inp.phi[1])}
    if isinstance(inp.phi, tuple):
        raise ActuationError(f"{config.variant} variant has a single pulley; got a phi tuple")
    return {"main": float(inp.phi)}


def tendon_takeup(config: ActuationConfig, inp: ActuatorInput) -> dict:
    """Per-tendon actuator-side take-up, mm; zero for passive tendons."""
    phis = _phi_by_pulley(config, inp)
    out = {}
    for pname, pulley in config.pulleys.items():
        phi = phis[pname]
        for key, radius in pulley.stages.items():
            out[key] = radius * phi
    return out


# ─────────────────────────────── per-finger simulation ───────────────────────────────


_TAKEUP_SUBSTEP_MM = 0.5  # quasi-static march resolution
_PRETENSION_FLOOR = 0.1  # N; every tendon barely taut at rest


def _rest_pretension(finger: FingerSpec, routes) -> dict:
    """Assembly pretensions that park the finger exactly on its rest stops.

    Any flexion-side residual lets the finger creep off the stops into the
    extensor-isometric valley (slight hyperextension + curl) and later
    take-up then tracks that zigzag branch, so bias every leftover torque
    toward extension, where the stops absorb it: zero it on the unsupported
    dofs (mcp flexion, abduction), push it negative on pip/dip.
    """
    tau = S.LIGAMENT_FLEXURE * REST_POSE.as_array()
    M = K.moment_arm_matrix(finger, REST_POSE, routes)
    nt = len(routes)
    c = np.full(nt + 1, 1e-3)
    c[-1] = 1.0  # |mcp residual| dominates; tiny pull keeps pretension low
    A_ub = [np.append(M[:, 0], -1.0), np.append(-M[:, 0], -1.0),
            np.append(M[:, 2], 0.0), np.append(M[:, 3], 0.0)]
    b_ub = [tau[0], -tau[0], tau[2], tau[3]]
    A_eq = [np.append(M[:, 1], 0.0)]
    res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                  A_eq=np.array(A_eq), b_eq=[0.0],
                  bounds=[(_PRETENSION_FLOOR, 2.0)] * nt + [(0.0, None)])
    if not res.success:  # pragma: no cover - routes always admit a bias
        return {r.name: _PRETENSION_FLOOR for r in routes}
    return {r.name: float(p) for r, p in zip(routes, res.x[:nt])}


@dataclass
class _FingerSim:
    """Mutable quasi-static state of one finger along a schedule."""

    finger: FingerSpec
    routes: tuple
    stiffness: dict  # tendon -> k (state-resolved)
    pretension: dict
    L_ref: dict
    friction: S.FrictionParams
    state: object
    lengths: dict
    hot: dict
    q: K.Pose
    takeup_now: dict = field(default_factory=dict)
    last: S.EquilibriumResult | None = None

    def _solve(self, takeup: Mapping[str, float], external=None) -> S.EquilibriumResult:
        springs = S.SpringConfig(self.stiffness, self.pretension, dict(takeup))
        res = S.solve_equilibrium(
            self.finger, springs, self.friction, external, self.q,
            routes=self.routes, flexure=S.LIGAMENT_FLEXURE,
            _state=self.state, _L_ref=self.L_ref, _hot=self.hot,
        )
        self.last = res
        self.state, self.lengths = S._advance_friction(
            self.state, self.finger, self.routes, self.friction, res, self.lengths)
        self.q = res.pose
        return res

    def march(self, takeup: Mapping[str, float], external=None) -> S.EquilibriumResult:
        """Walk take-up to the target in small substeps.

        Large jumps let the damped solver hop across the ridge into a
        slack hyperextended zigzag; short substeps keep the pose on the
        continuous quasi-static branch.
        """
        prev = self.takeup_now
        names = set(prev) | set(takeup)
        dmax = max((abs(takeup.get(n, 0.0) - prev.get(n, 0.0)) for n in names), default=0.0)
        n_sub = max(1, math.ceil(dmax / _TAKEUP_SUBSTEP_MM))
        for k in range(1, n_sub + 1):
            frac = k / n_sub
            mid = {n: prev.get(n, 0.0) + frac * (takeup.get(n, 0.0) - prev.get(n, 0.0))
                   for n in names}
            self._solve(mid, external)
        self.takeup_now = {n: float(takeup.get(n, 0.0)) for n in names}
        return self.last

    def actuator_tension(self, tendon: str) -> float:
        """Drum-side tension: finger-side divided by the capstan factor."""
        t = self.last.tensions.get(tendon, 0.0)
        f = self.state.factor.get(tendon, 1.0)
        return t / max(f, 1e-9)


def _make_sims(hand, routes, config, state, friction) -> dict:
    sims = {}
    for f in hand.fingers:
        rts = tuple(routes[f.name])
        names = [r.name for r in rts]
        stiff = {}
        for r in rts:
            key = (f.name, r.name)
            if key in config.passive:
                stiff[r.name] = config.passive[key]
            else:
                stiff[r.name] = config.series_stiffness(key, state)
        frames = K.fk(f, REST_POSE)
        L_ref = {r.name: K.tendon_path(frames, r).length for r in rts}
        sim = _FingerSim(
            finger=f, routes=rts, stiffness=stiff,
            pretension=_rest_pretension(f, rts), L_ref=L_ref, friction=friction,
            state=S._FrictionState.fresh(names), lengths=dict(L_ref),
            hot={}, q=REST_POSE,
        )
        sim.march({})  # settle to the true zero-take-up equilibrium
        sims[f.name] = sim
    return sims


def _takeup_for(sim_name: str, takeups: Mapping[Key, float]) -> dict:
    return {t: v for (f, t), v in takeups.items() if f == sim_name}


def simulate_actuation(
    hand: HandSpec,
    routes: Mapping | None,
    config: ActuationConfig,
    schedule: Sequence[ActuatorInput],
    friction: S.FrictionParams | None = None,
) -> list:
    """Run a take-up schedule; returns one {finger: EquilibriumResult} per step."""
    routes = routes if routes is not None else hand_routes(hand)
    config.check_assignment(routes)
    friction = friction or S.FrictionParams()
    steps = list(schedule)
    state = steps[0].state if steps else "A"
    for s in steps:
        if s.state != state:
            raise ActuationError("lever state must not change inside one schedule")
    sims = _make_sims(hand, routes, config, state, friction)
    trajectory = []
    for i, inp in enumerate(steps):
        try:
            if inp.force is not None:
                _balance_force(sims, config, inp, contacts=None)
                row = {name: sim.last for name, sim in sims.items()}
            else:
                takeups = tendon_takeup(config, inp)
                row = {name: sim.march(_takeup_for(name, takeups))
                       for name, sim in sims.items()}
        except (S.EquilibriumError, K.RoutingError) as err:
            raise S.EquilibriumError(f"schedule step {i}: {err}") from err
        trajectory.append(row)
    return trajectory


def trajectory_csv(trajectory: Sequence[Mapping[str, S.EquilibriumResult]]) -> str:
    """step, finger, joint angles (deg), tendon tensions (N)."""
    tendons = ["flexor_distal", "flexor_intermediate", "extensor",
               "abductor", "adductor", "opposition"]
    lines = ["step,finger,mcp_flex_deg,mcp_abd_deg,pip_deg,dip_deg," + ",".join(t + "_N" for t in tendons)]
    for i, row in enumerate(trajectory):
        for fname, res in row.items():
            q = np.degrees(res.pose.as_array())
            vals = [f"{v:.6f}" for v in q]
            for t in tendons:
                vals.append(f"{res.tensions[t]:.6f}" if t in res.tensions else "")
            lines.append(f"{i},{fname}," + ",".join(vals))
    return "\n".join(lines) + "\n"


# ─────────────────────────────── force-driven drive ───────────────────────────────

_PHI_STEP = 0.1  # rad, quasi-static march increment
_PHI_MAX = 8.0  # rad, give-up bound


def _drive_phis(config: ActuationConfig, inp: ActuatorInput, phi: float) -> ActuatorInput:
    if config.variant == "double":
        which = getattr(inp, "pulley", "b")
        pair = (phi, 0.0) if which == "a" else (0.0, phi)
        return ActuatorInput(phi=pair, state=inp.state)
    return ActuatorInput(phi=phi, state=inp.state)


def _driven_pulley(config: ActuationConfig, inp: ActuatorInput) -> MixerPulley:
    if config.variant == "double":
        return config.pulleys[getattr(inp, "pulley", "b")]
    return config.pulley


def _solve_all(sims, config, inp, phi, contacts) -> float:
    """March every finger to rotation phi; returns drum torque of the driven pulley."""
    takeups = tendon_takeup(config, _drive_phis(config, inp, phi))
    pulley = _driven_pulley(config, inp)
    for name, sim in sims.items():
        external = contacts.get(name) if contacts else None
        sim.march(_takeup_for(name, takeups), external)
    torque = 0.0
    for key, radius in pulley.stages.items():
        torque += radius * sims[key[0]].actuator_tension(key[1])
    return torque


def _balance_force(sims, config, inp, contacts) -> float:
    """March phi until drum torque balances the commanded input force."""
    pulley = _driven_pulley(config, inp)
    target = inp.force * pulley.drum
    g_lo = _solve_all(sims, config, inp, 0.0, contacts)
    if g_lo >= target:
        return 0.0
    phi = 0.0
    while phi < _PHI_MAX:
        phi = min(phi + _PHI_STEP, _PHI_MAX)
        g = _solve_all(sims, config, inp, phi, contacts)
        if g >= target:
            # linear cut inside the bracketing step
            frac = (target - g_lo) / max(g - g_lo, 1e-12)
            phi_star = phi - _PHI_STEP + frac * _PHI_STEP
            _solve_all(sims, config, inp, phi_star, contacts)
            return phi_star
        g_lo = g
    return phi  # input force beyond what the hand can react; report the bound


# ─────────────────────────────── planar grasp model ───────────────────────────────


@dataclass(frozen=True)
class GraspPull:
    """Peak planar pull resistance of a closed grasp."""

    peak: float  # N
    engaged: bool  # did any finger ever touch the object
    curve: tuple = ()  # (displacement mm, resisting force N)

    def __float__(self) -> float:
        return self.peak


def _pad_points(finger: FingerSpec) -> list:
    """Palmar candidate contact points (bone, local) in the flexion plane."""
    radii = [d / 2.0 for d in finger.joint_diameters]
    spans = [(1, finger.l_prox, radii[0], radii[1]),
             (2, finger.l_inte, radii[1], radii[2]),
             (3, finger.l_dist, radii[2], radii[2])]
    pts = []
    for bone, length, r_a, r_b in spans:
        for frac in np.linspace(0.15, 0.9, 6):
            depth = r_a + (r_b - r_a) * frac
            pts.append((bone, (-depth, frac * length, 0.0)))
    pts.append((3, (-0.6 * radii[2], finger.l_dist - 0.3 * radii[2], 0.0)))  # tip pad
    return pts


def _deepest_contact(sim: _FingerSim, mirror: float, radius: float, center) -> tuple | None:
    """Most-penetrating pad point against the circle, or None if clear."""
    frames = K.fk(sim.finger, sim.q)
    c = np.asarray(center, dtype=float)
    best, best_pen = None, -1.0  # allow 1 mm approach band
    for bone, local in _pad_points(sim.finger):
        p = frames.point(bone, local)
        p2 = np.array([mirror * p[0], p[1]])
        pen = radius - float(np.hypot(*(p2 - c)))
        if pen > best_pen:
            best, best_pen = (bone, local, p2), pen
    if best is None or best_pen < -1.0:
        return None
    bone, local, p2 = best
    out = p2 - c
    n2 = out / max(np.linalg.norm(out), 1e-12)
    return bone, local, n2


def _contact_plane(mirror: float, radius: float, center, n2) -> S.PlaneContact:
    surf = np.asarray(center, dtype=float) + radius * n2
    origin = (mirror * surf[0], surf[1], 0.0)
    normal = (mirror * n2[0], n2[1], 0.0)
    return None, origin, normal  # bone/local filled by caller


def _update_contacts(sims, mirrors, radius, center, contacts) -> dict:
    """Re-linearize the circle as one tangent plane per touching finger."""
    out = {}
    for name, sim in sims.items():
        hit = _deepest_contact(sim, mirrors[name], radius, center)
        if hit is None:
            continue
        bone, local, n2 = hit
        _, origin, normal = _contact_plane(mirrors[name], radius, center, n2)
        out[name] = S.PlaneContact(bone, tuple(local), origin, normal)
    return out


def pull_resistance(contacts: Sequence[tuple], pull_axis, mu_s: float) -> float:
    """Sum of contact reactions resisting a planar pull.

    contacts: (normal force N, unit normal 2-vector) pairs in the shared
    grasp plane, normals pointing from the object into each finger.
    """
    p = np.asarray(pull_axis, dtype=float)
    p = p / max(np.linalg.norm(p), 1e-12)
    total = 0.0
    for force, n2 in contacts:
        if force <= 0.0:
            continue
        n = np.asarray(n2, dtype=float)
        tangential = abs(float(n[1] * p[0] - n[0] * p[1]))  # |t . p|
        total += force * (max(0.0, -float(n @ p)) + mu_s * tangential)
    return total


def grasp_scenario(hand: HandSpec, kind: str) -> dict:
    """Stock planar grasp setups, seated off the reference finger's reach."""
    by_name = {f.name: f for f in hand.fingers}
    ref = by_name.get("index") or next(f for f in hand.fingers if not f.is_thumb)
    reach = ref.l_meta + ref.mcp_to_tip()
    if kind == "pinch":
        radius = 12.0
        center = (-(radius + 14.0), 0.82 * reach)
        fingers = tuple(n for n in (hand.thumb.name, "index") if n in by_name)
    elif kind == "cylinder":
        radius = 30.0
        center = (-(radius + 14.0), 0.58 * reach)
        fingers = tuple(f.name for f in hand.fingers)
    else:
        raise ActuationError(f"unknown grasp scenario {kind!r}")
    return {"radius": radius, "center": center, "pull_axis": (-1.0, 0.0), "fingers": fingers}


_PULL_STEP = 1.0  # mm
_PULL_MAX = 40.0  # mm


def grasp_pull_force(
    hand: HandSpec,
    routes: Mapping | None,
    config: ActuationConfig,
    obj: tuple,
    inp: ActuatorInput,
    pull_axis=(-1.0, 0.0),
    fingers: Sequence[str] | None = None,
    friction: S.FrictionParams | None = None,
) -> GraspPull:
    """Close on a planar circle, then drag it; peak resisting force.

    obj is (radius mm, center (x, y)) in the shared grasp plane: x palmar
    (negative in front of the finger pads), y distal.  Thumb planes are
    mirrored in x so opposition normals oppose the fingers'.
    """
    routes = routes if routes is not None else hand_routes(hand)
    config.check_assignment(routes)
    friction = friction or S.FrictionParams()
    radius, center0 = float(obj[0]), np.asarray(obj[1], dtype=float)
    state = inp.state
    all_sims = _make_sims(hand, routes, config, state, friction)
    names = list(fingers) if fingers is not None else list(all_sims)
    sims = {n: all_sims[n] for n in names}
    mirrors = {n: (-1.0 if sims[n].finger.is_thumb else 1.0) for n in sims}

    # close onto the object (contacts re-linearized as the fingers advance)
    contacts = {}
    if inp.force is not None:
        phi = 0.0
        target = inp.force * _driven_pulley(config, inp).drum
        g = _solve_all(sims, config, inp, 0.0, contacts)
        while phi < _PHI_MAX and g < target:
            phi = min(phi + _PHI_STEP, _PHI_MAX)
            contacts = _update_contacts(sims, mirrors, radius, center0, contacts)
            g = _solve_all(sims, config, inp, phi, contacts)
    else:
        for frac in np.linspace(0.0, 1.0, 12):
            contacts = _update_contacts(sims, mirrors, radius, center0, contacts)
            if isinstance(inp.phi, tuple):
                step_inp = ActuatorInput(phi=tuple(frac * v for v in inp.phi), state=state)
            else:
                step_inp = ActuatorInput(phi=frac * inp.phi, state=state)
            takeups = tendon_takeup(config, step_inp)
            for name, sim in sims.items():
                sim.march(_takeup_for(name, takeups), contacts.get(name))

    def measure(contacts) -> float:
        pairs = []
        for name, plane in contacts.items():
            res = sims[name].last
            if res is None or not res.contact_forces:
                continue
            n2 = np.array([mirrors[name] * plane.normal[0], plane.normal[1]])
            pairs.append((res.contact_forces[0], n2))
        return pull_resistance(pairs, pull_axis, config.mu_s)

    contacts = _update_contacts(sims, mirrors, radius, center0, contacts)
    engaged = bool(contacts)
    if engaged:  # settle at the seated position before pulling
        if inp.force is not None:
            phi = _rebalance(sims, config, inp, phi, contacts)
        else:
            _solve_at(sims, config, inp, contacts)
    peak = measure(contacts) if engaged else 0.0

    axis = np.asarray(pull_axis, dtype=float)
    axis = axis / max(np.linalg.norm(axis), 1e-12)
    curve = [(0.0, peak)]
    disp, stale = 0.0, 0
    while engaged and disp < _PULL_MAX:
        disp += _PULL_STEP
        center = center0 + disp * axis
        contacts = _update_contacts(sims, mirrors, radius, center, contacts)
        if not contacts:
            break
        if inp.force is not None:
            phi = _rebalance(sims, config, inp, phi, contacts)
        else:
            _solve_at(sims, config, inp, contacts)
        resist = measure(contacts)
        curve.append((disp, resist))
        if resist > peak:
            peak, stale = resist, 0
        else:
            stale += 1
            if resist < 0.05 * peak or stale >= 8:
                break
    return GraspPull(peak=peak, engaged=engaged, curve=tuple(curve))


def _solve_at(sims, config, inp, contacts) -> None:
    takeups = tendon_takeup(config, inp)
    for name, sim in sims.items():
        sim.march(_takeup_for(name, takeups), contacts.get(name))


def _rebalance(sims, config, inp, phi, contacts, iters: int = 2) -> float:
    """Nudge phi so drum torque re-balances the held input force."""
    pulley = _driven_pulley(config, inp)
    target = inp.force * pulley.drum
    g = _solve_all(sims, config, inp, phi, contacts)
    for _ in range(iters):
        if abs(g - target) <= 0.02 * max(target, 1.0):
            break
        dphi = 0.02
        g2 = _solve_all(sims, config, inp, phi + dphi, contacts)
        slope = (g2 - g) / dphi
        if abs(slope) < 1e-9:
            break
        phi = float(np.clip(phi + (target - g2) / slope + dphi, 0.0, _PHI_MAX))
        g = _solve_all(sims, config, inp, phi, contacts)
    return phi
