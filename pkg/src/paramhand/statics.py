"""Quasi-static tendon equilibrium and passive-behavior probes.

Each tendon terminates in a grounded series spring (or a near-rigid link),
so a finger pose costs elastic energy wherever tendon path lengths deviate
from their zero-pose values.  Equilibrium is found by minimizing

    E(q) = sum_t 1/2 k_t s_t(q)^2 + barrier(q) - W_ext(q)

where the spring stretch s_t folds in pretension and actuator take-up:

    s_t(q) = pretension_t / k_t + (L_t(q) - L_t(0)) + takeup_t

clamped at zero (tendons cannot push).  Friction enters as a hysteresis
model frozen over each quasi-static step: capstan attenuation e^(mu_t*beta)
per tendon scales the finger-side tension up or down depending on which way
the tendon slid during the previous step.  Within a step the energy is
smooth, so the solver sees a consistent gradient; the loop area of a
load/unload sweep comes from the step-to-step factor updates, not from
non-smooth terms.  The joint-surface coefficient mu_j only enters the
rolling-contact slip check (`check_joint_stability`), not the energy.

Units: mm, N, N·mm, radians internally (degrees only at reporting edges).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Tuple

import numpy as np
from scipy.optimize import lsq_linear

from . import kinematics as K
from .handspec import FingerSpec, JointSpec, PulleyPlacement

__all__ = [
    "RIGID",
    "SpringConfig",
    "FrictionParams",
    "PointLoad",
    "PlaneContact",
    "EquilibriumResult",
    "StiffnessProfile",
    "StabilityReport",
    "EquilibriumError",
    "hold_pretension",
    "solve_equilibrium",
    "stiffness_probe",
    "profile_csv",
    "blocked_force",
    "check_joint_stability",
]

RIGID = math.inf  # sentinel stiffness for rigid links
_RIGID_K = 1000.0  # N/mm actually used for the sentinel
_BARRIER_K = 1.0e4  # N·mm/rad^2, one-sided quadratic beyond a hard stop
# Blend widths for the C^2 one-sided springs.  Wide enough that equilibria
# resting lightly on a stop / contact (violation ~ force/stiffness, often
# 1e-6..1e-4) sit in smoothly-varying curvature instead of a microscopic
# boundary layer that wrecks finite-difference Hessians; the in-band
# displacement offset (< width) is invisible at probe scale.
_BARRIER_W = 1e-2  # rad, cubic blend width (keeps the energy C^2 at the stop)
_SLACK_W = 1e-2  # mm, blend width at the spring slack point
_CONTACT_W = 5e-2  # mm, blend width at contact onset
_CAPSTAN_PRESLIDE_MM = 0.1  # slide distance that fully sets or reverses a wrap

# Printed ligament straps flex the joint back toward neutral.  Small next to
# any tendon-spring joint stiffness (~26 N·mm/rad at k=0.32), but it is what
# lets a released finger rest straight instead of drifting through the
# all-tendons-slack region.  Off by default; posture-holding sweeps opt in.
LIGAMENT_FLEXURE = 2.0  # N·mm/rad per dof
_DISLOCATION_RAD = math.radians(5.0)  # limit violation treated as dislocation
PROBE_STIFFNESS = 100.0  # N/mm, displacement-probe penalty
GRAD_TOL = 1e-8  # N·mm

# extreme-slip operating point for the ligament stability check
SLIP_ALLOWANCE_MM = 0.8
LIGAMENT_SEPARATION_MM = 0.8


class EquilibriumError(RuntimeError):
    pass


# ────────────────────────────── configuration ──────────────────────────────


@dataclass(frozen=True)
class SpringConfig:
    """Grounded series spring per tendon: stiffness N/mm, pretension N.

    stiffness may be math.inf (rigid link); takeup is actuator-side string
    draw in mm, positive tightening.
    """

    stiffness: Mapping[str, float]
    pretension: Mapping[str, float]
    takeup: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, k in self.stiffness.items():
            if not (k > 0.0):
                raise ValueError(f"spring stiffness for {name!r} must be > 0")
        for name, p in self.pretension.items():
            if p < 0.0:
                raise ValueError(f"pretension for {name!r} must be >= 0")

    def k_eff(self, name: str) -> float:
        k = self.stiffness[name]
        return _RIGID_K if math.isinf(k) else k

    def s0(self, name: str) -> float:
        return self.pretension.get(name, 0.0) / self.k_eff(name)

    def with_takeup(self, takeup: Mapping[str, float]) -> "SpringConfig":
        return SpringConfig(self.stiffness, self.pretension, dict(takeup))

    @staticmethod
    def uniform(names: Sequence[str], k: float, pretension: float = 0.5) -> "SpringConfig":
        return SpringConfig({n: k for n in names}, {n: pretension for n in names})

    @staticmethod
    def two_tier(names: Sequence[str], minor: float, major: float,
                 pretension: float = 0.5) -> "SpringConfig":
        """minor on abductor/adductor, major on flexors/extensor/opposition."""
        ks = {n: (minor if n in ("abductor", "adductor") else major) for n in names}
        return SpringConfig(ks, {n: pretension for n in names})

    @staticmethod
    def passive_low(names: Sequence[str]) -> "SpringConfig":
        return SpringConfig.two_tier(names, 0.11, 0.32)

    @staticmethod
    def passive_high(names: Sequence[str]) -> "SpringConfig":
        return SpringConfig.two_tier(names, 0.32, 0.87)


@dataclass(frozen=True)
class FrictionParams:
    mu_t: float = 0.05  # capstan coefficient per accumulated wrap
    mu_j: float = 0.1  # joint Coulomb coefficient

    def __post_init__(self):
        if self.mu_t < 0.0 or self.mu_j < 0.0:
            raise ValueError("friction coefficients must be >= 0")

    @staticmethod
    def zero() -> "FrictionParams":
        return FrictionParams(0.0, 0.0)


# ─────────────────────────────── external loads ───────────────────────────────


@dataclass(frozen=True)
class PointLoad:
    """Constant world-frame force on a bone-fixed material point."""

    bone: int
    local: tuple  # mm, bone frame
    force: tuple  # N, world frame


@dataclass(frozen=True)
class PlaneContact:
    """Unilateral penalty plane acting on a bone-fixed point.

    The point is held on the +normal side of the plane through `origin`;
    penetration is resisted with `stiffness` N/mm.
    """

    bone: int
    local: tuple
    origin: tuple  # world, mm
    normal: tuple  # world, unit
    stiffness: float = PROBE_STIFFNESS


_External = PointLoad | PlaneContact


def _external_list(external) -> tuple:
    if external is None:
        return ()
    if isinstance(external, (PointLoad, PlaneContact)):
        return (external,)
    return tuple(external)


# ─────────────────────────────── results ───────────────────────────────


@dataclass(frozen=True)
class EquilibriumResult:
    pose: K.Pose
    tensions: Mapping[str, float]  # finger-side, N
    residual: float  # ||dE/dq||, N·mm
    energy: float  # N·mm
    contact_forces: tuple  # N, one entry per PlaneContact
    converged: bool
    dislocated: bool
    trace: tuple = ()  # accepted-iterate energies


@dataclass(frozen=True)
class StiffnessProfile:
    """Displacement-controlled probe sweep (loading then unloading)."""

    loading: tuple  # ((displacement mm, force N), ...)
    unloading: tuple
    mean_stiffness: float  # final force / final displacement, N/mm
    rise_slope: float  # least-squares fit over the first 5 mm
    plateau_slope: float  # fit over the last 25 mm
    converged: bool = True


@dataclass(frozen=True)
class StabilityReport:
    joint: str
    stable: bool
    stable_interval_deg: tuple | None  # longest stable (lo, hi), degrees
    margin_N: float  # minimum ligament tension margin over angles x tensions
    angles_deg: tuple = ()
    margins_N: tuple = ()  # worst-tension margin at each sampled angle


# ─────────────────────────── friction step state ───────────────────────────


@dataclass
class _FrictionState:
    """Per-step frozen hysteresis terms (see module docstring)."""

    factor: dict  # tendon -> finger-side tension multiplier
    exponent: dict  # tendon -> wrap direction state in [-1, 1] (fraction of full capstan)

    @staticmethod
    def fresh(names: Sequence[str]) -> "_FrictionState":
        return _FrictionState({n: 1.0 for n in names}, {n: 0.0 for n in names})


def _advance_friction(
    state: _FrictionState,
    finger: FingerSpec,
    routes: Sequence[K.TendonRoute],
    friction: FrictionParams,
    res: EquilibriumResult,
    lengths_prev: Mapping[str, float],
) -> tuple[_FrictionState, dict]:
    """Refreeze capstan factors from the step just solved."""
    frames = K.fk(finger, res.pose)
    factor: dict = {}
    lengths: dict = {}
    exponent: dict = {}
    for route in routes:
        path = K.tendon_path(frames, route)
        lengths[route.name] = path.length
        dL = path.length - lengths_prev.get(route.name, path.length)
        # Path lengthening: finger side hauls string in against the wraps.
        # The wrap direction is a pre-sliding state that accumulates with
        # slide distance and saturates, rather than a hard sign flip — a flip
        # swings the tension enough to reverse next station's slide, and the
        # sweep limit-cycles.
        x = state.exponent.get(route.name, 0.0) + dL / _CAPSTAN_PRESLIDE_MM
        x = max(-1.0, min(1.0, x))
        exponent[route.name] = x
        factor[route.name] = math.exp(friction.mu_t * path.wrap_angle * x)
    return _FrictionState(factor, exponent), lengths


# ─────────────────────────────── energy model ───────────────────────────────


def _hinge(v: float, k: float, w: float) -> Tuple[float, float]:
    """One-sided linear spring f = k·v, blended C² over [0, w].

    Returns (energy, force).  Exact beyond w; inside the blend the force is
    the cubic with matching value and slope at w and zero slope at 0, so
    minima sitting right on the engagement point stay twice differentiable.
    """
    if v <= 0.0:
        return 0.0, 0.0
    if v < w:
        t = v / w
        t2 = t * t
        return k * w * w * t2 * (2.0 * t / 3.0 - 0.25 * t2), k * w * t2 * (2.0 - t)
    return 0.5 * k * v * v - k * w * w / 12.0, k * v


def _barrier(v: float) -> Tuple[float, float]:
    """Energy and restoring force of a hard stop violated by v (rad)."""
    return _hinge(v, _BARRIER_K, _BARRIER_W)


def hold_pretension(
    finger: FingerSpec,
    springs: SpringConfig,
    pose: K.Pose,
    routes: Sequence[K.TendonRoute] | None = None,
    target: float = 0.5,
    floor: float = 0.05,
    limits: K.JointLimits | None = None,
    flexure: float = 0.0,
) -> SpringConfig:
    """Pretensions that (approximately) hold the finger at `pose`.

    Bounded least squares on joint torques: tendon torques must cancel the
    ligament flexure at `pose`, every tendon stays at least `floor` N taut,
    and pretensions are drawn weakly toward `target` N.  Exact balance may
    be geometrically impossible (e.g. a straight finger with these moment
    arms), so the finger settles near, not on, the requested pose; hard
    stops pick up any leftover torque.
    """
    routes = tuple(routes if routes is not None else K.default_routes(finger))
    M = K.moment_arm_matrix(finger, pose, routes)  # (nt, ndof), + flexes
    q = pose.as_array()
    nt = len(routes)

    rows, rhs = [], []
    for j in range(K.N_DOF):
        rows.append(M[:, j])
        rhs.append(flexure * q[j])
    lam = 0.01  # weak pull toward the target pretension
    rows.extend(lam * np.eye(nt))
    rhs.extend([lam * target] * nt)

    res = lsq_linear(np.array(rows), np.array(rhs),
                     bounds=(floor, max(4.0 * target, 2.0)))
    pre = {r.name: float(p) for r, p in zip(routes, res.x)}
    return SpringConfig(dict(springs.stiffness), pre, dict(springs.takeup))


def _reference_lengths(finger: FingerSpec, routes: Sequence[K.TendonRoute]) -> dict:
    frames = K.fk(finger, K.Pose())
    return {r.name: K.tendon_path(frames, r).length for r in routes}


def _energy(
    q: np.ndarray,
    finger: FingerSpec,
    routes: Sequence[K.TendonRoute],
    springs: SpringConfig,
    ext: tuple,
    limits: K.JointLimits,
    state: _FrictionState,
    L_ref: Mapping[str, float],
    force_mode: Mapping[str, float],
    flexure: float = 0.0,
):
    """Total energy, gradient, and reporting extras at one pose."""
    pose = K.Pose.from_array(q)
    frames = K.fk(finger, pose)
    E = 0.0
    g = np.zeros(K.N_DOF)
    tensions: dict = {}
    lengths: dict = {}

    for route in routes:
        path = K.tendon_path(frames, route)
        dL = K.tendon_length_gradient(frames, path)
        lengths[route.name] = path.length
        fac = state.factor.get(route.name, 1.0)
        if route.name in force_mode:
            T = force_mode[route.name] * fac
            E += T * (path.length - L_ref[route.name])
            g += T * dL
            tensions[route.name] = T
            continue
        k = springs.k_eff(route.name)
        s = (
            springs.s0(route.name)
            + (path.length - L_ref[route.name])
            + springs.takeup.get(route.name, 0.0)
        )
        e, f = _hinge(s, k, _SLACK_W)
        E += fac * e
        if f != 0.0:
            g += fac * f * dL
        tensions[route.name] = fac * f

    # one-sided barrier beyond the hard stops (cubic-blended so curvature
    # is continuous right at the stop, where rest equilibria tend to sit)
    lo, hi = limits.bounds(q)
    for i in range(K.N_DOF):
        e, f = _barrier(lo[i] - q[i])
        E += e
        g[i] -= f
        e, f = _barrier(q[i] - hi[i])
        E += e
        g[i] += f
    # the abduction bounds track flexion inside (0, pi/2)
    if 0.0 < q[0] < math.pi / 2.0:
        dlo = (limits.mcp_abd_flexed[0] - limits.mcp_abd_extended[0]) / (math.pi / 2.0)
        dhi = (limits.mcp_abd_flexed[1] - limits.mcp_abd_extended[1]) / (math.pi / 2.0)
        g[0] += _barrier(lo[1] - q[1])[1] * dlo
        g[0] -= _barrier(q[1] - hi[1])[1] * dhi

    # ligament flexure toward joint neutral
    if flexure:
        E += 0.5 * flexure * float(q @ q)
        g += flexure * q

    contact = []
    for item in ext:
        p = frames.point(item.bone, item.local)
        J = frames.point_jacobian(item.bone, p)
        if isinstance(item, PointLoad):
            f = np.asarray(item.force, dtype=float)
            E -= float(f @ p)
            g -= J @ f
        else:
            n = np.asarray(item.normal, dtype=float)
            pen = float((np.asarray(item.origin) - p) @ n)
            e, f = _hinge(pen, item.stiffness, _CONTACT_W)
            E += e
            if f != 0.0:
                g -= f * (J @ n)
            contact.append(f)

    return E, g, tensions, tuple(contact), lengths


# ─────────────────────────────── solver ───────────────────────────────


def solve_equilibrium(
    finger: FingerSpec,
    springs: SpringConfig,
    friction: FrictionParams | None = None,
    external=None,
    q0: K.Pose | None = None,
    *,
    limits: K.JointLimits | None = None,
    routes: Sequence[K.TendonRoute] | None = None,
    tol: float = GRAD_TOL,
    max_iter: int = 500,
    free: Sequence[bool] | None = None,
    flexure: float = 0.0,
    _state: _FrictionState | None = None,
    _L_ref: Mapping[str, float] | None = None,
    _force_mode: Mapping[str, float] | None = None,
    _hot: dict | None = None,
) -> EquilibriumResult:
    """Minimize the tendon-spring energy from q0; report the stationary pose.

    `free` masks which dofs may move (default all).  Pretension is defined
    at q0: stretch references default to the q0 path lengths (sweeps pass a
    shared reference instead).  Friction enters through the per-step frozen
    state; a bare call is a single step with unit capstan factors.
    """
    friction = friction or FrictionParams()
    limits = limits or K.JointLimits()
    routes = tuple(routes if routes is not None else K.default_routes(finger))
    missing = [r.name for r in routes if r.name not in springs.stiffness]
    force_mode = dict(_force_mode or {})
    missing = [n for n in missing if n not in force_mode]
    if missing:
        raise ValueError(f"spring config missing tendons: {missing}")
    state = _state or _FrictionState.fresh([r.name for r in routes])
    pose0 = q0 if q0 is not None else K.Pose()
    if _L_ref is not None:
        L_ref = dict(_L_ref)
    else:
        frames0 = K.fk(finger, pose0)
        L_ref = {r.name: K.tendon_path(frames0, r).length for r in routes}
    q_start = pose0.as_array().astype(float)
    mask = np.array([True] * K.N_DOF if free is None else list(free), dtype=bool)
    q_fix = q_start.copy()

    def assemble(x: np.ndarray) -> np.ndarray:
        q = q_fix.copy()
        q[mask] = x
        return q

    last_good = [q_start[mask].copy()]

    def fun(x: np.ndarray):
        try:
            E, g, *_ = _energy(
                assemble(x), finger, routes, springs, ext, limits, state, L_ref,
                force_mode, flexure,
            )
        except K.RoutingError:
            # pathological line-search probe: steer back toward the last good point
            d = x - last_good[0]
            return 1e9 * (1.0 + float(d @ d)), 2e9 * d
        last_good[0] = x.copy()
        return E, g[mask]

    ext = _external_list(external)

    # Damped Newton with a step cap: quasi-statics must settle in the local
    # basin, so long line-search hops (which can escape into remote all-slack
    # valleys) are off the table.
    x = q_start[mask].copy()
    trace: list = []
    h = 1e-7
    lam = 1e-6
    step_cap = 0.2  # rad
    n = x.size
    # an infeasible start has no usable gradient; callers fall back to a
    # feasible warm pose rather than letting the steering penalty mask it
    _energy(assemble(x), finger, routes, springs, ext, limits, state, L_ref,
            force_mode, flexure)
    E0, g0 = fun(x)
    trace.append(E0)

    def fd_hessian(xc: np.ndarray) -> np.ndarray:
        H = np.empty((n, n))
        for j in range(n):
            dx = np.zeros(n)
            dx[j] = h
            H[:, j] = (fun(xc + dx)[1] - fun(xc - dx)[1]) / (2.0 * h)
        return 0.5 * (H + H.T)

    # warm curvature carried between sweep stations (same mask, nearby pose)
    H: np.ndarray | None = None
    if _hot is not None:
        Hw = _hot.get("H")
        if Hw is not None and Hw.shape == (n, n):
            H = Hw
    fresh = False
    for _ in range(max_iter):
        if np.linalg.norm(g0) <= tol:
            break
        if H is None:
            H = fd_hessian(x)
            fresh = True
        try:
            step = np.linalg.solve(H + lam * np.eye(n), -g0)
        except np.linalg.LinAlgError:
            step = -g0 / max(lam, 1.0)
        if not np.all(np.isfinite(step)):
            step = -g0 / max(lam, 1.0)
        norm = np.linalg.norm(step)
        if norm > step_cap:
            step *= step_cap / norm
        # Backtrack along the Newton direction rather than re-damping: when the
        # minimum sits near a tendon-engagement crease the full step overshoots,
        # but the direction stays good and lam stays small for the next station.
        accepted = False
        alpha = 1.0
        for _ in range(7):
            E1, g1 = fun(x + alpha * step)
            better = E1 < E0 - 1e-15 * max(1.0, abs(E0)) or (
                E1 <= E0 + 1e-12 * max(1.0, abs(E0))
                and np.linalg.norm(g1) < np.linalg.norm(g0)
            )
            if better:
                accepted = True
                break
            alpha *= 0.5
        if accepted:
            slow = np.linalg.norm(g1) > 0.5 * np.linalg.norm(g0)
            x = x + alpha * step
            E0, g0 = E1, g1
            trace.append(E0)
            if alpha == 1.0:
                lam = max(lam / 10.0, 1e-9)
                if slow and not fresh:
                    H = None  # curvature stale: rebuild next iteration
            else:
                H = None  # partial step crossed a crease: curvature changed
            fresh = False
            continue
        if not fresh:
            H = None  # rebuild at the current point and retry
            continue
        lam *= 100.0
        if lam > 1e7:
            break  # fresh curvature, heavy damping, still no step: at the floor

    if _hot is not None and H is not None:
        _hot["H"] = H
    q = assemble(x)
    E, g, tensions, contact, _ = _energy(
        q, finger, routes, springs, ext, limits, state, L_ref, force_mode, flexure
    )
    residual = float(np.linalg.norm(g[mask]))
    lo, hi = limits.bounds(q)
    dislocated = bool(
        np.any((lo - q)[mask] > _DISLOCATION_RAD) or np.any((q - hi)[mask] > _DISLOCATION_RAD)
    )
    return EquilibriumResult(
        pose=K.Pose.from_array(q),
        tensions=tensions,
        residual=residual,
        energy=float(E),
        contact_forces=contact,
        converged=residual <= tol,
        dislocated=dislocated,
        trace=tuple(trace),
    )


def energy_and_gradient(
    finger: FingerSpec,
    springs: SpringConfig,
    pose: K.Pose,
    external=None,
    routes: Sequence[K.TendonRoute] | None = None,
    limits: K.JointLimits | None = None,
):
    """Frictionless energy and analytic gradient at one pose (for checks)."""
    routes = tuple(routes if routes is not None else K.default_routes(finger))
    limits = limits or K.JointLimits()
    state = _FrictionState.fresh([r.name for r in routes])
    L_ref = _reference_lengths(finger, routes)
    E, g, *_ = _energy(
        pose.as_array(), finger, routes, springs, _external_list(external),
        limits, state, L_ref, {},
    )
    return E, g


# ─────────────────────────────── stiffness probe ───────────────────────────────


def _lsq_slope(samples: Sequence[tuple]) -> float:
    pts = np.asarray(samples, dtype=float)
    if len(pts) < 2:
        return float("nan")
    d, f = pts[:, 0], pts[:, 1]
    return float(np.polyfit(d, f, 1)[0])


def stiffness_probe(
    finger: FingerSpec,
    springs: SpringConfig,
    friction: FrictionParams | None = None,
    probe_point: tuple = (3, (0.0, 22.0, 0.0)),
    axis: Sequence[float] = (1.0, 0.0, 0.0),
    max_disp: float = 40.0,
    step: float = 0.5,
    q0: K.Pose | None = None,
    routes: Sequence[K.TendonRoute] | None = None,
    rest_free: Sequence[bool] | None = None,
    flexure: float = 0.0,
) -> StiffnessProfile:
    """Push a plane into `probe_point` along `axis`, then retract it.

    The plane advances `step` mm at a time to `max_disp`, recording the
    penalty reaction at each equilibrium; the same stations are revisited on
    the way back for the unloading branch.
    """
    if step <= 0.0:
        raise ValueError("step must be > 0")
    friction = friction or FrictionParams()
    routes = tuple(routes if routes is not None else K.default_routes(finger))
    names = [r.name for r in routes]
    ref_frames = K.fk(finger, q0 if q0 is not None else K.Pose())
    L_ref = {r.name: K.tendon_path(ref_frames, r).length for r in routes}
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)

    hot: dict = {}
    rest = solve_equilibrium(
        finger, springs, friction, None, q0,
        routes=routes, free=rest_free, _L_ref=L_ref, _hot=hot, flexure=flexure,
    )
    bone, local = probe_point
    origin0 = K.fk(finger, rest.pose).point(bone, local)

    state = _FrictionState.fresh(names)
    lengths = {
        r.name: K.tendon_path(K.fk(finger, rest.pose), r).length for r in routes
    }

    n_steps = int(round(max_disp / step))
    stations = [i * step for i in range(1, n_steps + 1)]
    q_arr = rest.pose.as_array()
    q_prev = q_arr.copy()  # secant warm start: stations shift the pose smoothly
    ok = True
    loading: list = []
    for d in stations:
        contact = PlaneContact(bone, local, tuple(origin0 + d * axis), tuple(axis))
        guess = K.Pose.from_array(2.0 * q_arr - q_prev)
        try:
            res = solve_equilibrium(
                finger, springs, friction, contact, guess,
                routes=routes, free=rest_free, _state=state, _L_ref=L_ref, _hot=hot, flexure=flexure,
            )
        except K.RoutingError:  # extrapolated guess left the feasible region
            res = solve_equilibrium(
                finger, springs, friction, contact, K.Pose.from_array(q_arr),
                routes=routes, free=rest_free, _state=state, _L_ref=L_ref, _hot=hot, flexure=flexure,
            )
        ok = ok and res.converged
        loading.append((d, res.contact_forces[0]))
        state, lengths = _advance_friction(state, finger, routes, friction, res, lengths)
        q_prev, q_arr = q_arr, res.pose.as_array()
    q_prev = q_arr.copy()  # direction reverses at the turnaround
    unloading: list = []
    for d in reversed(stations):
        contact = PlaneContact(bone, local, tuple(origin0 + d * axis), tuple(axis))
        guess = K.Pose.from_array(2.0 * q_arr - q_prev)
        try:
            res = solve_equilibrium(
                finger, springs, friction, contact, guess,
                routes=routes, free=rest_free, _state=state, _L_ref=L_ref, _hot=hot, flexure=flexure,
            )
        except K.RoutingError:
            res = solve_equilibrium(
                finger, springs, friction, contact, K.Pose.from_array(q_arr),
                routes=routes, free=rest_free, _state=state, _L_ref=L_ref, _hot=hot, flexure=flexure,
            )
        ok = ok and res.converged
        unloading.append((d, res.contact_forces[0]))
        state, lengths = _advance_friction(state, finger, routes, friction, res, lengths)
        q_prev, q_arr = q_arr, res.pose.as_array()

    d_end, f_end = loading[-1]
    rise = _lsq_slope([p for p in loading if p[0] <= 5.0 + 1e-9])
    plateau = _lsq_slope([p for p in loading if p[0] >= max_disp - 25.0 - 1e-9])
    return StiffnessProfile(
        loading=tuple(loading),
        unloading=tuple(unloading),
        mean_stiffness=f_end / d_end,
        rise_slope=rise,
        plateau_slope=plateau,
        converged=ok,
    )


def profile_csv(profile: StiffnessProfile) -> str:
    lines = ["displacement_mm,force_N,branch"]
    for d, f in profile.loading:
        lines.append(f"{d:.6g},{f:.6g},load")
    for d, f in profile.unloading:
        lines.append(f"{d:.6g},{f:.6g},unload")
    return "\n".join(lines) + "\n"


# ─────────────────────────────── blocked force ───────────────────────────────


def blocked_force(
    finger: FingerSpec,
    springs: SpringConfig,
    friction: FrictionParams | None = None,
    block_point: tuple = (3, (0.0, 22.0, 0.0)),
    tendon_loads: Sequence[float] = (),
    q0: K.Pose | None = None,
    *,
    drive: str = "flexor_distal",
    clearance: float = 10.0,
    routes: Sequence[K.TendonRoute] | None = None,
    free: Sequence[bool] | None = None,
    flexure: float = 0.0,
) -> tuple:
    """Blocked-force curve: (tendon load N, contact normal force N) pairs.

    The block is a rigid plane `clearance` mm ahead of the rest position of
    `block_point` along its direction of travel under the driven tendon; the
    finger must curl to it first, so low loads report zero force.
    """
    loads = list(tendon_loads)
    if any(b < a for a, b in zip(loads, loads[1:])):
        raise ValueError("tendon loads must be non-decreasing")
    friction = friction or FrictionParams()
    routes = tuple(routes if routes is not None else K.default_routes(finger))
    names = [r.name for r in routes]
    ref_frames = K.fk(finger, q0 if q0 is not None else K.Pose())
    L_ref = {r.name: K.tendon_path(ref_frames, r).length for r in routes}
    bone, local = block_point

    hot: dict = {}
    rest = solve_equilibrium(
        finger, springs, friction, None, q0,
        routes=routes, free=free, _L_ref=L_ref, _force_mode={drive: 0.0},
        _hot=hot, flexure=flexure,
    )
    p_rest = K.fk(finger, rest.pose).point(bone, local)
    probe = solve_equilibrium(
        finger, springs, friction, None, rest.pose,
        routes=routes, free=free, _L_ref=L_ref, _force_mode={drive: 1.0},
        _hot=hot, flexure=flexure,
    )
    d = K.fk(finger, probe.pose).point(bone, local) - p_rest
    if np.linalg.norm(d) < 1e-9:
        raise EquilibriumError("block point does not move under the driven tendon")
    d = d / np.linalg.norm(d)
    plane = PlaneContact(bone, local, tuple(p_rest + clearance * d), tuple(-d))

    state = _FrictionState.fresh(names)
    lengths = {
        r.name: K.tendon_path(K.fk(finger, rest.pose), r).length for r in routes
    }
    q_arr = rest.pose.as_array()
    q_prev = q_arr.copy()
    curve = []
    for load in loads:
        guess = K.Pose.from_array(2.0 * q_arr - q_prev)
        try:
            res = solve_equilibrium(
                finger, springs, friction, plane, guess,
                routes=routes, free=free, _state=state, _L_ref=L_ref,
                _force_mode={drive: load}, _hot=hot, flexure=flexure,
            )
        except K.RoutingError:
            res = solve_equilibrium(
                finger, springs, friction, plane, K.Pose.from_array(q_arr),
                routes=routes, free=free, _state=state, _L_ref=L_ref,
                _force_mode={drive: load}, _hot=hot, flexure=flexure,
            )
        curve.append((load, res.contact_forces[0]))
        state, lengths = _advance_friction(state, finger, routes, friction, res, lengths)
        q_prev, q_arr = q_arr, res.pose.as_array()
    return tuple(curve)


# ─────────────────────────────── joint stability ───────────────────────────────


def _slip_margin_dir(
    radius: float,
    l_1: float,
    l_2: float,
    theta: float,
    mu_j: float,
    slip_mm: float,
    separation_mm: float,
    guide_height: float,
) -> float:
    """Per-unit-tension relocation margin at the extreme slip position.

    The distal bone is displaced to the worst pose the single ligament
    allows: the contact has migrated `slip_mm` of arc toward the tendon side
    without any body rotation, and the bones are parted by the ligament
    length along the contact normal.  The taut tendon chord is re-solved
    there; its component along the slip tangent drives further escape while
    its press onto the seat resists it through friction.  Positive margin
    means the tendon force relocates the bone (ligament stays load-bearing).
    """
    R = radius
    alpha = theta / 2.0 + slip_mm / R
    mx, my = math.sin(alpha), math.cos(alpha)
    tx, ty = math.cos(alpha), -math.sin(alpha)
    dx, dy = (2.0 * R + separation_mm) * mx, (2.0 * R + separation_mm) * my
    c, s = math.cos(theta), math.sin(theta)
    a = (guide_height, -(R + l_2))
    b = (
        dx + c * guide_height + s * (R + l_1),
        dy - s * guide_height + c * (R + l_1),
    )
    try:
        sol = K._solve_wrap_2d(a, b, (0.0, 0.0), (dx, dy), R, "stability")
    except K.RoutingError:
        return -1.0
    tags = [tag for _, tag in sol.nodes]
    pts = [p for p, _ in sol.nodes]
    i = tags.index("d") if "d" in tags else tags.index("b")
    ux, uy = pts[i - 1][0] - pts[i][0], pts[i - 1][1] - pts[i][1]
    norm = math.hypot(ux, uy)
    ux, uy = ux / norm, uy / norm
    press = -(ux * mx + uy * my)
    drive = ux * tx + uy * ty
    if press <= 0.0:
        return press - max(drive, 0.0)  # force pulls the joint apart
    return mu_j * press - drive


_JOINT_RANGES_DEG = {"mcp": (-83.0, 110.0), "pip": (3.0, 101.0), "dip": (-9.0, 108.0)}


def check_joint_stability(
    joint: JointSpec,
    placement: PulleyPlacement,
    tension_range: tuple = (1.0, 10.0),
    flexion_range: tuple | None = None,
    friction: FrictionParams | None = None,
    *,
    slip_mm: float = SLIP_ALLOWANCE_MM,
    separation_mm: float = LIGAMENT_SEPARATION_MM,
    step_deg: float = 1.0,
) -> StabilityReport:
    """Ligament-relocation check over sampled flexion angles (degrees in/out)."""
    t_lo, t_hi = tension_range
    if t_lo < 0.0 or t_hi < t_lo:
        raise ValueError("tension_range must satisfy 0 <= lo <= hi")
    friction = friction or FrictionParams()
    lo_deg, hi_deg = flexion_range or _JOINT_RANGES_DEG[joint.kind]
    n = max(2, int(round((hi_deg - lo_deg) / step_deg)) + 1)
    angles = np.linspace(lo_deg, hi_deg, n)
    R = joint.diameter / 2.0
    guide_height = R + K.GUIDE_STANDOFF_MM

    margins = []
    for ang in angles:
        dirm = _slip_margin_dir(
            R, placement.l_1, placement.l_2, math.radians(ang),
            friction.mu_j, slip_mm, separation_mm, guide_height,
        )
        # worst tension in range: low tension if restoring, high if escaping
        margins.append(min(t_lo * dirm, t_hi * dirm))
    margins = np.array(margins)

    stable_mask = margins > 0.0
    best: tuple | None = None
    i = 0
    while i < n:
        if stable_mask[i]:
            j = i
            while j + 1 < n and stable_mask[j + 1]:
                j += 1
            if best is None or (angles[j] - angles[i]) > (best[1] - best[0]):
                best = (float(angles[i]), float(angles[j]))
            i = j + 1
        else:
            i += 1
    return StabilityReport(
        joint=joint.kind,
        stable=bool(stable_mask.all()) and bool(margins.min() > 0.0),
        stable_interval_deg=best,
        margin_N=float(margins.min()),
        angles_deg=tuple(float(a) for a in angles),
        margins_N=tuple(float(m) for m in margins),
    )
