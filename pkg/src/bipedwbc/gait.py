"""Walking state machine, swing-foot trajectories, and the contact-weight
schedule.

Phase cycle (one step = 0.37 s nominal):

    double_stance (0.01 s)
        -> transition_<foot> (0.03 s, unloading: reaction weights ramp up,
           contact-acceleration weights ramp down, normal-force cap ramps to 0)
        -> swing_<foot> (0.33 s, ended early by contact)
        -> double_stance (landing ramp: the just-landed foot's weights ramp
           back to stance values, cap ramps up, and the KinWBC joint-command
           blend ratio falls 1 -> 0)
        -> transition_<other foot> -> ...

Scheduled weights are continuous across every boundary. Swing trajectories:
first half a clamped cubic B-spline from lift-off to the default target with
an apex control point and zero end velocities; at mid-swing the landing
target is (re)planned and the second half is a per-axis minimum-jerk move to
it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DOUBLE_STANCE = "double_stance"
TRANSITION_LEFT = "transition_left"
TRANSITION_RIGHT = "transition_right"
SWING_LEFT = "swing_left"
SWING_RIGHT = "swing_right"

_OTHER = {"left": "right", "right": "left"}


@dataclass
class PhaseDurations:
    double_stance: float = 0.01
    transition: float = 0.03
    swing: float = 0.33

    def of(self, tag):
        if tag == DOUBLE_STANCE:
            return self.double_stance
        if tag in (TRANSITION_LEFT, TRANSITION_RIGHT):
            return self.transition
        return self.swing

    @property
    def cycle(self):
        return self.double_stance + self.transition + self.swing


@dataclass
class GaitPhase:
    tag: str
    clock: float
    durations: PhaseDurations
    landing_foot: str = None      # set during the double stance after a touchdown

    @property
    def duration(self):
        return self.durations.of(self.tag)

    @property
    def progress(self):
        d = self.duration
        return min(self.clock / d, 1.0) if d > 0 else 1.0

    @property
    def swing_foot(self):
        if self.tag == SWING_LEFT or self.tag == TRANSITION_LEFT:
            return "left"
        if self.tag == SWING_RIGHT or self.tag == TRANSITION_RIGHT:
            return "right"
        return None

    @property
    def in_swing(self):
        return self.tag in (SWING_LEFT, SWING_RIGHT)


class GaitStateMachine:
    """Single-owner walking phase automaton (advanced by the control loop)."""

    def __init__(self, durations=None, first_swing="right",
                 require_contact_to_land=False):
        if first_swing not in ("left", "right"):
            raise ValueError("first_swing must be 'left' or 'right'")
        self.durations = durations or PhaseDurations()
        self.phase = GaitPhase(DOUBLE_STANCE, 0.0, self.durations)
        self.next_swing = first_swing
        self.require_contact_to_land = require_contact_to_land
        self.events = []
        self.ignored_contacts = 0
        self.steps_completed = 0
        self.time = 0.0

    # -- transitions -----------------------------------------------------------

    def _enter(self, tag, reason, landing_foot=None):
        self.events.append((self.time, self.phase.tag, tag, reason))
        self.phase = GaitPhase(tag, 0.0, self.durations, landing_foot=landing_foot)

    def _next_after(self, tag):
        if tag == DOUBLE_STANCE:
            foot = self.next_swing
            # the landing ramp of the just-landed foot continues through the
            # following transition; carry the marker over
            return (TRANSITION_LEFT if foot == "left" else TRANSITION_RIGHT), None
        if tag in (TRANSITION_LEFT, TRANSITION_RIGHT):
            foot = "left" if tag == TRANSITION_LEFT else "right"
            return (SWING_LEFT if foot == "left" else SWING_RIGHT), None
        # swing timeout: land nominally
        foot = "left" if tag == SWING_LEFT else "right"
        return DOUBLE_STANCE, foot

    def _finish_swing(self, foot, reason):
        self.steps_completed += 1
        self.next_swing = _OTHER[foot]
        self._enter(DOUBLE_STANCE, reason, landing_foot=foot)

    def advance(self, dt, contact_right=False, contact_left=False):
        """Advance the phase clock by dt, honoring contact events.

        A contact event for the swinging foot ends the swing immediately; a
        contact event for a foot already in stance is ignored (counted)."""
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.time += dt
        contacts = {"right": contact_right, "left": contact_left}

        ph = self.phase
        if ph.in_swing:
            foot = ph.swing_foot
            if contacts[foot]:
                self._finish_swing(foot, "contact")
                self.phase.clock = 0.0
                return self.phase
            if contacts[_OTHER[foot]]:
                self.ignored_contacts += 1
        elif contact_right or contact_left:
            self.ignored_contacts += 1

        remaining = dt
        while remaining > 0:
            ph = self.phase
            room = ph.duration - ph.clock
            if remaining < room - 1e-12:
                ph.clock += remaining
                break
            if ph.in_swing and self.require_contact_to_land:
                ph.clock = ph.duration   # hold: extended swing awaits contact
                break
            ph.clock = ph.duration
            remaining -= room
            nxt, landing = self._next_after(ph.tag)
            if landing is not None:
                self._finish_swing(landing, "timeout")
            else:
                carry = ph.landing_foot if (ph.tag == DOUBLE_STANCE
                                            and nxt in (TRANSITION_LEFT,
                                                        TRANSITION_RIGHT)) else None
                self._enter(nxt, "timeout", landing_foot=carry)
        return self.phase


# -- schedule ------------------------------------------------------------------

W_R_STANCE = np.array([1.0, 1.0, 0.01])
W_R_SWING = np.array([5.0, 5.0, 0.5])
W_C_STANCE = 1e3
W_C_SWING = 1e-3
W_QDD = 100.0


@dataclass
class ScheduleValues:
    w_contact: np.ndarray       # (6,) right xyz, left xyz
    w_reaction: np.ndarray      # (6,)
    w_qdd: float
    f_max_z: tuple              # (right, left)
    blend: float                # landed-leg joint-command interpolation ratio
    in_contact: tuple           # (right, left)


def _foot_slice(foot):
    return slice(0, 3) if foot == "right" else slice(3, 6)


def _apply_landing_ramp(phase, w_r, w_c, f_max, f_max_nominal):
    """The just-landed foot ramps from swing back to stance values across the
    double stance and the following (other-foot) transition; returns the
    joint-command blend ratio for that leg (1 -> 0 over the same window)."""
    foot = phase.landing_foot
    total = phase.durations.double_stance + phase.durations.transition
    into = phase.clock if phase.tag == DOUBLE_STANCE else \
        phase.durations.double_stance + phase.clock
    s = min(into / total, 1.0)
    sl = _foot_slice(foot)
    w_r[sl] = W_R_SWING + s * (W_R_STANCE - W_R_SWING)
    w_c[sl] = W_C_SWING + s * (W_C_STANCE - W_C_SWING)
    f_max[0 if foot == "right" else 1] = s * f_max_nominal
    return 1.0 - s


def schedule(phase: GaitPhase, f_max_nominal=150.0):
    """Table-driven weights/caps for the current phase, linear in the phase
    clock during ramps."""
    w_c = W_C_STANCE * np.ones(6)
    w_r = np.concatenate([W_R_STANCE, W_R_STANCE])
    f_max = [f_max_nominal, f_max_nominal]
    blend = 0.0
    in_contact = [True, True]
    s = phase.progress

    if phase.tag == DOUBLE_STANCE:
        if phase.landing_foot is not None:
            blend = _apply_landing_ramp(phase, w_r, w_c, f_max, f_max_nominal)
    elif phase.tag in (TRANSITION_LEFT, TRANSITION_RIGHT):
        foot = phase.swing_foot
        sl = _foot_slice(foot)
        w_r[sl] = W_R_STANCE + s * (W_R_SWING - W_R_STANCE)
        w_c[sl] = W_C_STANCE + s * (W_C_SWING - W_C_STANCE)
        f_max[0 if foot == "right" else 1] = (1.0 - s) * f_max_nominal
        if phase.landing_foot is not None and phase.landing_foot != foot:
            blend = _apply_landing_ramp(phase, w_r, w_c, f_max, f_max_nominal)
    else:  # swing
        foot = phase.swing_foot
        sl = _foot_slice(foot)
        w_r[sl] = W_R_SWING
        w_c[sl] = W_C_SWING
        f_max[0 if foot == "right" else 1] = 0.0
        in_contact[0 if foot == "right" else 1] = False

    return ScheduleValues(w_contact=w_c, w_reaction=w_r, w_qdd=W_QDD,
                          f_max_z=tuple(f_max), blend=blend,
                          in_contact=tuple(in_contact))


# -- minimum-jerk segment ---------------------------------------------------------


def min_jerk(p0, v0, a0, p1, T, t):
    """Quintic from (p0, v0, a0) to (p1, 0, 0) over T, evaluated at t.

    This is the jerk-optimal quintic for those boundary conditions; returns
    (pos, vel, acc). Inputs may be scalars or arrays (per-axis).
    """
    if T <= 0:
        raise ValueError("duration must be positive")
    if t < 0 or t > T:
        raise ValueError("t outside [0, T]")
    p0 = np.asarray(p0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    a0 = np.asarray(a0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    T2, T3 = T * T, T * T * T
    # x(t) = p0 + v0 t + a0 t^2/2 + c3 t^3 + c4 t^4 + c5 t^5, with pos p1 and
    # zero vel/acc at T

    A = np.array([
        [T3, T2 * T2, T2 * T3],
        [3 * T2, 4 * T3, 5 * T2 * T2],
        [6 * T, 12 * T2, 20 * T3],
    ])
    rhs = np.stack([
        p1 - (p0 + v0 * T + 0.5 * a0 * T2),
        -(v0 + a0 * T),
        -a0 * np.ones_like(a0),
    ])
    coef = np.linalg.solve(A, rhs.reshape(3, -1)).reshape((3,) + np.shape(p0))
    c3, c4, c5 = coef[0], coef[1], coef[2]
    pos = p0 + v0 * t + 0.5 * a0 * t * t + c3 * t ** 3 + c4 * t ** 4 + c5 * t ** 5
    vel = v0 + a0 * t + 3 * c3 * t ** 2 + 4 * c4 * t ** 3 + 5 * c5 * t ** 4
    acc = a0 + 6 * c3 * t + 12 * c4 * t ** 2 + 20 * c5 * t ** 3
    return pos, vel, acc


# -- clamped cubic B-spline --------------------------------------------------------


def _deboor(ctrl, knots, degree, u):
    n = len(ctrl) - 1
    hi = knots[-1]
    u = min(max(u, knots[0]), hi)
    if u >= hi:
        k = n
    else:
        k = degree
        while not (knots[k] <= u < knots[k + 1]):
            k += 1
    d = [np.asarray(ctrl[j], dtype=float) for j in range(k - degree, k + 1)]
    for r in range(1, degree + 1):
        for j in range(degree, r - 1, -1):
            i = j + k - degree
            den = knots[i + degree - r + 1] - knots[i]
            alpha = 0.0 if den == 0 else (u - knots[i]) / den
            d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j]
    return d[degree]


def _derivative_spline(ctrl, knots, degree):
    m = len(ctrl)
    dctrl = []
    for i in range(m - 1):
        den = knots[i + degree + 1] - knots[i + 1]
        scale = 0.0 if den == 0 else degree / den
        dctrl.append(scale * (np.asarray(ctrl[i + 1]) - np.asarray(ctrl[i])))
    return dctrl, knots[1:-1]


class ApexSpline:
    """Clamped cubic B-spline through lift-off and target with an apex
    control point; zero velocity at both ends."""

    KNOTS = np.array([0, 0, 0, 0, 0.5, 1, 1, 1, 1], dtype=float)

    def __init__(self, p0, p1, apex_z):
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        apex = 0.5 * (p0 + p1)
        # the curve value at the apex parameter is (c1 + 2 c2 + c3) / 4 for
        # this knot vector, so place the control point to hit apex_z exactly
        apex[2] = 2.0 * apex_z - 0.5 * (p0[2] + p1[2])
        self.ctrl = [p0, p0, apex, p1, p1]
        self.dctrl, self.dknots = _derivative_spline(self.ctrl, self.KNOTS, 3)
        self.d2ctrl, self.d2knots = _derivative_spline(self.dctrl, self.dknots, 2)

    def eval(self, u):
        pos = _deboor(self.ctrl, self.KNOTS, 3, u)
        vel = _deboor(self.dctrl, self.dknots, 2, u)
        acc = _deboor(self.d2ctrl, self.d2knots, 1, u)
        return pos, vel, acc


@dataclass
class SwingPlan:
    """One swing: B-spline to the default mid-swing target (an aerial point,
    normally apex_height above the stance plane), then minimum jerk to the
    (re)planned landing target. Replanning happens exactly once, at
    mid-swing. The horizontal axes of the landing move finish early in the
    second half so the overdriven vertical descent, which contact interrupts,
    cannot truncate them."""

    liftoff: np.ndarray
    default_target: np.ndarray
    apex_height: float
    duration: float
    descent_stretch: float = 1.0   # z-descent duration relative to the second
                                   # half; contact cuts the overdriven tail
    final_target: np.ndarray = None
    _spline: ApexSpline = field(default=None, repr=False)

    XY_FRACTION = 0.57   # share of the second half used by the horizontal move

    def __post_init__(self):
        self.liftoff = np.asarray(self.liftoff, dtype=float)
        self.default_target = np.asarray(self.default_target, dtype=float)
        if self.duration <= 0:
            raise ValueError("swing duration must be positive")
        # mid-parameter altitude halfway up the rise: the gentlest S-shaped
        # climb to the aerial default target (keeps lift-off accelerations,
        # and with them the reaction on the body, low)
        apex_z = 0.5 * (self.liftoff[2] + self.default_target[2])
        self._spline = ApexSpline(self.liftoff, self.default_target, apex_z)

    @property
    def replan_time(self):
        return 0.5 * self.duration

    def replan(self, target):
        if self.final_target is not None:
            raise ValueError("swing already replanned (replanning happens once)")
        self.final_target = np.asarray(target, dtype=float)


def swing_trajectory(plan: SwingPlan, t):
    """Foot (pos, vel, acc) at swing clock t; C1 across the mid-swing splice."""
    if t < 0 or t > plan.duration + 1e-12:
        raise ValueError("t outside the swing duration")
    half = 0.5 * plan.duration
    if t <= half:
        u = t / half
        pos, dv, da = plan._spline.eval(u)
        return pos, dv / half, da / (half * half)
    if plan.final_target is None:
        raise ValueError("landing target requested before the mid-swing replan")
    _, v_end, a_end = plan._spline.eval(1.0)
    v0 = v_end / half
    a0 = a_end / (half * half)
    tau = t - half
    t_xy = plan.XY_FRACTION * half
    pos = np.zeros(3)
    vel = np.zeros(3)
    acc = np.zeros(3)
    for ax in (0, 1):
        p, v, a = min_jerk(plan.default_target[ax], v0[ax], a0[ax],
                           plan.final_target[ax], t_xy, min(tau, t_xy))
        if tau >= t_xy:
            v, a = 0.0, 0.0
        pos[ax], vel[ax], acc[ax] = p, v, a
    t_z = plan.descent_stretch * half
    pz, vz, az = min_jerk(plan.default_target[2], v0[2], a0[2],
                          plan.final_target[2], t_z, min(tau, t_z))
    pos[2], vel[2], acc[2] = pz, vz, az
    return pos, vel, acc
