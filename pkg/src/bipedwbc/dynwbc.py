"""Reduced-jerk dynamic whole-body controller.

Solves, per control tick, the QP

    min  Fr' Wr Fr + xc_dd' Wc xc_dd + d' Wqdd d
    s.t. U Fr >= 0                      (friction pyramid per contact)
         S Fr <= F_max                  (normal-force caps)
         xc_dd = Jc qdd + Jcdot qd      (contact accelerations, both feet)
         A qdd + b + g = [0; tau] + Jc' Fr
         qdd = qdd_cmd + d
         tau_min <= tau <= tau_max

over the decision vector z = (Fr, d). Contact accelerations and torques are
affine in z and eliminated; the floating-base rows of the dynamics stay as
equality constraints and the actuated rows define tau. Contacts are never
hard-constrained: both feet are always in Jc, and the schedule steers the
soft weights and force caps through contact transitions, which is what keeps
the torque commands free of switching jerk.

Force/weight vector layout is right foot (x, y, z) then left foot (x, y, z).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qp import QpInfeasibleError, QpResult, solve_dense_qp
from .rbd import Kinematics, spatial

FOOT_FRAMES = ("right_foot", "left_foot")


@dataclass
class ContactSchedule:
    """Per-foot contact flags plus the time-varying QP weights and caps."""

    in_contact: tuple = (True, True)        # (right, left)
    w_reaction: np.ndarray = None           # (6,)
    w_contact: np.ndarray = None            # (6,)
    w_qdd: np.ndarray = None                # (nv,) or scalar
    f_max_z: tuple = (150.0, 150.0)
    mu: float = 0.6

    def __post_init__(self):
        if self.w_reaction is None:
            self.w_reaction = np.array([1.0, 1.0, 0.01, 1.0, 1.0, 0.01])
        if self.w_contact is None:
            self.w_contact = 1e3 * np.ones(6)
        self.w_reaction = np.asarray(self.w_reaction, dtype=float)
        self.w_contact = np.asarray(self.w_contact, dtype=float)
        if np.any(self.w_reaction <= 0) or np.any(self.w_contact <= 0):
            raise ValueError("soft-formulation weights must be strictly positive")
        if any(f < 0 for f in self.f_max_z):
            raise ValueError("F_max_z must be non-negative")
        if self.mu <= 0:
            raise ValueError("friction coefficient must be positive")


@dataclass
class QpSolution:
    f_reaction: np.ndarray      # (6,) stacked reaction forces
    delta_qdd: np.ndarray       # (nv,) acceleration relaxation
    xc_dd: np.ndarray           # (6,) contact accelerations
    tau_cmd: np.ndarray         # (n,) actuated torques
    qdd: np.ndarray             # (nv,) resulting accelerations
    objective: float
    kkt: dict
    qp: QpResult = field(repr=False, default=None)


def friction_pyramid(mu):
    """Rows U with U F >= 0 iff Fz >= 0, |Fx| <= mu Fz / sqrt2, |Fy| <= mu Fz / sqrt2
    (inner pyramid approximation of the Coulomb cone)."""
    if mu <= 0:
        raise ValueError("friction coefficient must be positive")
    c = mu / np.sqrt(2.0)
    return np.array([
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, c],
        [1.0, 0.0, c],
        [0.0, -1.0, c],
        [0.0, 1.0, c],
    ])


def desired_acceleration(model, q_d, qd_d, qdd_d, q, qd, kp, kd):
    """qdd_cmd = qdd_d + kd (qd_d - qd) + kp (q_d - q), with the base
    orientation error as the body-frame error-quaternion vector (doubled)."""
    q_err = np.zeros(model.nv)
    if model.floating:
        q_err[0:3] = q_d[0:3] - q[0:3]
        q_err[3:6] = spatial.quat_error_vector_body(q_d[3:7], q[3:7])
        q_err[6:] = q_d[7:] - q[7:]
    else:
        q_err = q_d - q
    return qdd_d + kd * (qd_d - qd) + kp * q_err


def _contact_blocks(model, kin):
    Jc = np.vstack([kin.point_jacobian(f)[0:3, :] for f in FOOT_FRAMES])
    jcdqd = np.concatenate([kin.jdot_qdot(f)[0:3] for f in FOOT_FRAMES])
    return Jc, jcdqd


def _support_precheck(model, schedule):
    contacts = [i for i in range(2) if schedule.in_contact[i]]
    if not contacts:
        return
    cap = sum(schedule.f_max_z[i] for i in contacts)
    weight = model.total_mass * spatial.GRAVITY
    if cap < weight:
        raise QpInfeasibleError(
            f"contact force caps cannot support the robot: sum F_max_z = {cap:.1f} N "
            f"< weight {weight:.1f} N")


def build_and_solve(model, q, qd, schedule, qdd_cmd, kin=None):
    """Build and solve the soft-contact QP; returns the QpSolution.

    Raises QpInfeasibleError when the scheduled contact state cannot support
    the robot or the solver proves the constraint set empty.
    """
    _support_precheck(model, schedule)
    if kin is None:
        kin = Kinematics(model, q, qd)
    nv = model.nv
    n = model.n_act
    A = kin.mass_matrix()
    h = kin.rnea()
    Jc, jcdqd = _contact_blocks(model, kin)
    qdd_cmd = np.asarray(qdd_cmd, dtype=float)
    c0 = Jc @ qdd_cmd + jcdqd

    w_qdd = np.asarray(schedule.w_qdd if schedule.w_qdd is not None else 100.0, dtype=float)
    if w_qdd.ndim == 0:
        w_qdd = w_qdd * np.ones(nv)
    Wr = np.diag(schedule.w_reaction)
    Wc = np.diag(schedule.w_contact)

    nz = 6 + nv
    H = np.zeros((nz, nz))
    H[0:6, 0:6] = 2.0 * Wr
    H[6:, 6:] = 2.0 * (np.diag(w_qdd) + Jc.T @ Wc @ Jc)
    f = np.zeros(nz)
    f[6:] = 2.0 * (Jc.T @ (Wc @ c0))

    JcT = Jc.T
    A_eq = np.zeros((6, nz))
    A_eq[:, 0:6] = -JcT[0:6, :]
    A_eq[:, 6:] = A[0:6, :]
    b_eq = -(A[0:6, :] @ qdd_cmd + h[0:6])

    U = friction_pyramid(schedule.mu)
    rows = []
    rhs = []
    blk = np.zeros((5, nz))
    blk[:, 0:3] = -U
    rows.append(blk)
    rhs.append(np.zeros(5))
    blk = np.zeros((5, nz))
    blk[:, 3:6] = -U
    rows.append(blk)
    rhs.append(np.zeros(5))
    cap = np.zeros((2, nz))
    cap[0, 2] = 1.0
    cap[1, 5] = 1.0
    rows.append(cap)
    rhs.append(np.array(schedule.f_max_z, dtype=float))
    # torque rows: tau = M z + w
    M = np.zeros((n, nz))
    M[:, 0:6] = -JcT[6:, :]
    M[:, 6:] = A[6:, :]
    w = A[6:, :] @ qdd_cmd + h[6:]
    rows.append(M)
    rhs.append(model.tau_max - w)
    rows.append(-M)
    rhs.append(model.tau_max + w)   # tau_min = -tau_max
    A_in = np.vstack(rows)
    b_in = np.concatenate(rhs)

    result = solve_dense_qp(H, f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in)
    z = result.x
    fr = z[0:6]
    delta = z[6:]
    qdd = qdd_cmd + delta
    xc = Jc @ qdd + jcdqd
    tau = M @ z + w
    obj = float(fr @ Wr @ fr + xc @ Wc @ xc + delta @ (w_qdd * delta))
    kkt = dict(result.residuals)
    kkt["dyn_fb"] = float(np.max(np.abs(A[0:6, :] @ qdd + h[0:6] - JcT[0:6, :] @ fr)))
    return QpSolution(f_reaction=fr, delta_qdd=delta, xc_dd=xc, tau_cmd=tau,
                      qdd=qdd, objective=obj, kkt=kkt, qp=result)


def build_and_solve_hard(model, q, qd, schedule, qdd_cmd, kin=None):
    """Classical hard-constraint variant used as the jerk-comparison baseline:
    in-contact feet get xc_dd = 0 equalities, swing feet carry no reaction
    force, and weights/caps switch discretely with the contact flags."""
    if kin is None:
        kin = Kinematics(model, q, qd)
    nv = model.nv
    n = model.n_act
    A = kin.mass_matrix()
    h = kin.rnea()
    Jc, jcdqd = _contact_blocks(model, kin)
    qdd_cmd = np.asarray(qdd_cmd, dtype=float)

    w_qdd = np.asarray(schedule.w_qdd if schedule.w_qdd is not None else 100.0, dtype=float)
    if w_qdd.ndim == 0:
        w_qdd = w_qdd * np.ones(nv)
    w_static = np.array([1.0, 1.0, 0.01, 1.0, 1.0, 0.01])

    nz = 6 + nv
    H = np.zeros((nz, nz))
    H[0:6, 0:6] = 2.0 * np.diag(w_static)
    H[6:, 6:] = 2.0 * np.diag(w_qdd)
    f = np.zeros(nz)

    JcT = Jc.T
    eq_rows = [np.hstack([-JcT[0:6, :], A[0:6, :]])]
    eq_rhs = [-(A[0:6, :] @ qdd_cmd + h[0:6])]
    for i in range(2):
        sl = slice(3 * i, 3 * i + 3)
        blk = np.zeros((3, nz))
        if schedule.in_contact[i]:
            blk[:, 6:] = Jc[sl, :]
            eq_rows.append(blk)
            eq_rhs.append(-(Jc[sl, :] @ qdd_cmd + jcdqd[sl]))
        else:
            blk[:, 3 * i:3 * i + 3] = np.eye(3)
            eq_rows.append(blk)
            eq_rhs.append(np.zeros(3))
    A_eq = np.vstack(eq_rows)
    b_eq = np.concatenate(eq_rhs)

    U = friction_pyramid(schedule.mu)
    rows, rhs = [], []
    for i in range(2):
        if not schedule.in_contact[i]:
            continue
        blk = np.zeros((5, nz))
        blk[:, 3 * i:3 * i + 3] = -U
        rows.append(blk)
        rhs.append(np.zeros(5))
        cap = np.zeros((1, nz))
        cap[0, 3 * i + 2] = 1.0
        rows.append(cap)
        rhs.append(np.array([schedule.f_max_z[i]]))
    M = np.zeros((n, nz))
    M[:, 0:6] = -JcT[6:, :]
    M[:, 6:] = A[6:, :]
    w = A[6:, :] @ qdd_cmd + h[6:]
    rows.append(M)
    rhs.append(model.tau_max - w)
    rows.append(-M)
    rhs.append(model.tau_max + w)
    A_in = np.vstack(rows)
    b_in = np.concatenate(rhs)

    result = solve_dense_qp(H, f, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in)
    z = result.x
    fr = z[0:6]
    delta = z[6:]
    qdd = qdd_cmd + delta
    xc = Jc @ qdd + jcdqd
    tau = M @ z + w
    kkt = dict(result.residuals)
    return QpSolution(f_reaction=fr, delta_qdd=delta, xc_dd=xc, tau_cmd=tau,
                      qdd=qdd, objective=result.objective, kkt=kkt, qp=result)
