"""Prioritized kinematic whole-body controller.

Tasks are processed in priority order; each lower-priority correction is
restricted to the null space of every higher-priority task Jacobian:

    dq_i   = dq_{i-1} + pinv(J_i N_{i-1}) (x_i_des - x_i - J_i dq_{i-1})
    qd_i   = qd_{i-1} + pinv(J_i N_{i-1}) (xd_des - J_i qd_{i-1})
    qdd_i  = qdd_{i-1} + pinv(J_i N_{i-1}) (xdd_des - Jdot_i qd - J_i qdd_{i-1})
    N_i    = N_{i-1} (I - pinv(J_i N_{i-1}) J_i N_{i-1})

with unit feedback gain on the position error and an SVD pseudoinverse that
zeroes singular values below rel_tol * sigma_max.

Frame tasks select coordinates from (x, y, z, Rx, Ry, Rz) of a model frame;
orientation error is twice the vector part of the error quaternion (world
frame). Joint tasks select actuated joints directly. Setting
``zero_floating_base_columns`` removes the first six columns of the task
Jacobian so the task cannot command floating-base motion (used for the swing
foot so the stance leg stays dedicated to posture).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rbd import Kinematics, spatial

COORD_ROWS = {"x": 0, "y": 1, "z": 2, "Rx": 3, "Ry": 4, "Rz": 5}


@dataclass
class TaskSpec:
    """One prioritized operational-space task."""

    priority: int
    frame: str = None
    coords: tuple = ()                 # subset of x y z Rx Ry Rz, frame tasks
    joints: tuple = ()                 # actuated joint indices, joint tasks
    pos_des: np.ndarray = None         # (3,) frame tasks with positional coords
    quat_des: np.ndarray = None        # (4,) frame tasks with R* coords
    vel_des: np.ndarray = None         # (6,) [lin, ang] or (len(joints),)
    acc_des: np.ndarray = None
    jpos_des: np.ndarray = None        # joint tasks
    zero_floating_base_columns: bool = False

    def __post_init__(self):
        if (self.frame is None) == (len(self.joints) == 0):
            raise ValueError("task needs a frame with coords, or a joint selection")
        if self.frame is not None:
            bad = [c for c in self.coords if c not in COORD_ROWS]
            if bad:
                raise ValueError(f"unknown task coordinates {bad}")
            if not self.coords:
                raise ValueError("frame task with empty coordinate selection")


@dataclass
class KinSolution:
    q_d: np.ndarray
    qd_d: np.ndarray
    qdd_d: np.ndarray
    dq: np.ndarray
    residuals: list = field(default_factory=list)   # per-task position residual norms

    def finite(self):
        return all(np.all(np.isfinite(v)) for v in (self.q_d, self.qd_d, self.qdd_d))


def pseudoinverse(M, rel_tol=1e-4):
    """SVD pseudoinverse; singular values below rel_tol * sigma_max become 0."""
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix contains non-finite values")
    if M.size == 0:
        return M.T.copy()
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros_like(M.T)
    inv = np.where(s > rel_tol * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    return (Vt.T * inv) @ U.T


def _task_rows(task, kin, qd_masked):
    """Jacobian rows, position error, desired vel/acc rows, Jdot*qd rows."""
    model = kin.model
    nv = model.nv
    if task.frame is not None:
        rows = [COORD_ROWS[c] for c in task.coords]
        J6 = kin.point_jacobian(task.frame)
        fk = kin.frame_kinematics(task.frame)
        err6 = np.zeros(6)
        if task.pos_des is not None:
            err6[0:3] = np.asarray(task.pos_des) - fk.position
        if task.quat_des is not None:
            err6[3:6] = spatial.quat_error_vector(np.asarray(task.quat_des), fk.orientation)
        vel6 = np.zeros(6) if task.vel_des is None else np.asarray(task.vel_des, dtype=float)
        acc6 = np.zeros(6) if task.acc_des is None else np.asarray(task.acc_des, dtype=float)
        if task.zero_floating_base_columns and model.floating:
            J6 = J6.copy()
            J6[:, 0:6] = 0.0
            # Jdot*qd of the zeroed task: base-velocity contributions removed
            jd6 = Kinematics(model, kin.q, qd_masked).jdot_qdot(task.frame)
        else:
            jd6 = kin.jdot_qdot(task.frame)
        return J6[rows, :], err6[rows], vel6[rows], acc6[rows], jd6[rows]
    # joint-selection task
    off = 6 if model.floating else 0
    idx = list(task.joints)
    J = np.zeros((len(idx), nv))
    for r, j in enumerate(idx):
        J[r, off + j] = 1.0
    jpos = model.joint_angles(kin.q)[idx]
    err = (np.zeros(len(idx)) if task.jpos_des is None
           else np.asarray(task.jpos_des, dtype=float) - jpos)
    vel = np.zeros(len(idx)) if task.vel_des is None else np.asarray(task.vel_des, dtype=float)
    acc = np.zeros(len(idx)) if task.acc_des is None else np.asarray(task.acc_des, dtype=float)
    return J, err, vel, acc, np.zeros(len(idx))


def solve_priorities(model, q, qd, tasks, rel_tol=1e-4):
    """Run the prioritized stack; returns desired position, velocity and
    acceleration in generalized coordinates."""
    if not tasks:
        raise ValueError("task list is empty")
    ranks = sorted(t.priority for t in tasks)
    if ranks != list(range(1, len(ranks) + 1)):
        raise ValueError(f"priority ranks must be contiguous from 1, got {ranks}")
    ordered = sorted(tasks, key=lambda t: t.priority)

    kin = Kinematics(model, q, qd)
    nv = model.nv
    qd_masked = qd.copy()
    if model.floating:
        qd_masked[0:6] = 0.0

    N = np.eye(nv)
    dq = np.zeros(nv)
    qd_d = np.zeros(nv)
    qdd_d = np.zeros(nv)
    rows_cache = []
    for task in ordered:
        J, err, xd, xdd, jdqd = _task_rows(task, kin, qd_masked)
        if J.shape[1] != nv:
            raise ValueError("task dimension does not match the model")
        J_pre = J @ N
        Jp_inv = pseudoinverse(J_pre, rel_tol)
        dq = dq + Jp_inv @ (err - J @ dq)
        qd_d = qd_d + Jp_inv @ (xd - J @ qd_d)
        qdd_d = qdd_d + Jp_inv @ (xdd - jdqd - J @ qdd_d)
        N = N @ (np.eye(nv) - Jp_inv @ J_pre)
        rows_cache.append((J, err))

    residuals = [float(np.linalg.norm(err - J @ dq)) for J, err in rows_cache]
    sol = KinSolution(q_d=model.integrate_q(q, dq), qd_d=qd_d, qdd_d=qdd_d,
                      dq=dq, residuals=residuals)
    if not sol.finite():
        raise ArithmeticError("kinematic solution contains non-finite values")
    return sol
