"""Floating-base rigid-body kinematics and dynamics.

All quantities are evaluated in world coordinates with plain 3-vector algebra:
per-link world pose, angular velocity, and the linear velocity of the link
frame origin. Generalized-force rows pair with the velocity coordinates
(base linear force in world axes, base moment about the base point in body
axes, then joint torques).

Mass matrix: composite-rigid-body assembly. Bias and gravity: recursive
Newton-Euler. Gravity enters through the standard fictitious upward base
acceleration, so a statically held robot reports a +m*g vertical base row
(the force needed to hold it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spatial
from .model import RobotModel

GRAVITY = spatial.GRAVITY


def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


@dataclass
class FrameKin:
    position: np.ndarray
    orientation: np.ndarray   # quaternion (w, x, y, z)
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray


class Kinematics:
    """Forward kinematics cache for one (q, qd); shared by the per-tick users."""

    def __init__(self, model: RobotModel, q, qd=None):
        self.model = model
        q = model.check_q(q)
        if qd is None:
            qd = np.zeros(model.nv)
        qd = model.check_qd(qd)
        self.q = q
        self.qd = qd
        nl = len(model.topo_links)
        self.R = [None] * nl
        self.p = [None] * nl
        self.w = [None] * nl
        self.v = [None] * nl
        self.com_w = [None] * nl
        self.I_w = [None] * nl
        self.anchor = [None] * model.n_act
        self.axis_w = [None] * model.n_act
        self._fk()

    def _fk(self):
        m = self.model
        q, qd = self.q, self.qd
        if m.floating:
            R0 = spatial.quat_to_matrix(q[3:7])
            self.R[0] = R0
            self.p[0] = q[0:3].copy()
            self.w[0] = R0 @ qd[3:6]
            self.v[0] = qd[0:3].copy()
            th = q[7:]
            thd = qd[6:]
        else:
            self.R[0] = np.eye(3)
            self.p[0] = np.zeros(3)
            self.w[0] = np.zeros(3)
            self.v[0] = np.zeros(3)
            th = q
            thd = qd
        for jidx, joint in enumerate(m.act_joints):
            pi = m.joint_parent_topo[jidx]
            ci = m.joint_child_topo[jidx]
            Rp, pp = self.R[pi], self.p[pi]
            Rj = Rp @ spatial.rpy_to_matrix(joint.rpy) if np.any(joint.rpy) else Rp
            anchor = pp + Rp @ joint.origin
            axis_w = Rj @ joint.axis
            self.R[ci] = Rj @ spatial.axis_angle_matrix(joint.axis, th[jidx])
            self.p[ci] = anchor
            self.anchor[jidx] = anchor
            self.axis_w[jidx] = axis_w
            self.w[ci] = self.w[pi] + thd[jidx] * axis_w
            self.v[ci] = self.v[pi] + _cross(self.w[pi], anchor - pp)
        for i, link in enumerate(m.topo_links):
            self.com_w[i] = self.p[i] + self.R[i] @ link.com
            self.I_w[i] = self.R[i] @ link.inertia @ self.R[i].T

    # -- acceleration propagation ---------------------------------------------

    def _accels(self, qdd, gravity):
        """Per-link angular/linear (frame-origin point) accelerations."""
        m = self.model
        nl = len(m.topo_links)
        aa = [None] * nl
        al = [None] * nl
        if m.floating:
            aa[0] = self.R[0] @ qdd[3:6]
            al[0] = qdd[0:3].copy()
            thdd = qdd[6:]
        else:
            aa[0] = np.zeros(3)
            al[0] = np.zeros(3)
            thdd = qdd
        if gravity:
            al[0] = al[0] + np.array([0.0, 0.0, GRAVITY])
        thd = self.qd[6:] if m.floating else self.qd
        for jidx in range(m.n_act):
            pi = m.joint_parent_topo[jidx]
            ci = m.joint_child_topo[jidx]
            axis_w = self.axis_w[jidx]
            d = self.p[ci] - self.p[pi]
            aa[ci] = aa[pi] + thdd[jidx] * axis_w + thd[jidx] * _cross(self.w[pi], axis_w)
            al[ci] = al[pi] + _cross(aa[pi], d) + _cross(self.w[pi], _cross(self.w[pi], d))
        return aa, al

    # -- inverse dynamics -------------------------------------------------------

    def rnea(self, qdd=None, gravity=True, include_rotor=True):
        m = self.model
        if qdd is None:
            qdd = np.zeros(m.nv)
        qdd = np.asarray(qdd, dtype=float)
        if qdd.shape != (m.nv,):
            raise ValueError(f"qddot must have shape ({m.nv},)")
        aa, al = self._accels(qdd, gravity)
        nl = len(m.topo_links)
        f_net = [None] * nl
        n_net = [None] * nl
        for i, link in enumerate(m.topo_links):
            c_rel = self.com_w[i] - self.p[i]
            a_com = al[i] + _cross(aa[i], c_rel) + _cross(self.w[i], _cross(self.w[i], c_rel))
            F = link.mass * a_com
            N = self.I_w[i] @ aa[i] + _cross(self.w[i], self.I_w[i] @ self.w[i])
            f_net[i] = F
            n_net[i] = N + _cross(c_rel, F)
        for i in range(nl - 1, 0, -1):
            pi = m.parent_link_idx[i]
            f_net[pi] = f_net[pi] + f_net[i]
            n_net[pi] = n_net[pi] + n_net[i] + _cross(self.p[i] - self.p[pi], f_net[i])
        out = np.zeros(m.nv)
        off = 6 if m.floating else 0
        thdd = qdd[6:] if m.floating else qdd
        for jidx in range(m.n_act):
            ci = m.joint_child_topo[jidx]
            out[off + jidx] = self.axis_w[jidx] @ n_net[ci]
            if include_rotor:
                out[off + jidx] += m.rotor_inertia[jidx] * thdd[jidx]
        if m.floating:
            out[0:3] = f_net[0]
            out[3:6] = self.R[0].T @ n_net[0]
        return out

    # -- mass matrix -------------------------------------------------------------

    def mass_matrix(self, include_rotor=True):
        m = self.model
        nl = len(m.topo_links)
        mc = [link.mass for link in m.topo_links]
        cc = [self.com_w[i].copy() for i in range(nl)]
        Ic = [self.I_w[i].copy() for i in range(nl)]
        for i in range(nl - 1, 0, -1):
            pi = m.parent_link_idx[i]
            mt = mc[pi] + mc[i]
            ct = (mc[pi] * cc[pi] + mc[i] * cc[i]) / mt
            Ic[pi] = (Ic[pi] + _shift_inertia(mc[pi], cc[pi] - ct)
                      + Ic[i] + _shift_inertia(mc[i], cc[i] - ct))
            mc[pi] = mt
            cc[pi] = ct

        A = np.zeros((m.nv, m.nv))
        off = 6 if m.floating else 0
        R0, p0 = self.R[0], self.p[0]
        for jidx in range(m.n_act):
            ci = m.joint_child_topo[jidx]
            axis_w = self.axis_w[jidx]
            anchor = self.anchor[jidx]
            F = mc[ci] * _cross(axis_w, cc[ci] - anchor)
            N = Ic[ci] @ axis_w
            col = off + jidx
            A[col, col] = axis_w @ (N + _cross(cc[ci] - anchor, F))
            if include_rotor:
                A[col, col] += m.rotor_inertia[jidx]
            for aidx in m.ancestor_joints[m.joint_parent_topo[jidx]]:
                val = self.axis_w[aidx] @ (N + _cross(cc[ci] - self.anchor[aidx], F))
                A[off + aidx, col] = val
                A[col, off + aidx] = val
            if m.floating:
                A[0:3, col] = F
                A[col, 0:3] = F
                tb = R0.T @ (N + _cross(cc[ci] - p0, F))
                A[3:6, col] = tb
                A[col, 3:6] = tb
        if m.floating:
            mt, ct, It = mc[0], cc[0], Ic[0]
            d = ct - p0
            Sd = spatial.skew(d)
            A[0:3, 0:3] = mt * np.eye(3)
            A[3:6, 0:3] = mt * (R0.T @ Sd)
            A[0:3, 3:6] = A[3:6, 0:3].T
            A[3:6, 3:6] = R0.T @ (It + mt * (d @ d * np.eye(3) - np.outer(d, d))) @ R0
        return A

    # -- frames and jacobians ------------------------------------------------------

    def _frame(self, name):
        try:
            f = self.model.frames[name]
        except KeyError:
            raise ValueError(f"unknown frame '{name}'") from None
        li = self.model.link_order.index(f.parent_link)
        p_f = self.p[li] + self.R[li] @ f.offset
        return f, li, p_f

    def frame_kinematics(self, name):
        f, li, p_f = self._frame(name)
        Rf = self.R[li] @ spatial.rpy_to_matrix(f.rpy) if np.any(f.rpy) else self.R[li]
        lin = self.v[li] + _cross(self.w[li], p_f - self.p[li])
        return FrameKin(position=p_f, orientation=spatial.matrix_to_quat(Rf),
                        linear_velocity=lin, angular_velocity=self.w[li].copy())

    def point_jacobian(self, name):
        """6 x nv frame Jacobian; rows are linear xyz then angular xyz (world)."""
        m = self.model
        _, li, p_f = self._frame(name)
        J = np.zeros((6, m.nv))
        off = 6 if m.floating else 0
        if m.floating:
            R0, p0 = self.R[0], self.p[0]
            J[0:3, 0:3] = np.eye(3)
            J[0:3, 3:6] = -spatial.skew(p_f - p0) @ R0
            J[3:6, 3:6] = R0
        for jidx in m.ancestor_joints[li]:
            axis_w = self.axis_w[jidx]
            J[0:3, off + jidx] = _cross(axis_w, p_f - self.anchor[jidx])
            J[3:6, off + jidx] = axis_w
        return J

    def jdot_qdot(self, name):
        """d/dt(J qd) - J qdd term of the frame point, evaluated at qdd = 0."""
        _, li, p_f = self._frame(name)
        aa, al = self._accels(np.zeros(self.model.nv), gravity=False)
        r = p_f - self.p[li]
        lin = al[li] + _cross(aa[li], r) + _cross(self.w[li], _cross(self.w[li], r))
        return np.concatenate([lin, aa[li]])

    # -- diagnostics ------------------------------------------------------------

    def linear_momentum(self):
        m = self.model
        p = np.zeros(3)
        for i, link in enumerate(m.topo_links):
            v_com = self.v[i] + _cross(self.w[i], self.com_w[i] - self.p[i])
            p += link.mass * v_com
        return p

    def com(self):
        m = self.model
        c = np.zeros(3)
        for i, link in enumerate(m.topo_links):
            c += link.mass * self.com_w[i]
        return c / m.total_mass


def _shift_inertia(mass, d):
    return mass * (d @ d * np.eye(3) - np.outer(d, d))


# -- module-level operation surface ---------------------------------------------


def mass_matrix(model, q, include_rotor=True):
    """Joint-space inertia matrix, (6+n)x(6+n), SPD; actuated diagonal includes
    the reflected rotor inertia."""
    return Kinematics(model, q).mass_matrix(include_rotor=include_rotor)


def rnea(model, q, qd, qdd=None, gravity=True, include_rotor=True):
    """Inverse dynamics: generalized forces for (q, qd, qdd)."""
    return Kinematics(model, q, qd).rnea(qdd, gravity=gravity, include_rotor=include_rotor)


def bias_and_gravity(model, q, qd):
    """Coriolis/centrifugal plus gravity generalized forces, rnea(q, qd, 0)."""
    return Kinematics(model, q, qd).rnea(None, gravity=True)


def frame_kinematics(model, q, qd, frame):
    return Kinematics(model, q, qd).frame_kinematics(frame)


def point_jacobian(model, q, frame):
    return Kinematics(model, q).point_jacobian(frame)


def jdot_qdot(model, q, qd, frame):
    return Kinematics(model, q, qd).jdot_qdot(frame)
