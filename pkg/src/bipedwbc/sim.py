"""Deterministic physics world for the biped: penalty ground contact,
series-elastic joint dynamics, disturbances, terrain, and bounded-noise base
observations.

Integration is semi-implicit Euler at a fixed 1 kHz: velocities first from
the current-state dynamics, then positions with the new velocities (base
quaternion via the local exponential map). Joints are driven through their
SEA springs, tau_j = k_s (q_m - q_j), with the reflected motor coordinate
q_m integrated as a separate state per joint:

    I_rotor qm_dd = tau_motor - tau_j

Identical (initial state, command stream, seed) produce bit-identical
trajectories; all randomness is counter-based on (seed, tick).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .configio import ConfigError
from .rbd import Kinematics
from .rbd.spatial import GRAVITY

FOOT_FRAMES = ("right_foot", "left_foot")


class SimulationDivergedError(Exception):
    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


@dataclass
class ContactParams:
    k_n: float = 3e4       # normal penalty stiffness, N/m
    d_n: float = 300.0     # normal damping, N*s/m
    d_t: float = 1000.0    # tangential viscous coefficient, N*s/m
    mu: float = 0.6

    def __post_init__(self):
        if min(self.k_n, self.d_n, self.d_t, self.mu) <= 0:
            raise ValueError("contact parameters must be positive")


class Terrain:
    """Piecewise-constant heightfield. Grid cell (i, j) covers
    x in [i*cell, (i+1)*cell), y in [y0 + j*cell, y0 + (j+1)*cell) with the
    grid starting at x = 0 and centered in y. Outside the grid the height
    is 0 (flat)."""

    def __init__(self, z=None, cell=0.1):
        if z is None:
            self.z = None
            self.cell = cell
            self.nx = self.ny = 0
            self.y0 = 0.0
        else:
            self.z = np.asarray(z, dtype=float)   # shape (ny, nx)
            self.ny, self.nx = self.z.shape
            self.cell = float(cell)
            self.y0 = -0.5 * self.ny * self.cell

    def height(self, x, y):
        if self.z is None:
            return 0.0
        i = int(np.floor(x / self.cell))
        j = int(np.floor((y - self.y0) / self.cell))
        if 0 <= i < self.nx and 0 <= j < self.ny:
            return float(self.z[j, i])
        return 0.0

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            toks = fh.read().split()
        if len(toks) < 3:
            raise ConfigError(f"terrain file {path}: missing header")
        nx, ny, cell = int(toks[0]), int(toks[1]), float(toks[2])
        vals = [float(t) for t in toks[3:]]
        if len(vals) != nx * ny:
            raise ConfigError(
                f"terrain file {path}: expected {nx * ny} heights, got {len(vals)}")
        return cls(z=np.array(vals).reshape(ny, nx), cell=cell)


def contact_force(penetration, velocity, params: ContactParams):
    """Penalty contact force at a point: spring-damper normal clamped at zero,
    viscous tangential force clamped to the Coulomb disc.

    ``velocity`` is the world-frame point velocity; penetration > 0 means the
    point is below the surface. Returns the 3D world force on the foot."""
    if penetration <= 0.0:
        return np.zeros(3)
    fz = params.k_n * penetration + params.d_n * (-velocity[2])
    if fz < 0.0:
        return np.zeros(3)
    ft = -params.d_t * velocity[0:2]
    ft_norm = float(np.hypot(ft[0], ft[1]))
    cap = params.mu * fz
    if ft_norm > cap:
        ft = ft * (cap / ft_norm)
    return np.array([ft[0], ft[1], fz])


def sea_joint_controller(tau_cmd, qj_des, qjd_des, motor_pos, motor_vel,
                         kp, kd, k_s):
    """Motor PD with feedforward torque; the motor position target is offset
    by the expected spring deflection tau_cmd / k_s."""
    qm_des = qj_des + tau_cmd / k_s
    return tau_cmd + kp * (qm_des - motor_pos) + kd * (qjd_des - motor_vel)


@dataclass
class ObservationModel:
    """Bounded uniform noise on the observed base state; the per-axis errors
    never exceed the bounds (hard property). eta is a per-step landing bias
    applied to commanded footstep targets."""

    delta_pos: float = 0.0
    delta_vel: float = 0.0
    eta: float = 0.0
    seed: int = 0

    def _rng(self, stream, counter):
        bitgen = np.random.Philox(key=[int(self.seed) & (2**64 - 1), stream],
                                  counter=[0, 0, 0, int(counter)])
        return np.random.Generator(bitgen)

    def sample_state_noise(self, tick):
        rng = self._rng(0, tick)
        u = rng.random(4)
        dp = self.delta_pos * (2.0 * u[0:2] - 1.0)
        dv = self.delta_vel * (2.0 * u[2:4] - 1.0)
        return dp, dv

    def sample_eta(self, step_index):
        rng = self._rng(1, step_index)
        return self.eta * (2.0 * rng.random(2) - 1.0)


@dataclass
class _Profile:
    frame: str
    force: np.ndarray
    t0: float
    duration: float


class World:
    """Owns the simulation state; advanced by one thread, one tick at a time."""

    DT = 1e-3

    def __init__(self, model, terrain=None, contact=None, clamped=False):
        self.model = model
        for f in FOOT_FRAMES + ("base",):
            if f not in model.frames:
                raise ValueError(f"model must define frame '{f}'")
        if np.any(model.rotor_inertia <= 0):
            raise ValueError("simulation requires positive rotor inertias")
        self.terrain = terrain or Terrain()
        self.contact = contact or ContactParams()
        self.clamped = clamped
        self.t = 0.0
        self.tick = 0
        self.q = model.neutral_q()
        self.qd = np.zeros(model.nv)
        n = model.n_act
        self.motor_pos = model.joint_angles(self.q).copy()
        self.motor_vel = np.zeros(n)
        self.foot_forces = np.zeros((2, 3))
        self.profiles: list[_Profile] = []
        self.kin = Kinematics(model, self.q, self.qd)

    # -- state management -------------------------------------------------------

    def set_state(self, q, qd=None, motor_pos=None, motor_vel=None):
        m = self.model
        self.q = m.check_q(np.asarray(q, dtype=float).copy())
        self.qd = m.check_qd(np.zeros(m.nv) if qd is None
                             else np.asarray(qd, dtype=float).copy())
        self.motor_pos = (m.joint_angles(self.q).copy() if motor_pos is None
                          else np.asarray(motor_pos, dtype=float).copy())
        self.motor_vel = (np.zeros(m.n_act) if motor_vel is None
                          else np.asarray(motor_vel, dtype=float).copy())
        self.kin = Kinematics(m, self.q, self.qd)

    def snapshot(self):
        return dict(t=self.t, tick=self.tick, q=self.q.copy(), qd=self.qd.copy(),
                    motor_pos=self.motor_pos.copy(), motor_vel=self.motor_vel.copy())

    # -- contact ------------------------------------------------------------------

    def _foot_contact_forces(self):
        forces = np.zeros((2, 3))
        for i, fname in enumerate(FOOT_FRAMES):
            fk = self.kin.frame_kinematics(fname)
            pen = self.terrain.height(fk.position[0], fk.position[1]) - fk.position[2]
            forces[i] = contact_force(pen, fk.linear_velocity, self.contact)
        return forces

    def joint_spring_torques(self):
        m = self.model
        return (m.spring_k * (self.motor_pos - m.joint_angles(self.q))
                + m.spring_d * (self.motor_vel - m.joint_rates(self.qd)))

    # -- dynamics -------------------------------------------------------------------

    def step(self, motor_torques, dt=None):
        """Advance one fixed 1 kHz tick under the given motor torques."""
        if dt is not None and abs(dt - self.DT) > 1e-15:
            raise ValueError("the physics step is fixed at dt = 1e-3 s")
        m = self.model
        motor_torques = np.asarray(motor_torques, dtype=float)
        if motor_torques.shape != (m.n_act,):
            raise ValueError(f"motor torque vector must have shape ({m.n_act},)")
        if self.clamped:
            self.t += self.DT
            self.tick += 1
            return

        last = self.snapshot()
        kin = self.kin
        A = kin.mass_matrix(include_rotor=False)
        h = kin.rnea(include_rotor=False)

        tau_j = self.joint_spring_torques()
        gen = -h
        off = 6 if m.floating else 0
        gen[off:] += tau_j

        forces = self._foot_contact_forces()
        for i, fname in enumerate(FOOT_FRAMES):
            if np.any(forces[i]):
                J = kin.point_jacobian(fname)
                gen += J[0:3, :].T @ forces[i]
        for prof in self.profiles:
            if prof.t0 <= self.t < prof.t0 + prof.duration:
                J = kin.point_jacobian(prof.frame)
                gen += J[0:3, :].T @ prof.force

        qdd = np.linalg.solve(A, gen)
        mdd = (motor_torques - tau_j) / m.rotor_inertia

        # velocity from the current-state dynamics, position with the average
        # velocity: constant-acceleration trajectories (free fall) stay exact
        qd_new = self.qd + self.DT * qdd
        self.q = m.integrate_q(self.q, self.DT * 0.5 * (self.qd + qd_new))
        self.qd = qd_new
        mv_new = self.motor_vel + self.DT * mdd
        self.motor_pos = self.motor_pos + self.DT * 0.5 * (self.motor_vel + mv_new)
        self.motor_vel = mv_new
        self.t += self.DT
        self.tick += 1
        self.foot_forces = forces

        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qd))
                and np.all(np.isfinite(self.motor_pos))):
            raise SimulationDivergedError(
                f"simulation diverged at t = {last['t']:.3f} s", last_state=last)
        self.kin = Kinematics(m, self.q, self.qd)

    # -- disturbances -----------------------------------------------------------------

    def inject_impulse(self, impulse, frame="base"):
        """Instantaneous momentum change: qd += A^-1 J' imp (exact)."""
        imp = np.asarray(impulse, dtype=float)
        A = self.kin.mass_matrix(include_rotor=False)
        J = self.kin.point_jacobian(frame)
        self.qd = self.qd + np.linalg.solve(A, J[0:3, :].T @ imp)
        self.kin = Kinematics(self.model, self.q, self.qd)

    def inject_force_profile(self, force, duration, t0=None, frame="base"):
        self.profiles.append(_Profile(frame=frame,
                                      force=np.asarray(force, dtype=float),
                                      t0=self.t if t0 is None else t0,
                                      duration=duration))

    def inject_terrain(self, terrain: Terrain):
        self.terrain = terrain

    # -- observation ---------------------------------------------------------------------

    def observe(self, obs: ObservationModel):
        """Estimated base position and velocity: truth plus bounded noise on
        the horizontal components, deterministic per (seed, tick)."""
        fk = self.kin.frame_kinematics("base")
        pos = fk.position.copy()
        vel = fk.linear_velocity.copy()
        if obs.delta_pos > 0 or obs.delta_vel > 0:
            dp, dv = obs.sample_state_noise(self.tick)
            pos[0:2] += dp
            vel[0:2] += dv
        return pos, vel
