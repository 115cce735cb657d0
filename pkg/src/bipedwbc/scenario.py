"""Closed-loop walking scenarios: config parsing, the per-tick controller
(observe -> footstep policy at mid-swing -> prioritized kinematics -> QP ->
SEA motor commands -> physics), logging, and the planner-comparison runner.

Scenario config format (see scenarios/ for presets)::

    version 1
    mode walk                  # walk | uncertainty | compare
    model models/mercury6.model
    duration 13.0
    seed 7
    warmup 0.5
    planner {
        t_prime 0.2 0.2
        kappa 0.16 0.16
        com_height 0.8
        step_time 0.33
        max_step 0.5
        min_lateral 0.10
    }
    gains { qp_kp 100  qp_kd 20 }
    observation { delta_pos 0.0  delta_vel 0.0  eta 0.0 }
    disturbance { kind impulse  time 11.0  impulse 0 2.88 0 }
    disturbance { kind force    time 4.0   force 20 0 0  duration 0.5 }
    terrain terrains/mats.terrain
    reference { speed 0.2  waypoint 0 0  waypoint 2.4 0 }
    policy tvr                 # tvr | capture_point | raibert | atrias

Exit statuses: 0 completed, 2 fall detected, 3 infeasible QP, 4 bad config.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import gait, planner, uncertainty
from .configio import ConfigError, ConfigNode, load_config
from .dynwbc import ContactSchedule, build_and_solve, desired_acceleration
from .kinwbc import TaskSpec, solve_priorities
from .qp import QpInfeasibleError
from .rbd import load_model
from .rbd.spatial import GRAVITY
from .sim import (ContactParams, ObservationModel, SimulationDivergedError,
                  Terrain, World, sea_joint_controller)

EXIT_OK = 0
EXIT_FALL = 2
EXIT_INFEASIBLE = 3
EXIT_CONFIG = 4

CONTACT_FORCE_THRESHOLD = 5.0   # N
CONTACT_TICKS = 2
SEARCH_RATE = 0.15              # m/s downward ground-search during extended swing


@dataclass
class Disturbance:
    kind: str                   # impulse | force | terrain
    time: float
    impulse: np.ndarray = None
    force: np.ndarray = None
    duration: float = 0.0
    terrain_path: str = None


@dataclass
class ScenarioConfig:
    model_path: str
    duration: float = 10.0
    seed: int = 0
    warmup: float = 0.5
    mode: str = "walk"
    lip: planner.LipParams = None
    plan: planner.PlannerParams = None
    qp_kp: float = 100.0
    qp_kd: float = 20.0
    apex_height: float = 0.04
    swing_overdrive: float = 0.012
    swing_descent_stretch: float = 1.0
    obs: ObservationModel = None
    contact: ContactParams = None
    disturbances: list = field(default_factory=list)
    terrain_path: str = None
    reference_speed: float = 0.0
    waypoints: list = field(default_factory=list)
    policy: str = "tvr"
    policy_gains: dict = field(default_factory=dict)
    first_swing: str = "right"
    f_max_nominal: float = None     # default from the model file
    out_dir: str = None
    node: ConfigNode = field(default=None, repr=False)
    base_dir: str = "."

    @classmethod
    def from_file(cls, path, seed=None, out_dir=None):
        node = load_config(path)
        base = os.path.dirname(os.path.abspath(path))
        cfg = cls.from_node(node, base_dir=base)
        if seed is not None:
            cfg.seed = int(seed)
            cfg.obs.seed = int(seed)
        if out_dir is not None:
            cfg.out_dir = out_dir
        return cfg

    @classmethod
    def from_node(cls, node, base_dir="."):
        version = node.get_int("version", 1)
        if version != 1:
            raise ConfigError(f"unsupported scenario version {version}")
        model_path = node.get_str("model", required=True)
        model_path = os.path.join(base_dir, model_path)
        if not os.path.isfile(model_path):
            raise ConfigError(f"model file not found: {model_path}")
        duration = node.get_float("duration", 10.0)
        if duration < 0:
            raise ConfigError("duration must be non-negative")
        p = node.block("planner")
        lip = planner.LipParams(h=p.get_float("com_height", planner.DEFAULT_COM_HEIGHT),
                                T=p.get_float("step_time", planner.DEFAULT_STEP_TIME))
        plan = planner.PlannerParams(
            t_prime=tuple(p.get_vec("t_prime", 2, default=[0.2, 0.2])),
            kappa=tuple(p.get_vec("kappa", 2, default=[0.16, 0.16])),
            max_step=p.get_float("max_step", 0.5),
            min_lateral=p.get_float("min_lateral", 0.10))
        plan.check_against(lip)
        g = node.block("gains")
        o = node.block("observation")
        seed = node.get_int("seed", 0)
        obs = ObservationModel(delta_pos=o.get_float("delta_pos", 0.0),
                               delta_vel=o.get_float("delta_vel", 0.0),
                               eta=o.get_float("eta", 0.0), seed=seed)
        c = node.block("contact")
        contact = ContactParams(k_n=c.get_float("k_n", 3e4),
                                d_n=c.get_float("d_n", 300.0),
                                d_t=c.get_float("d_t", 1000.0),
                                mu=c.get_float("mu", 0.6))
        disturbances = []
        for b in node.blocks("disturbance"):
            kind = b.get_str("kind", required=True)
            if kind == "impulse":
                disturbances.append(Disturbance(kind=kind,
                                                time=b.get_float("time", required=True),
                                                impulse=np.array(b.get_vec("impulse", 3, required=True))))
            elif kind == "force":
                disturbances.append(Disturbance(kind=kind,
                                                time=b.get_float("time", required=True),
                                                force=np.array(b.get_vec("force", 3, required=True)),
                                                duration=b.get_float("duration", required=True)))
            elif kind == "terrain":
                tp = os.path.join(base_dir, b.get_str("file", required=True))
                if not os.path.isfile(tp):
                    raise ConfigError(f"terrain file not found: {tp}")
                disturbances.append(Disturbance(kind=kind, time=b.get_float("time", 0.0),
                                                terrain_path=tp))
            else:
                raise ConfigError(f"unknown disturbance kind '{kind}'")
        terrain_path = node.get_str("terrain", None)
        if terrain_path is not None:
            terrain_path = os.path.join(base_dir, terrain_path)
            if not os.path.isfile(terrain_path):
                raise ConfigError(f"terrain file not found: {terrain_path}")
        r = node.block("reference")
        waypoints = []
        for row in r.values("waypoint"):
            if len(row) != 2:
                raise ConfigError("waypoint rows are 'waypoint x y'")
            waypoints.append((float(row[0]), float(row[1])))
        pol = node.block("policy_gains")
        policy_gains = {k: pol.get_float(k) for k, v in pol.entries}
        mode = node.get_str("mode", "walk")
        if mode not in ("walk", "uncertainty", "compare"):
            raise ConfigError(f"unknown mode '{mode}'")
        return cls(model_path=model_path, duration=duration, seed=seed,
                   warmup=node.get_float("warmup", 0.5), mode=mode,
                   lip=lip, plan=plan,
                   qp_kp=g.get_float("qp_kp", 100.0),
                   qp_kd=g.get_float("qp_kd", 20.0),
                   apex_height=node.get_float("apex_height", 0.04),
                   swing_overdrive=node.get_float("swing_overdrive", 0.012),
                   swing_descent_stretch=node.get_float("swing_descent_stretch", 1.0),
                   obs=obs, contact=contact, disturbances=disturbances,
                   terrain_path=terrain_path,
                   reference_speed=r.get_float("speed", 0.0), waypoints=waypoints,
                   policy=node.get_str("policy", "tvr"),
                   policy_gains=policy_gains,
                   first_swing=node.get_str("first_swing", "right"),
                   f_max_nominal=node.get_float("f_max_nominal", None),
                   out_dir=node.get_str("out", None),
                   node=node, base_dir=base_dir)


# -- footstep policies -------------------------------------------------------------


class FootstepPolicy:
    """Unified p = k_p x + k_d xd placement, per horizontal axis."""

    name = "unified"

    def __init__(self, gains_x, gains_y):
        self.gains = (gains_x, gains_y)

    def plan(self, state_xy):
        """state_xy: (2, 2) array of (x, xd) rows per axis -> (2,) placement."""
        out = np.zeros(2)
        for ax in range(2):
            kp, kd = self.gains[ax]
            out[ax] = kp * state_xy[ax, 0] + kd * state_xy[ax, 1]
        return out


class TvrPolicy(FootstepPolicy):
    name = "tvr"

    def __init__(self, plan_params, lip):
        super().__init__(tuple(planner.tvr_gains(plan_params, lip, 0)),
                         tuple(planner.tvr_gains(plan_params, lip, 1)))


class AtriasPolicy(FootstepPolicy):
    """Keeps the previous planning velocity for the velocity-difference term."""

    name = "atrias"

    def __init__(self, K_P, K_D, K_I):
        super().__init__((K_I, K_P), (K_I, K_P))
        self.K_D = K_D
        self.xd_prev = np.zeros(2)

    def plan(self, state_xy):
        base = super().plan(state_xy)
        out = base + self.K_D * (state_xy[:, 1] - self.xd_prev)
        self.xd_prev = state_xy[:, 1].copy()
        return out


def make_policy(cfg: ScenarioConfig):
    g = cfg.policy_gains
    if cfg.policy == "tvr":
        return TvrPolicy(cfg.plan, cfg.lip)
    if cfg.policy == "capture_point":
        kd = float(np.sqrt(cfg.lip.h / cfg.lip.g))
        pol = FootstepPolicy((1.0, kd), (1.0, kd))
        pol.name = "capture_point"
        return pol
    if cfg.policy == "raibert":
        K, K_p, K_v = g.get("K", 0.30), g.get("K_p", 0.80), g.get("K_v", 0.10)
        T_st = g.get("T_st", 0.33)
        kp, kd = planner.unified_gains("raibert", K=K, K_p=K_p, K_v=K_v, T_st=T_st)
        pol = FootstepPolicy((kp, kd), (kp, kd))
        pol.name = "raibert"
        return pol
    if cfg.policy == "atrias":
        return AtriasPolicy(g.get("K_P", 0.45), g.get("K_D", 0.05), g.get("K_I", 1.0))
    raise ConfigError(f"unknown footstep policy '{cfg.policy}'")


# -- reference origin ------------------------------------------------------------


class ReferencePath:
    """Piecewise-linear origin trajectory at constant speed; steering moves
    this origin, the planner stays origin-relative."""

    def __init__(self, waypoints, speed, start_xy):
        self.speed = speed
        if not waypoints or speed <= 0:
            self.points = [np.asarray(start_xy, dtype=float)]
            self.times = [0.0]
            return
        pts = [np.asarray(w, dtype=float) + start_xy for w in waypoints]
        self.points = pts
        self.times = [0.0]
        for a, b in zip(pts[:-1], pts[1:]):
            self.times.append(self.times[-1] + float(np.linalg.norm(b - a)) / speed)

    def origin(self, t):
        pts, ts = self.points, self.times
        if len(pts) == 1 or t <= 0:
            return pts[0].copy(), np.zeros(2)
        if t >= ts[-1]:
            return pts[-1].copy(), np.zeros(2)
        k = int(np.searchsorted(ts, t, side="right")) - 1
        span = ts[k + 1] - ts[k]
        lam = (t - ts[k]) / span
        vel = (pts[k + 1] - pts[k]) / span
        return pts[k] + lam * (pts[k + 1] - pts[k]), vel


# -- per-step records -------------------------------------------------------------


@dataclass
class StepRecord:
    index: int
    foot: str
    plan_time: float
    obs_state: np.ndarray        # (2, 2): (x, xd) per axis, origin-relative
    p_raw: np.ndarray            # (2,) world, before clamping
    p_cmd: np.ndarray            # (2,) world, after clamping + landing bias
    clamped: bool
    touchdown_time: float = None
    p_actual: np.ndarray = None  # (2,) world
    early: bool = False

    @property
    def landing_error(self):
        if self.p_actual is None:
            return None
        return float(np.linalg.norm(self.p_actual - self.p_cmd))


class WalkingController:
    """One tick: contacts -> gait FSM -> swing targets -> KinWBC -> DynWBC ->
    SEA motor torques."""

    def __init__(self, model, cfg: ScenarioConfig, world: World):
        self.model = model
        self.cfg = cfg
        self.fsm = gait.GaitStateMachine(first_swing=cfg.first_swing,
                                         require_contact_to_land=True)
        self.policy = make_policy(cfg)
        fk = world.kin.frame_kinematics("base")
        self.z_nominal = float(fk.position[2])
        self.ground_z = 0.0
        self.f_max_nominal = (cfg.f_max_nominal if cfg.f_max_nominal is not None
                              else model.locomotion.get("f_max_nominal", 150.0))
        self.step_offset = np.asarray(model.locomotion.get("default_step_offset", [0.0, 0.2]))
        self.reference = ReferencePath(cfg.waypoints, cfg.reference_speed,
                                       fk.position[0:2])
        off = 6 if model.floating else 0
        self.leg_joints = {
            side: [i for i, j in enumerate(model.act_joints) if j.name.startswith(side)]
            for side in ("right", "left")}
        self.contact_streak = np.zeros(2, dtype=int)
        self.free_streak = np.zeros(2, dtype=int)
        self.swing_airborne = False
        # planner-side base velocity filter (the raw base velocity fluctuates
        # with swing-leg reaction; footstep planning uses the smoothed value)
        self.vel_filter_tau = 0.06
        self.vel_filtered = np.zeros(2)
        self.swing_plan = None
        self.swing_planned = False
        self.frozen_leg_cmd = None       # (joint indices, q_d values) at touchdown
        self.steps: list[StepRecord] = []
        self.prev_tag = self.fsm.phase.tag
        self.qp_failure = None
        self.mu = cfg.contact.mu

    # contact detection: normal force above threshold for consecutive ticks;
    # the swing foot's touchdown only arms after it has actually broken
    # contact (the limit-switch analog can't re-engage before it disengages)
    def _detect_contacts(self, world):
        for i in range(2):
            if world.foot_forces[i, 2] > CONTACT_FORCE_THRESHOLD:
                self.contact_streak[i] += 1
                self.free_streak[i] = 0
            else:
                self.contact_streak[i] = 0
                self.free_streak[i] += 1
        ph = self.fsm.phase
        contacts = [self.contact_streak[0] >= CONTACT_TICKS,
                    self.contact_streak[1] >= CONTACT_TICKS]
        if ph.in_swing:
            i = 0 if ph.swing_foot == "right" else 1
            if not self.swing_airborne and self.free_streak[i] >= 5:
                self.swing_airborne = True
            if not self.swing_airborne:
                contacts[i] = False
        return contacts[0], contacts[1]

    def _start_swing(self, world, foot):
        fk = world.kin.frame_kinematics(f"{foot}_foot")
        stance = "left" if foot == "right" else "right"
        sfk = world.kin.frame_kinematics(f"{stance}_foot")
        mirror = self.step_offset.copy()
        mirror[1] = -mirror[1] if foot == "right" else mirror[1]
        default = np.array([sfk.position[0] + mirror[0],
                            sfk.position[1] + mirror[1],
                            self.ground_z + self.cfg.apex_height])
        self.swing_plan = gait.SwingPlan(liftoff=fk.position.copy(),
                                         default_target=default,
                                         apex_height=self.cfg.apex_height,
                                         duration=self.fsm.durations.swing,
                                         descent_stretch=self.cfg.swing_descent_stretch)
        self.swing_planned = False

    def _replan_swing(self, world, foot):
        pos, _ = world.observe(self.cfg.obs)
        vel = self.vel_filtered
        stance = "left" if foot == "right" else "right"
        stance_xy = world.kin.frame_kinematics(f"{stance}_foot").position[0:2]
        # the placement takes effect at touchdown, so propagate the observed
        # state there under the current stance before applying the policy
        t_rem = self._predict_time_to_touchdown()
        A, _ = self.cfg.lip.step_matrices(T=t_rem)
        touchdown_t = world.t + t_rem
        origin, origin_vel = self.reference.origin(touchdown_t)
        state = np.zeros((2, 2))
        for ax in range(2):
            rel = A @ np.array([pos[ax] - stance_xy[ax], vel[ax]])
            state[ax, 0] = rel[0] + stance_xy[ax] - origin[ax]
            state[ax, 1] = rel[1] - origin_vel[ax]
        p_rel = self.policy.plan(state)
        p_world = p_rel + origin
        eta = self.cfg.obs.sample_eta(len(self.steps))
        p_biased = p_world + eta
        p_cmd = planner.clamp_footstep(p_biased, stance_xy, stance,
                                       max_step=self.cfg.plan.max_step,
                                       min_lateral=self.cfg.plan.min_lateral)
        clamped = bool(np.max(np.abs(p_cmd - p_biased)) > 1e-12)
        target = np.array([p_cmd[0], p_cmd[1],
                           self.ground_z - self.cfg.swing_overdrive])
        self.swing_plan.replan(target)
        self.swing_planned = True
        self.steps.append(StepRecord(index=len(self.steps), foot=foot,
                                     plan_time=world.t, obs_state=state,
                                     p_raw=p_world, p_cmd=p_cmd, clamped=clamped))

    def _predict_time_to_touchdown(self):
        """Time from now until the swing foot's planned vertical profile
        crosses the assumed ground plane (plus detection latency)."""
        plan = self.swing_plan
        half = 0.5 * plan.duration
        _, v_end, a_end = plan._spline.eval(1.0)
        t_z = plan.descent_stretch * half
        z_target = self.ground_z - self.cfg.swing_overdrive
        tau = 0.0
        while tau < t_z:
            z, _, _ = gait.min_jerk(plan.default_target[2], v_end[2] / half,
                                    a_end[2] / (half * half), z_target, t_z, tau)
            if z <= self.ground_z:
                break
            tau += 0.005
        remaining_first = max(half - self.fsm.phase.clock, 0.0)
        return remaining_first + tau + 2 * World.DT

    def _record_touchdown(self, world, foot, early):
        fk = world.kin.frame_kinematics(f"{foot}_foot")
        for rec in reversed(self.steps):
            if rec.foot == foot and rec.touchdown_time is None:
                rec.touchdown_time = world.t
                rec.p_actual = fk.position[0:2].copy()
                rec.early = early
                break

    def _swing_goal(self, clock):
        plan = self.swing_plan
        T = plan.duration
        if clock <= T:
            return gait.swing_trajectory(plan, clock)
        # extended swing (no contact at timeout): keep descending straight down
        pos, _, _ = gait.swing_trajectory(plan, T)
        extra = clock - T
        pos = pos + np.array([0.0, 0.0, -SEARCH_RATE * extra])
        return pos, np.array([0.0, 0.0, -SEARCH_RATE]), np.zeros(3)

    def tick(self, world: World):
        """Compute motor torques for the current world state. Returns
        (motor_torques, info dict)."""
        m = self.model
        cfg = self.cfg
        cr, cl = self._detect_contacts(world)

        _, vel_obs = world.observe(cfg.obs)
        alpha = world.DT / max(self.vel_filter_tau, world.DT)
        self.vel_filtered += alpha * (vel_obs[0:2] - self.vel_filtered)

        in_warmup = world.t < cfg.warmup
        if not in_warmup:
            self.fsm.advance(world.DT, contact_right=cr, contact_left=cl)
        ph = self.fsm.phase

        if ph.tag != self.prev_tag:
            if ph.in_swing:
                self._start_swing(world, ph.swing_foot)
                self.swing_airborne = False
            if ph.tag == gait.DOUBLE_STANCE and ph.landing_foot is not None:
                early = self.fsm.events[-1][3] == "contact"
                self._record_touchdown(world, ph.landing_foot, early)
            self.prev_tag = ph.tag

        if (ph.in_swing and not self.swing_planned
                and ph.clock >= self.swing_plan.replan_time):
            self._replan_swing(world, ph.swing_foot)

        # task stack: posture (z, Rx, Ry), plus swing foot during swing
        tasks = [TaskSpec(priority=1, frame="base", coords=("z", "Rx", "Ry"),
                          pos_des=np.array([0.0, 0.0, self.z_nominal]),
                          quat_des=np.array([1.0, 0.0, 0.0, 0.0]))]
        if ph.in_swing:
            pos, vel, acc = self._swing_goal(ph.clock)
            tasks.append(TaskSpec(priority=2, frame=f"{ph.swing_foot}_foot",
                                  coords=("x", "y", "z"), pos_des=pos,
                                  vel_des=np.concatenate([vel, np.zeros(3)]),
                                  acc_des=np.concatenate([acc, np.zeros(3)]),
                                  zero_floating_base_columns=True))
        sol = solve_priorities(m, world.q, world.qd, tasks)

        sched = gait.schedule(ph, f_max_nominal=self.f_max_nominal)
        q_d, qd_d, qdd_d = sol.q_d.copy(), sol.qd_d.copy(), sol.qdd_d.copy()

        # landed-leg joint-command blend across the landing ramp
        if ph.landing_foot and sched.blend > 0:
            if self.frozen_leg_cmd is None or self.frozen_leg_cmd[2] != ph.landing_foot:
                idx = self.leg_joints[ph.landing_foot]
                off = 7 if m.floating else 0
                self.frozen_leg_cmd = (idx, q_d[[off + i for i in idx]].copy(),
                                       ph.landing_foot)
            idx, frozen, _ = self.frozen_leg_cmd
            off = 7 if m.floating else 0
            b = sched.blend
            for k, i in enumerate(idx):
                q_d[off + i] = b * frozen[k] + (1.0 - b) * q_d[off + i]
                qd_d[(6 if m.floating else 0) + i] *= (1.0 - b)
                qdd_d[(6 if m.floating else 0) + i] *= (1.0 - b)
        elif ph.in_swing:
            self.frozen_leg_cmd = None

        qdd_cmd = desired_acceleration(m, q_d, qd_d, qdd_d, world.q, world.qd,
                                       cfg.qp_kp, cfg.qp_kd)
        schedule = ContactSchedule(in_contact=sched.in_contact,
                                   w_reaction=sched.w_reaction,
                                   w_contact=sched.w_contact,
                                   w_qdd=sched.w_qdd,
                                   f_max_z=sched.f_max_z, mu=self.mu)
        qp_sol = build_and_solve(m, world.q, world.qd, schedule, qdd_cmd,
                                 kin=world.kin)

        off_q = 7 if m.floating else 0
        off_v = 6 if m.floating else 0
        tau_m = sea_joint_controller(qp_sol.tau_cmd,
                                     q_d[off_q:], qd_d[off_v:],
                                     world.motor_pos, world.motor_vel,
                                     m.joint_kp, m.joint_kd, m.spring_k)
        info = dict(phase=ph.tag, clock=ph.clock, contact=(cr, cl),
                    tau_cmd=qp_sol.tau_cmd, f_reaction=qp_sol.f_reaction,
                    qp=qp_sol, q_d=q_d, step_idx=len(self.steps),
                    origin=self.reference.origin(world.t)[0])
        return tau_m, info


# -- scenario runner -------------------------------------------------------------


@dataclass
class ScenarioResult:
    status: int
    summary: dict
    out_dir: str = None
    steps: list = None
    log_rows: list = None
    controller: WalkingController = None

    @property
    def summary_text(self):
        lines = [f"{k}: {v}" for k, v in self.summary.items() if k != "steps"]
        lines.append("steps (idx foot plan_t cmd_x cmd_y act_x act_y err early clamped):")
        for s in self.summary.get("steps", []):
            lines.append("  " + " ".join(str(v) for v in s))
        return "\n".join(lines) + "\n"


def _initial_placement(model, world, terrain):
    q = model.neutral_q()
    world.set_state(q)
    foot = world.kin.frame_kinematics("right_foot").position
    ground = terrain.height(foot[0], foot[1])
    pen = 0.5 * model.total_mass * GRAVITY / world.contact.k_n
    q[2] = q[2] - foot[2] + ground - pen
    world.set_state(q)
    # preload the SEA springs with the static gravity torques so the stand-up
    # transient does not kick the unstable horizontal dynamics
    kin = world.kin
    h = kin.rnea()
    half_weight = np.array([0.0, 0.0, 0.5 * model.total_mass * GRAVITY])
    jc = np.zeros(model.nv)
    for f in ("right_foot", "left_foot"):
        jc += kin.point_jacobian(f)[0:3, :].T @ half_weight
    tau_static = (h - jc)[6:]
    world.motor_pos = model.joint_angles(q) + tau_static / model.spring_k
    world.kin = kin


def run_scenario(cfg: ScenarioConfig):
    model = load_model(cfg.model_path)
    terrain = Terrain.from_file(cfg.terrain_path) if cfg.terrain_path else Terrain()
    world = World(model, terrain=terrain, contact=cfg.contact)
    _initial_placement(model, world, terrain)
    ctrl = WalkingController(model, cfg, world)

    pending = sorted(cfg.disturbances, key=lambda d: d.time)
    n_ticks = int(round(cfg.duration / World.DT))
    rows = []
    status = EXIT_OK
    fail_reason = ""
    fall_time = None

    for k in range(n_ticks):
        while pending and world.t >= pending[0].time:
            d = pending.pop(0)
            if d.kind == "impulse":
                world.inject_impulse(d.impulse)
            elif d.kind == "force":
                world.inject_force_profile(d.force, d.duration, t0=d.time)
            else:
                world.inject_terrain(Terrain.from_file(d.terrain_path))
        try:
            tau_m, info = ctrl.tick(world)
            info["tau_m"] = tau_m
            world.step(tau_m)
        except QpInfeasibleError as e:
            status = EXIT_INFEASIBLE
            fail_reason = str(e)
            break
        except SimulationDivergedError as e:
            status = EXIT_FALL
            fail_reason = str(e)
            fall_time = world.t
            break
        base_z = world.q[2]
        rows.append(_log_row(world, ctrl, info))
        if base_z < 0.5 * ctrl.z_nominal:
            status = EXIT_FALL
            fail_reason = f"fall: base height {base_z:.3f} m at t = {world.t:.3f} s"
            fall_time = world.t
            break

    summary = _summarize(cfg, ctrl, world, status, fail_reason, fall_time)
    result = ScenarioResult(status=status, summary=summary, out_dir=cfg.out_dir,
                            steps=ctrl.steps, log_rows=rows, controller=ctrl)
    if cfg.out_dir:
        _write_outputs(cfg, result)
    return result


def _log_header(model):
    n = model.n_act
    cols = ["time", "phase", "clock", "contact_r", "contact_l",
            "fz_r", "fz_l", "step_idx", "origin_x", "origin_y",
            "obs_x", "obs_y", "obs_vx", "obs_vy"]
    cols += [f"q{i}" for i in range(model.nq)]
    cols += [f"qd{i}" for i in range(model.nv)]
    cols += [f"tau_cmd{i}" for i in range(n)]
    cols += [f"tau_m{i}" for i in range(n)]
    cols += [f"motor{i}" for i in range(n)]
    cols += [f"fr{i}" for i in range(6)]
    return cols


def _log_row(world, ctrl, info):
    pos, vel = world.observe(ctrl.cfg.obs)
    vals = [f"{world.t:.6f}", info["phase"], f"{info['clock']:.6f}",
            str(int(info["contact"][0])), str(int(info["contact"][1])),
            f"{world.foot_forces[0, 2]:.6f}", f"{world.foot_forces[1, 2]:.6f}",
            str(info["step_idx"]),
            f"{info['origin'][0]:.6f}", f"{info['origin'][1]:.6f}",
            f"{pos[0]:.9f}", f"{pos[1]:.9f}", f"{vel[0]:.9f}", f"{vel[1]:.9f}"]
    vals += [f"{v:.9f}" for v in world.q]
    vals += [f"{v:.9f}" for v in world.qd]
    vals += [f"{v:.9f}" for v in info["tau_cmd"]]
    vals += [f"{v:.9f}" for v in (info.get("tau_m") if info.get("tau_m") is not None else np.zeros(world.model.n_act))]
    vals += [f"{v:.9f}" for v in world.motor_pos]
    vals += [f"{v:.9f}" for v in info["f_reaction"]]
    return ",".join(vals)


def _summarize(cfg, ctrl, world, status, fail_reason, fall_time):
    landed = [s for s in ctrl.steps if s.landing_error is not None]
    errs = [s.landing_error for s in landed]
    base_err = abs(world.q[2] - ctrl.z_nominal) if world else None
    steps_tab = [(s.index, s.foot, round(s.plan_time, 4),
                  round(s.p_cmd[0], 5), round(s.p_cmd[1], 5),
                  round(s.p_actual[0], 5) if s.p_actual is not None else "-",
                  round(s.p_actual[1], 5) if s.p_actual is not None else "-",
                  round(s.landing_error, 5) if s.landing_error is not None else "-",
                  int(s.early), int(s.clamped))
                 for s in ctrl.steps]
    return {
        "status": {EXIT_OK: "completed", EXIT_FALL: "fall",
                   EXIT_INFEASIBLE: "infeasible_qp"}.get(status, str(status)),
        "reason": fail_reason,
        "duration_s": round(world.t, 4),
        "steps_planned": len(ctrl.steps),
        "steps_landed": len(landed),
        "falls": 1 if status == EXIT_FALL else 0,
        "fall_time": fall_time,
        "max_landing_error_m": round(max(errs), 6) if errs else None,
        "mean_landing_error_m": round(float(np.mean(errs)), 6) if errs else None,
        "final_base_height_error_m": round(base_err, 6) if base_err is not None else None,
        "early_terminations": sum(1 for s in landed if s.early),
        "clamped_steps": sum(1 for s in ctrl.steps if s.clamped),
        "seed": cfg.seed,
        "steps": steps_tab,
    }


def _write_outputs(cfg, result: ScenarioResult):
    os.makedirs(cfg.out_dir, exist_ok=True)
    model = load_model(cfg.model_path)
    with open(os.path.join(cfg.out_dir, "log.csv"), "w", encoding="utf-8") as fh:
        fh.write(",".join(_log_header(model)) + "\n")
        for row in result.log_rows:
            fh.write(row + "\n")
    with open(os.path.join(cfg.out_dir, "steps.csv"), "w", encoding="utf-8") as fh:
        fh.write("index,foot,plan_time,obs_x,obs_vx,obs_y,obs_vy,raw_x,raw_y,"
                 "cmd_x,cmd_y,actual_x,actual_y,error,early,clamped\n")
        for s in result.steps:
            a = s.p_actual if s.p_actual is not None else (np.nan, np.nan)
            err = s.landing_error if s.landing_error is not None else np.nan
            fh.write(f"{s.index},{s.foot},{s.plan_time:.6f},"
                     f"{s.obs_state[0, 0]:.9f},{s.obs_state[0, 1]:.9f},"
                     f"{s.obs_state[1, 0]:.9f},{s.obs_state[1, 1]:.9f},"
                     f"{s.p_raw[0]:.9f},{s.p_raw[1]:.9f},"
                     f"{s.p_cmd[0]:.9f},{s.p_cmd[1]:.9f},"
                     f"{a[0]:.9f},{a[1]:.9f},{err:.9f},"
                     f"{int(s.early)},{int(s.clamped)}\n")
    with open(os.path.join(cfg.out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(result.summary_text)
    if cfg.node is not None:
        with open(os.path.join(cfg.out_dir, "effective.cfg"), "w", encoding="utf-8") as fh:
            fh.write(cfg.node.dump() + "\n")


# -- planner comparison ------------------------------------------------------------


COMPARISON_POLICIES = ("tvr", "capture_point", "raibert", "atrias")


def compare_planners(cfg: ScenarioConfig, duration=None, out_path=None):
    """Run the same scenario under each footstep policy; report the unified
    gains, the closed-loop spectral radius, and steps survived under the
    standard disturbance suite (alternating lateral shoves)."""
    results = []
    for name in COMPARISON_POLICIES:
        sub = ScenarioConfig(**{**cfg.__dict__})
        sub.policy = name
        sub.out_dir = None
        sub.disturbances = [
            Disturbance(kind="impulse", time=3.0, impulse=np.array([0.0, 1.2, 0.0])),
            Disturbance(kind="impulse", time=5.0, impulse=np.array([0.0, -1.2, 0.0])),
            Disturbance(kind="impulse", time=7.0, impulse=np.array([1.2, 0.0, 0.0])),
        ]
        if duration is not None:
            sub.duration = duration
        pol = make_policy(sub)
        kp, kd = pol.gains[0]
        A, B = cfg.lip.step_matrices()
        radius = float(np.max(np.abs(np.linalg.eigvals(
            A + np.outer(B, [kp, kd])))))
        res = run_scenario(sub)
        results.append(dict(policy=name, k_p=kp, k_d=kd,
                            spectral_radius=radius,
                            steps_survived=res.summary["steps_landed"],
                            status=res.summary["status"]))
    table = _format_comparison(results)
    if out_path:
        os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(table)
    return results, table


def _format_comparison(results):
    hdr = f"{'policy':<14}{'k_p':>9}{'k_d':>9}{'radius':>9}{'survived':>10}  status"
    lines = [hdr, "-" * len(hdr)]
    for r in results:
        lines.append(f"{r['policy']:<14}{r['k_p']:>9.4f}{r['k_d']:>9.4f}"
                     f"{r['spectral_radius']:>9.4f}{r['steps_survived']:>10d}  {r['status']}")
    return "\n".join(lines) + "\n"
