"""Robot model description, model-file parsing, and the floating-base state.

Model file format (version 1), parsed with :mod:`bipedwbc.configio`::

    model_version 1
    link {
        name torso
        mass 6.0
        com 0 0 0.05
        inertia ixx iyy izz [ixy ixz iyz]
    }
    joint {
        name float            # type floating: connects 'world' to the root link
        type floating|revolute
        parent world|<link>
        child <link>
        origin x y z          # joint frame position in the parent link frame
        rpy r p y             # optional joint frame orientation (default 0 0 0)
        axis x y z            # revolute axis in the child frame
        limits lo hi          # rad
        tau_max t             # N*m
        rotor_inertia i       # reflected to the joint, kg*m^2
        transmission n
        spring_k k            # SEA spring constant, N*m/rad
        kp v / kd v           # joint-level motor PD gains
    }
    frame {
        name right_foot
        parent_link right_shank
        offset x y z
        rpy r p y             # optional
    }
    locomotion {              # optional gait-related parameters
        nominal_pose <joint> <angle> ...      # one row per joint
        default_step_offset dx dy
        f_max_nominal 150
    }

Generalized coordinates (floating-base models):
    q  = [base position (world, 3), base quaternion (w x y z), joint angles (n)]
    qd = [base linear velocity (world, 3), base angular velocity (body, 3),
          joint rates (n)]
Fixed-base trees (no floating joint) are also accepted for test rigs; there
q = joint angles, qd = joint rates.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..configio import ConfigError, ConfigNode, load_config, parse_config_text
from . import spatial


class ModelError(Exception):
    """Invalid robot model description."""


@dataclass
class Link:
    name: str
    mass: float
    com: np.ndarray          # in link frame
    inertia: np.ndarray      # 3x3 about the CoM, link frame


@dataclass
class Joint:
    name: str
    jtype: str               # "floating" | "revolute"
    parent: str
    child: str
    origin: np.ndarray
    rpy: np.ndarray
    axis: np.ndarray         # child frame
    limits: tuple
    tau_max: float
    rotor_inertia: float
    transmission: float
    spring_k: float
    spring_d: float
    kp: float
    kd: float


@dataclass
class Frame:
    name: str
    parent_link: str
    offset: np.ndarray
    rpy: np.ndarray


class RobotModel:
    """Kinematic/dynamic description of a rigid-body tree.

    Floating-base robots have exactly one floating joint rooted at ``world``;
    fixed-base trees (used by tests) have none.
    """

    def __init__(self, links, joints, frames, locomotion=None, name="robot"):
        self.name = name
        self.links = list(links)
        self.joints = list(joints)
        self.frames = {f.name: f for f in frames}
        self.locomotion = locomotion or {}
        self._build()
        self.validate()

    # -- structure -----------------------------------------------------------

    def _build(self):
        self.link_index = {l.name: i for i, l in enumerate(self.links)}
        if len(self.link_index) != len(self.links):
            raise ModelError("duplicate link names")

        floats = [j for j in self.joints if j.jtype == "floating"]
        if len(floats) > 1:
            raise ModelError("more than one floating joint")
        self.floating = len(floats) == 1
        if self.floating and floats[0].parent != "world":
            raise ModelError("floating joint must have parent 'world'")

        self.revolute = [j for j in self.joints if j.jtype == "revolute"]
        self.n_act = len(self.revolute)
        self.nv = (6 if self.floating else 0) + self.n_act
        self.nq = (7 if self.floating else 0) + self.n_act

        # topological order of links: root first, then children
        if self.floating:
            root = floats[0].child
        else:
            children = {j.child for j in self.revolute}
            roots = [l.name for l in self.links if l.name not in children]
            if len(roots) != 1:
                raise ModelError(f"tree must have one root, found {roots}")
            root = roots[0]
        if root not in self.link_index:
            raise ModelError(f"root link '{root}' not defined")
        self.root_link = root

        joint_by_child = {}
        for j in self.revolute:
            if j.child in joint_by_child:
                raise ModelError(f"link '{j.child}' has two parent joints")
            joint_by_child[j.child] = j

        order = [root]
        placed = {root}
        pending = list(self.revolute)
        while pending:
            progressed = False
            rest = []
            for j in pending:
                if j.parent in placed:
                    if j.child not in self.link_index:
                        raise ModelError(f"joint '{j.name}' child link '{j.child}' not defined")
                    order.append(j.child)
                    placed.add(j.child)
                    progressed = True
                else:
                    rest.append(j)
            if not progressed:
                names = [j.name for j in rest]
                raise ModelError(f"joint graph is not a tree rooted at the base: {names}")
            pending = rest
        if len(order) != len(self.links):
            missing = [l.name for l in self.links if l.name not in placed]
            raise ModelError(f"links not connected to the tree: {missing}")

        # arrays in topological link order; joint i drives link order[i+offset]
        self.link_order = order
        self.joint_of_link = {}   # link name -> actuated joint index
        self.act_joints = []      # actuated joints in topological order
        for name in order:
            if name == root:
                continue
            j = joint_by_child[name]
            self.joint_of_link[name] = len(self.act_joints)
            self.act_joints.append(j)
        self.joint_index = {j.name: i for i, j in enumerate(self.act_joints)}
        # link topological index and parent link index
        self.parent_link_idx = []
        self.topo_links = [self.links[self.link_index[n]] for n in order]
        topo_pos = {n: i for i, n in enumerate(order)}
        for i, name in enumerate(order):
            if name == root:
                self.parent_link_idx.append(-1)
            else:
                self.parent_link_idx.append(topo_pos[joint_by_child[name].parent])
        # per actuated joint: index of the link it drives (in topo order)
        self.joint_child_topo = [topo_pos[j.child] for j in self.act_joints]
        self.joint_parent_topo = [topo_pos[j.parent] for j in self.act_joints]
        # per topo link: actuated joint indices on the path from the root
        self.ancestor_joints = []
        for i, name in enumerate(order):
            if i == 0:
                self.ancestor_joints.append([])
            else:
                chain = list(self.ancestor_joints[self.parent_link_idx[i]])
                chain.append(self.joint_of_link[name])
                self.ancestor_joints.append(chain)

        self.rotor_inertia = np.array([j.rotor_inertia for j in self.act_joints])
        self.spring_k = np.array([j.spring_k for j in self.act_joints])
        self.spring_d = np.array([j.spring_d for j in self.act_joints])
        self.tau_max = np.array([j.tau_max for j in self.act_joints])
        self.joint_kp = np.array([j.kp for j in self.act_joints])
        self.joint_kd = np.array([j.kd for j in self.act_joints])
        self.joint_limits = np.array([j.limits for j in self.act_joints])
        self.total_mass = float(sum(l.mass for l in self.links))

    def validate(self):
        for l in self.links:
            if not l.mass > 0:
                raise ModelError(f"link '{l.name}': mass must be > 0")
            I = np.asarray(l.inertia, dtype=float)
            if I.shape != (3, 3) or np.max(np.abs(I - I.T)) > 1e-12:
                raise ModelError(f"link '{l.name}': inertia must be symmetric 3x3")
            if np.min(np.linalg.eigvalsh(I)) <= 0:
                raise ModelError(f"link '{l.name}': inertia must be positive definite")
        for j in self.act_joints:
            a = np.linalg.norm(j.axis)
            if not a > 0:
                raise ModelError(f"joint '{j.name}': zero axis")
            j.axis = np.asarray(j.axis, dtype=float) / a
            if j.rotor_inertia < 0 or j.spring_k <= 0 or j.spring_d < 0 or j.transmission <= 0:
                raise ModelError(f"joint '{j.name}': bad actuator parameters")
        for f in self.frames.values():
            if f.parent_link not in self.link_index:
                raise ModelError(f"frame '{f.name}': unknown parent link '{f.parent_link}'")

    # -- state helpers --------------------------------------------------------

    def neutral_q(self):
        q = np.zeros(self.nq)
        if self.floating:
            q[3] = 1.0
        pose = self.locomotion.get("nominal_pose", {})
        for name, angle in pose.items():
            if name not in self.joint_index:
                raise ModelError(f"nominal_pose: unknown joint '{name}'")
            q[(7 if self.floating else 0) + self.joint_index[name]] = angle
        return q

    def joint_angles(self, q):
        return q[7:] if self.floating else q

    def joint_rates(self, qd):
        return qd[6:] if self.floating else qd

    def check_q(self, q):
        q = np.asarray(q, dtype=float)
        if q.shape != (self.nq,):
            raise ValueError(f"q must have shape ({self.nq},), got {q.shape}")
        if self.floating and abs(np.linalg.norm(q[3:7]) - 1.0) > 1e-9:
            raise ValueError("base quaternion is not unit norm (tolerance 1e-9)")
        if not np.all(np.isfinite(q)):
            raise ValueError("q contains non-finite values")
        return q

    def check_qd(self, qd):
        qd = np.asarray(qd, dtype=float)
        if qd.shape != (self.nv,):
            raise ValueError(f"qdot must have shape ({self.nv},), got {qd.shape}")
        if not np.all(np.isfinite(qd)):
            raise ValueError("qdot contains non-finite values")
        return qd

    def integrate_q(self, q, dq):
        """q + dq with the base quaternion updated via the local exponential map.

        ``dq`` lives in velocity coordinates (length nv).
        """
        q = np.asarray(q, dtype=float).copy()
        dq = np.asarray(dq, dtype=float)
        if dq.shape != (self.nv,):
            raise ValueError(f"dq must have shape ({self.nv},)")
        if self.floating:
            q[0:3] += dq[0:3]
            q[3:7] = spatial.quat_integrate_local(q[3:7], dq[3:6], 1.0)
            q[7:] += dq[6:]
        else:
            q += dq
        return q


@dataclass
class FloatingBaseState:
    """Generalized position and velocity of a floating-base robot."""

    q: np.ndarray
    qd: np.ndarray
    model: RobotModel = field(repr=False, default=None)

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qd = np.asarray(self.qd, dtype=float)
        if self.model is not None:
            self.model.check_q(self.q)
            self.model.check_qd(self.qd)

    @property
    def base_pos(self):
        return self.q[0:3]

    @property
    def base_quat(self):
        return self.q[3:7]


# -- model file parsing -------------------------------------------------------


def _parse_inertia(row):
    if len(row) == 3:
        ixx, iyy, izz = row
        ixy = ixz = iyz = 0.0
    elif len(row) == 6:
        ixx, iyy, izz, ixy, ixz, iyz = row
    else:
        raise ModelError("inertia expects 3 or 6 numbers (ixx iyy izz [ixy ixz iyz])")
    return np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])


def model_from_node(node: ConfigNode, name="robot"):
    version = node.get_int("model_version", 1)
    if version != 1:
        raise ModelError(f"unsupported model_version {version}")
    links, joints, frames = [], [], []
    for b in node.blocks("link"):
        links.append(Link(
            name=b.get_str("name", required=True),
            mass=b.get_float("mass", required=True),
            com=np.array(b.get_vec("com", 3, default=[0, 0, 0])),
            inertia=_parse_inertia(b.get_vec("inertia", required=True)),
        ))
    for b in node.blocks("joint"):
        jtype = b.get_str("type", required=True)
        if jtype not in ("floating", "revolute"):
            raise ModelError(f"unknown joint type '{jtype}'")
        joints.append(Joint(
            name=b.get_str("name", required=True),
            jtype=jtype,
            parent=b.get_str("parent", required=True),
            child=b.get_str("child", required=True),
            origin=np.array(b.get_vec("origin", 3, default=[0, 0, 0])),
            rpy=np.array(b.get_vec("rpy", 3, default=[0, 0, 0])),
            axis=np.array(b.get_vec("axis", 3, default=[0, 0, 1])),
            limits=tuple(b.get_vec("limits", 2, default=[-3.14, 3.14])),
            tau_max=b.get_float("tau_max", 60.0),
            rotor_inertia=b.get_float("rotor_inertia", 0.0),
            transmission=b.get_float("transmission", 1.0),
            spring_k=b.get_float("spring_k", 500.0),
            spring_d=b.get_float("spring_d", 2.0),
            kp=b.get_float("kp", 500.0),
            kd=b.get_float("kd", 10.0),
        ))
    for b in node.blocks("frame"):
        frames.append(Frame(
            name=b.get_str("name", required=True),
            parent_link=b.get_str("parent_link", required=True),
            offset=np.array(b.get_vec("offset", 3, default=[0, 0, 0])),
            rpy=np.array(b.get_vec("rpy", 3, default=[0, 0, 0])),
        ))
    locomotion = {}
    loco = node.block("locomotion")
    pose = {}
    for row in loco.values("nominal_pose"):
        if len(row) != 2:
            raise ModelError("nominal_pose rows are '<joint> <angle>'")
        pose[row[0]] = float(row[1])
    locomotion["nominal_pose"] = pose
    locomotion["default_step_offset"] = loco.get_vec("default_step_offset", 2, default=[0.0, 0.2])
    locomotion["f_max_nominal"] = loco.get_float("f_max_nominal", 150.0)
    return RobotModel(links, joints, frames, locomotion, name=name)


def load_model(path):
    try:
        node = load_config(path)
    except ConfigError as e:
        raise ModelError(str(e)) from e
    return model_from_node(node, name=os.path.splitext(os.path.basename(path))[0])


def model_from_text(text, name="robot"):
    return model_from_node(parse_config_text(text), name=name)
