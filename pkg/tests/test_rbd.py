import numpy as np
import pytest

from bipedwbc.rbd import (Frame, Kinematics, ModelError, bias_and_gravity,
                          frame_kinematics, jdot_qdot, load_model, mass_matrix,
                          model_from_text, point_jacobian, rnea)
from bipedwbc.rbd.spatial import quat_normalize

MODELS = "models"

FREE_BODY = """
model_version 1
link { name body  mass 3.5  com 0 0 0  inertia 0.02 0.03 0.04 }
joint { name float  type floating  parent world  child body }
frame { name base  parent_link body  offset 0 0 0 }
frame { name tip  parent_link body  offset 0.1 0 0.2 }
"""

# planar 2-link pendulum on a fixed post; both axes +y, links along -z
PENDULUM2 = """
model_version 1
link { name ground_post  mass 5.0  com 0 0 0  inertia 0.1 0.1 0.1 }
link { name upper  mass 1.2  com 0 0 -0.25  inertia 0.03 0.03 0.001 }
link { name lower  mass 0.8  com 0 0 -0.2   inertia 0.02 0.02 0.001 }
joint {
    name q1  type revolute  parent ground_post  child upper
    origin 0 0 0  axis 0 1 0  rotor_inertia 0.0
}
joint {
    name q2  type revolute  parent upper  child lower
    origin 0 0 -0.5  axis 0 1 0  rotor_inertia 0.0
}
frame { name tip  parent_link lower  offset 0 0 -0.4 }
"""


def random_state(model, rng, vel_scale=0.5):
    q = model.neutral_q()
    if model.floating:
        q[0:3] = rng.normal(size=3)
        q[3:7] = quat_normalize(rng.normal(size=4))
        q[7:] = q[7:] + rng.normal(scale=0.4, size=model.n_act)
    else:
        q = rng.normal(scale=0.7, size=model.nq)
    qd = rng.normal(scale=vel_scale, size=model.nv)
    return q, qd


@pytest.fixture(scope="module")
def mercury():
    return load_model(f"{MODELS}/mercury6.model")


@pytest.fixture(scope="module")
def draco():
    return load_model(f"{MODELS}/draco10.model")


class TestModel:
    def test_mercury_structure(self, mercury):
        assert mercury.floating
        assert mercury.n_act == 6
        assert mercury.nq == 13 and mercury.nv == 12
        assert set(mercury.frames) >= {"base", "right_foot", "left_foot"}

    def test_draco_structure(self, draco):
        assert draco.n_act == 10
        assert draco.nq == 17 and draco.nv == 16

    def test_rejects_nonpositive_mass(self):
        bad = FREE_BODY.replace("mass 3.5", "mass 0.0")
        with pytest.raises(ModelError):
            model_from_text(bad)

    def test_rejects_asymmetric_inertia(self):
        bad = FREE_BODY.replace("inertia 0.02 0.03 0.04",
                                "inertia 0.02 0.03 -0.04")
        with pytest.raises(ModelError):
            model_from_text(bad)

    def test_rejects_two_floating_joints(self):
        bad = FREE_BODY + "\nlink { name b2 mass 1 com 0 0 0 inertia 0.01 0.01 0.01 }\n" \
            "joint { name f2 type floating parent world child b2 }\n"
        with pytest.raises(ModelError):
            model_from_text(bad)

    def test_rejects_disconnected_tree(self):
        bad = FREE_BODY + "\nlink { name orphan mass 1 com 0 0 0 inertia 0.01 0.01 0.01 }\n"
        with pytest.raises(ModelError):
            model_from_text(bad)

    def test_quaternion_norm_validated(self):
        m = model_from_text(FREE_BODY)
        q = m.neutral_q()
        q[3:7] = [1.0, 0.01, 0.0, 0.0]   # norm off by ~5e-5
        with pytest.raises(ValueError):
            m.check_q(q)


class TestMassMatrix:
    def test_free_body_translation_block(self):
        m = model_from_text(FREE_BODY)
        A = mass_matrix(m, m.neutral_q())
        assert np.allclose(A[0:3, 0:3], 3.5 * np.eye(3), atol=1e-14)

    def test_symmetry_random_states(self, mercury):
        rng = np.random.default_rng(3)
        for _ in range(20):
            q, _ = random_state(mercury, rng)
            A = mass_matrix(mercury, q)
            assert np.max(np.abs(A - A.T)) < 1e-12

    def test_two_link_pendulum_closed_form(self):
        m = model_from_text(PENDULUM2)
        # treat the massive post as the fixed base: both joints about +y,
        # links hang along -z; textbook planar arm with
        # l1 = 0.5, lc1 = 0.25, lc2 = 0.2, I about the rotation (y) axis
        m1, m2 = 1.2, 0.8
        l1, lc1, lc2 = 0.5, 0.25, 0.2
        I1, I2 = 0.03, 0.02
        rng = np.random.default_rng(5)
        for _ in range(10):
            q = rng.normal(scale=1.0, size=2)
            A = mass_matrix(m, q)
            q2 = q[1]
            M11 = m1 * lc1**2 + I1 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * np.cos(q2)) + I2
            M12 = m2 * (lc2**2 + l1 * lc2 * np.cos(q2)) + I2
            M22 = m2 * lc2**2 + I2
            ref = np.array([[M11, M12], [M12, M22]])
            assert np.allclose(A, ref, atol=1e-12)

    def test_rotor_inertia_on_diagonal(self, mercury):
        q = mercury.neutral_q()
        A = mass_matrix(mercury, q)
        A0 = mass_matrix(mercury, q, include_rotor=False)
        d = np.diag(A - A0)
        assert np.allclose(d[0:6], 0.0)
        assert np.allclose(d[6:], mercury.rotor_inertia)
        assert np.allclose((A - A0) - np.diag(d), 0.0)

    def test_spd_many_random_states(self, mercury):
        rng = np.random.default_rng(11)
        n_bad = 0
        for _ in range(10_000):
            q, _ = random_state(mercury, rng)
            A = mass_matrix(mercury, q)
            if np.min(np.linalg.eigvalsh(A)) <= 0:
                n_bad += 1
        assert n_bad == 0

    def test_crba_matches_rnea_columns(self, mercury):
        rng = np.random.default_rng(7)
        for _ in range(5):
            q, _ = random_state(mercury, rng)
            A = mass_matrix(mercury, q)
            zero = np.zeros(mercury.nv)
            base = rnea(mercury, q, zero, zero)
            cols = np.column_stack([rnea(mercury, q, zero, e) - base
                                    for e in np.eye(mercury.nv)])
            assert np.max(np.abs(A - cols)) < 1e-9


class TestBiasAndGravity:
    def test_hanging_robot_vertical_reaction(self, mercury):
        # static robot: the base z row is the force required to hold it,
        # +m g (upward) by this repo's sign convention
        bg = bias_and_gravity(mercury, mercury.neutral_q(), np.zeros(mercury.nv))
        assert abs(bg[2] - mercury.total_mass * 9.81) < 1e-9
        assert np.allclose(bg[0:2], 0.0, atol=1e-9)

    def test_equals_rnea_at_zero_acceleration(self, mercury):
        rng = np.random.default_rng(13)
        q, qd = random_state(mercury, rng)
        assert np.array_equal(bias_and_gravity(mercury, q, qd),
                              rnea(mercury, q, qd, np.zeros(mercury.nv)))

    def test_two_link_pendulum_coriolis(self):
        m = model_from_text(PENDULUM2)
        m1, m2 = 1.2, 0.8
        l1, lc1, lc2 = 0.5, 0.25, 0.2
        g = 9.81
        rng = np.random.default_rng(17)
        for _ in range(10):
            q = rng.normal(scale=1.0, size=2)
            qd = rng.normal(scale=1.0, size=2)
            bg = bias_and_gravity(m, q, qd)
            # planar arm about +y with links along -z at q=0: the angle from
            # the downward vertical is the joint angle itself
            h = m2 * l1 * lc2 * np.sin(q[1])
            c1 = -h * qd[1] * (2 * qd[0] + qd[1])
            c2 = h * qd[0] ** 2
            g1 = (m1 * lc1 + m2 * l1) * g * np.sin(q[0]) + m2 * lc2 * g * np.sin(q[0] + q[1])
            g2 = m2 * lc2 * g * np.sin(q[0] + q[1])
            ref = np.array([c1 + g1, c2 + g2])
            assert np.allclose(bg, ref, atol=1e-10), (bg, ref)


class TestFrames:
    def test_base_frame_is_base_position(self, mercury):
        rng = np.random.default_rng(19)
        q, qd = random_state(mercury, rng)
        fk = frame_kinematics(mercury, q, qd, "base")
        assert np.allclose(fk.position, q[0:3])

    def test_zero_pose_foot_matches_file_geometry(self, mercury):
        q = np.zeros(mercury.nq)
        q[3] = 1.0
        fk = frame_kinematics(mercury, q, np.zeros(mercury.nv), "right_foot")
        # straight leg: hip roll (-0.10) + hip pitch (-0.05) + thigh (0.45)
        # + shank (0.45) below the base, 0.10 to the right
        assert np.allclose(fk.position, [0.0, -0.10, -1.05], atol=1e-12)

    def test_unknown_frame_raises(self, mercury):
        with pytest.raises(ValueError, match="unknown frame"):
            frame_kinematics(mercury, mercury.neutral_q(),
                             np.zeros(mercury.nv), "nose")

    def test_velocity_equals_jacobian_times_qd(self, mercury):
        rng = np.random.default_rng(23)
        for _ in range(10):
            q, qd = random_state(mercury, rng)
            fk = frame_kinematics(mercury, q, qd, "left_foot")
            J = point_jacobian(mercury, q, "left_foot")
            v = J @ qd
            assert np.max(np.abs(v[0:3] - fk.linear_velocity)) < 1e-10
            assert np.max(np.abs(v[3:6] - fk.angular_velocity)) < 1e-10

    def test_position_finite_difference(self, mercury):
        rng = np.random.default_rng(29)
        q, qd = random_state(mercury, rng)
        J = point_jacobian(mercury, q, "right_foot")
        eps = 1e-7
        f0 = frame_kinematics(mercury, q, qd, "right_foot").position
        f1 = frame_kinematics(mercury, mercury.integrate_q(q, eps * qd), qd,
                              "right_foot").position
        assert np.max(np.abs((f1 - f0) / eps - J[0:3] @ qd)) < 1e-5


class TestJacobians:
    def test_fixed_base_rows_zero_off_path(self):
        m = model_from_text(PENDULUM2)
        # a frame on the first moving link does not depend on the elbow joint
        m.frames["mid"] = Frame(name="mid", parent_link="upper",
                                offset=np.array([0, 0, -0.3]), rpy=np.zeros(3))
        q = np.array([0.3, -0.7])
        J = point_jacobian(m, q, "mid")
        assert np.allclose(J[:, 1], 0.0)
        assert not np.allclose(J[:, 0], 0.0)

    def test_jdot_qdot_zero_velocity(self, mercury):
        q = mercury.neutral_q()
        jd = jdot_qdot(mercury, q, np.zeros(mercury.nv), "right_foot")
        assert np.allclose(jd, 0.0, atol=1e-14)

    def test_jdot_qdot_finite_difference(self, mercury):
        rng = np.random.default_rng(31)
        h = 1e-6
        for _ in range(10):
            q, qd = random_state(mercury, rng)
            J0 = point_jacobian(mercury, q, "left_foot")
            J1 = point_jacobian(mercury, mercury.integrate_q(q, h * qd), "left_foot")
            fd = (J1 @ qd - J0 @ qd) / h
            jd = jdot_qdot(mercury, q, qd, "left_foot")
            assert np.max(np.abs(fd - jd)) < 1e-5


class TestKinematicsCache:
    def test_module_functions_match_cache(self, mercury):
        rng = np.random.default_rng(37)
        q, qd = random_state(mercury, rng)
        kin = Kinematics(mercury, q, qd)
        assert np.array_equal(kin.mass_matrix(), mass_matrix(mercury, q))
        assert np.array_equal(kin.rnea(), bias_and_gravity(mercury, q, qd))

    def test_com_total_mass_weighting(self, mercury):
        kin = Kinematics(mercury, mercury.neutral_q())
        assert abs(kin.com()[1]) < 1e-12   # left/right symmetric pose
