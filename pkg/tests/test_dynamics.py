"""Device-model tests with closed-form discrete-time oracles."""
import math

import numpy as np
import pytest

from teledrift.dynamics import (CartesianModel, OperatorScript,
                                SlaveControllerGains, pose_error, slave_force,
                                step_cartesian, step_master)
from teledrift.errors import NotSPD
from teledrift.liegroup import Frame, Pose, Rotation, Twist, exp_so3, log_so3

DT = 1e-3


def _model(lam=None, mu=None, **kw):
    lam = np.eye(6) if lam is None else lam
    return CartesianModel(lam, mu, **kw)


class TestCartesianModel:
    def test_single_step_matches_semi_implicit_euler(self):
        lam = np.diag([2.0, 2.0, 2.0, 0.5, 0.5, 0.5])
        mu = np.diag([0.1, 0.1, 0.1, 0.3, 0.3, 0.3])
        m = CartesianModel(lam, mu)
        f = np.array([0.0, 0.0, 0.0, 1.0, -1.0, 0.5])
        tw = m.step(f, DT)
        # v1 = v0 + dt lam^-1 (F - mu v0) with v0 = 0
        v1 = DT * np.linalg.inv(lam) @ f
        np.testing.assert_allclose(tw.as_array(), v1, rtol=1e-14)
        # then p1 = p0 + v1_lin dt (zero angular velocity)
        np.testing.assert_allclose(m.pose.p, v1[3:] * DT, rtol=1e-14)
        # a second step with damping now in play
        tw = m.step(f, DT)
        v2 = v1 + DT * np.linalg.inv(lam) @ (f - mu @ v1)
        np.testing.assert_allclose(tw.as_array(), v2, rtol=1e-14)

    def test_velocity_decays_geometrically_under_damping(self):
        # F = 0: v(k) = (1 - dt mu/lam)^k v(0), exactly, per axis
        lam = np.diag([1.0] * 6)
        mu = np.diag([50.0] * 6)
        v0 = Twist(np.zeros(3), np.array([0.2, -0.1, 0.05]), Frame.BODY)
        m = CartesianModel(lam, mu, twist=v0)
        for _ in range(40):
            m.step(np.zeros(6), DT)
        expected = (1.0 - DT * 50.0) ** 40 * v0.as_array()
        np.testing.assert_allclose(m.velocity(), expected, rtol=1e-10)

    def test_constant_angular_velocity_accumulates_rotation(self):
        m = _model()
        w = 0.7  # rad/s about z
        f = np.array([0.0, 0.0, w / DT, 0.0, 0.0, 0.0])
        m.step(f, DT)  # one impulse sets the velocity
        for _ in range(999):
            m.step(np.zeros(6), DT)
        phi = log_so3(m.pose.r)
        np.testing.assert_allclose(phi, [0.0, 0.0, w * 1.0], rtol=1e-9)

    def test_dense_inertia_matches_diagonal_equivalent(self):
        d = np.array([1.5, 1.5, 1.5, 0.8, 0.8, 0.8])
        dense = np.diag(d).copy()
        dense[0, 1] = dense[1, 0] = 1e-17  # defeats the diagonal fast path
        m_diag = _model(np.diag(d))
        m_dense = _model(dense)
        rng = np.random.default_rng(5)
        for _ in range(50):
            f = rng.normal(size=6)
            m_diag.step(f, DT)
            m_dense.step(f, DT)
        np.testing.assert_allclose(m_dense.velocity(), m_diag.velocity(),
                                   rtol=1e-9)
        np.testing.assert_allclose(m_dense.pose.p, m_diag.pose.p, rtol=1e-9)

    def test_inertia_schedule_is_applied_per_tick(self):
        lams = [np.diag([1.0] * 6), np.diag([2.0] * 6)]
        m = CartesianModel(np.eye(6), lambda_schedule=lambda k: lams[k % 2])
        f = np.ones(6)
        m.step(f, DT)   # tick 0: lam = I
        m.step(f, DT)   # tick 1: lam = 2I
        expected = DT * 1.0 + DT * 0.5
        np.testing.assert_allclose(m.velocity(), np.full(6, expected),
                                   rtol=1e-14)
        assert m.inertia(1)[0, 0] == 2.0
        assert m.inertia_inv(1)[0, 0] == 0.5

    def test_initial_pose_and_twist_respected(self):
        pose = Pose(exp_so3([0.1, 0.0, 0.0]), np.array([1.0, 2.0, 3.0]))
        tw = Twist(np.array([0.0, 0.0, 0.1]), np.zeros(3), Frame.BODY)
        m = _model(pose=pose, twist=tw)
        np.testing.assert_allclose(m.pose.p, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(m.twist.as_array(), tw.as_array())

    def test_rejects_non_spd_inertia(self):
        with pytest.raises(NotSPD):
            CartesianModel(-np.eye(6))

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            _model().step(np.zeros(6), 0.0)

    def test_step_cartesian_wrapper(self):
        m = _model()
        tw = step_cartesian(m, np.ones(6), DT)
        np.testing.assert_allclose(tw.as_array(), np.full(6, DT))


class TestPoseError:
    def test_from_identity_is_log_and_position(self):
        phi = np.array([0.2, -0.1, 0.3])
        p = np.array([0.5, 0.0, -0.5])
        err = pose_error(Pose.identity(), Pose(exp_so3(phi), p))
        np.testing.assert_allclose(err[:3], phi, rtol=1e-12)
        np.testing.assert_allclose(err[3:], p, rtol=1e-12)

    def test_is_body_frame(self):
        # a yaw of pi/2 maps a +x offset to the body -y direction... the
        # body-frame position error is R^T (p_to - p_from)
        r = exp_so3([0.0, 0.0, math.pi / 2])
        g_from = Pose(r, np.zeros(3))
        g_to = Pose(r, np.array([1.0, 0.0, 0.0]))
        err = pose_error(g_from, g_to)
        np.testing.assert_allclose(err[:3], np.zeros(3), atol=1e-15)
        np.testing.assert_allclose(err[3:], [0.0, -1.0, 0.0], atol=1e-12)

    def test_zero_for_equal_poses(self):
        g = Pose(exp_so3([0.3, 0.2, 0.1]), np.array([1.0, -1.0, 0.5]))
        np.testing.assert_allclose(pose_error(g, g), np.zeros(6), atol=1e-12)


class TestSlaveController:
    def test_gains_validate_spd(self):
        with pytest.raises(NotSPD):
            SlaveControllerGains(k_p=-np.eye(6), k_d=np.eye(6))
        with pytest.raises(NotSPD):
            SlaveControllerGains(k_p=np.eye(6), k_d=np.zeros((6, 6)))

    def test_force_matches_pd_formula(self):
        gains = SlaveControllerGains(k_p=4.0 * np.eye(6), k_d=0.5 * np.eye(6))
        g_ref = Pose(Rotation.identity(), np.array([0.1, 0.0, 0.0]))
        g_s = Pose.identity()
        v_ref = Twist(np.zeros(3), np.array([0.2, 0.0, 0.0]), Frame.BODY)
        v_s = Twist.zero()
        f = slave_force(gains, g_ref, v_ref, g_s, v_s)
        err = pose_error(g_s, g_ref)
        expected = 4.0 * err + 0.5 * v_ref.as_array()
        np.testing.assert_allclose(f, expected, rtol=1e-14)


class TestOperatorScript:
    def _script(self):
        traj = lambda k: Pose(Rotation.identity(),
                              np.array([0.01 * k, 0.0, 0.0]))
        return OperatorScript(traj, k_h=10.0 * np.eye(6), d_h=2.0 * np.eye(6))

    def test_hand_force_formula(self):
        s = self._script()
        tw = Twist(np.zeros(3), np.array([0.5, 0.0, 0.0]), Frame.BODY)
        f = s.hand_force(3, Pose.identity(), tw)
        err = np.array([0.0, 0.0, 0.0, 0.03, 0.0, 0.0])
        expected = 10.0 * err - 2.0 * tw.as_array()
        np.testing.assert_allclose(f, expected, rtol=1e-12)

    def test_raw_path_matches_public(self):
        s = self._script()
        m = _model(pose=Pose(Rotation.identity(), np.array([0.005, 0.0, 0.0])))
        f_pub = s.hand_force(2, m.pose, m.twist)
        f_raw = s._hand_force_raw(2, m._r, m._p, m._v)
        np.testing.assert_allclose(f_raw, f_pub, rtol=1e-14)

    def test_step_master_pulls_toward_trajectory(self):
        s = self._script()
        m = _model()
        for k in range(200):
            step_master(m, s, np.zeros(6), k, DT)
        # the hand drags the master in +x
        assert m.pose.p[0] > 0.0
        assert abs(m.pose.p[1]) < 1e-12
