"""Drift state, compensation law, and convergence-property tests."""
import math

import numpy as np
import pytest

from teledrift.drift import (CompGains, DriftState, compensation_velocity,
                             predicted_drift_decay, slave_reference_velocity,
                             step_compensation_only)
from teledrift.liegroup import (Frame, Pose, Twist, a_inv_transpose, adjoint,
                                exp_so3)

DT = 1e-3
RNG = np.random.default_rng(77)


def seeded_drift(phi_scale=0.5, p_scale=0.3, rng=RNG):
    phi = rng.normal(size=3)
    phi *= phi_scale / np.linalg.norm(phi)
    p = rng.normal(size=3) * p_scale
    return DriftState(g_d=Pose(exp_so3(phi), p))


class TestCompGains:
    def test_valid_range(self):
        CompGains(k_r=0.5, k_t=0.3 * np.eye(3))
        CompGains(k_r=1.999, k_t=1.999 * np.eye(3))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            CompGains(k_r=2.0, k_t=np.eye(3))
        with pytest.raises(ValueError):
            CompGains(k_r=0.0, k_t=np.eye(3))
        with pytest.raises(ValueError):
            CompGains(k_r=1.0, k_t=2.5 * np.eye(3))

    def test_unchecked_escape_hatch(self):
        CompGains(k_r=2.5, k_t=np.eye(3), unchecked=True)
        CompGains(k_r=0.0, k_t=0.3 * np.eye(3), unchecked=True)

    def test_asymmetric_k_t_rejected(self):
        k_t = np.eye(3)
        k_t[0, 1] = 0.1
        with pytest.raises(ValueError):
            CompGains(k_r=1.0, k_t=k_t)


class TestDriftState:
    def test_identity_start(self):
        ds = DriftState()
        np.testing.assert_array_equal(ds.p_e, np.zeros(3))
        np.testing.assert_array_equal(ds.phi_e, np.zeros(3))
        assert ds.rot_log_valid

    def test_drift_is_relative_pose(self):
        g_dt = Pose(exp_so3(np.array([0.1, 0.2, -0.1])), np.array([1.0, 0, 0]))
        g_d = Pose(exp_so3(np.array([-0.2, 0.1, 0.3])), np.array([0, 0.5, 0]))
        ds = DriftState(g_dtilde=g_dt, g_d=g_d)
        expected = g_dt.inverse() @ g_d
        np.testing.assert_allclose(ds.g_e.r.m, expected.r.m, atol=1e-12)
        np.testing.assert_allclose(ds.p_e, expected.p, atol=1e-12)

    def test_update_integrates_both_poses(self):
        ds = DriftState()
        v_t = Twist(np.array([0.1, 0, 0]), np.array([1.0, 0, 0]))
        v_s = Twist(np.array([0, 0.1, 0]), np.array([0, 1.0, 0]))
        ds.update(v_t, v_s, DT)
        from teledrift.liegroup import integrate_body
        g_dt = integrate_body(Pose.identity(), v_t, DT)
        g_d = integrate_body(Pose.identity(), v_s, DT)
        np.testing.assert_allclose(ds.g_dtilde.p, g_dt.p, atol=1e-15)
        np.testing.assert_allclose(ds.g_d.p, g_d.p, atol=1e-15)

    def test_near_pi_drift_flags_invalid_log(self):
        ds = DriftState(g_d=Pose(exp_so3(np.array([math.pi - 1e-9, 0, 0])),
                                 np.zeros(3)))
        assert not ds.rot_log_valid
        np.testing.assert_array_equal(ds.phi_e, np.zeros(3))


class TestCompensationVelocity:
    def test_translation_only_example(self):
        # phi_E = 0, p_E = 1 cm in x, K_T = I -> v_ad = -10 m/s in x
        ds = DriftState(g_d=Pose(Pose.identity().r, np.array([0.01, 0, 0])))
        gains = CompGains(k_r=1.0, k_t=np.eye(3))
        v_ad = compensation_velocity(ds, gains, DT)
        np.testing.assert_allclose(v_ad.v, [-10.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_array_equal(v_ad.w, np.zeros(3))

    def test_matches_formula(self):
        ds = seeded_drift()
        gains = CompGains(k_r=0.7, k_t=np.diag([0.3, 0.5, 0.9]))
        v_ad = compensation_velocity(ds, gains, DT)
        w_expected = -(0.7 / DT) * ds.phi_e
        v_expected = -(1.0 / DT) * (a_inv_transpose(w_expected * DT)
                                    @ (gains.k_t @ ds.p_e))
        np.testing.assert_allclose(v_ad.w, w_expected, rtol=1e-12)
        np.testing.assert_allclose(v_ad.v, v_expected, rtol=1e-9)

    def test_invalid_rot_log_skips_rotation(self):
        ds = DriftState(g_d=Pose(exp_so3(np.array([math.pi - 1e-9, 0, 0])),
                                 np.array([0.01, 0.02, 0.0])))
        gains = CompGains(k_r=1.0, k_t=0.5 * np.eye(3))
        v_ad = compensation_velocity(ds, gains, DT)
        np.testing.assert_array_equal(v_ad.w, np.zeros(3))
        # translational part proceeds with A(0)^-T = I
        np.testing.assert_allclose(v_ad.v, -(0.5 / DT) * ds.p_e, rtol=1e-12)


class TestSlaveReferenceVelocity:
    def test_identity_drift_is_componentwise(self):
        v_t = Twist(RNG.normal(size=3), RNG.normal(size=3))
        v_ad = Twist(RNG.normal(size=3), RNG.normal(size=3))
        v_pc = Twist(RNG.normal(size=3), RNG.normal(size=3))
        out = slave_reference_velocity(v_t, v_ad, v_pc, Pose.identity())
        np.testing.assert_allclose(
            out.as_array(), v_t.as_array() + v_ad.as_array() - v_pc.as_array())

    def test_adjoint_inverse_mapping(self):
        g_e = Pose(exp_so3(RNG.normal(size=3) * 0.3), RNG.normal(size=3))
        v_t = Twist(RNG.normal(size=3), RNG.normal(size=3))
        out = slave_reference_velocity(v_t, Twist.zero(), Twist.zero(), g_e)
        expected = np.linalg.inv(adjoint(g_e)) @ v_t.as_array()
        np.testing.assert_allclose(out.as_array(), expected, atol=1e-10)

    def test_pure_translation_drift(self):
        p = np.array([0.5, -0.2, 0.1])
        g_e = Pose(Pose.identity().r, p)
        w, v = RNG.normal(size=3), RNG.normal(size=3)
        out = slave_reference_velocity(Twist(w, v), Twist.zero(),
                                       Twist.zero(), g_e)
        np.testing.assert_allclose(out.w, w, atol=1e-12)
        np.testing.assert_allclose(out.v, v - np.cross(p, w), atol=1e-12)


class TestConvergence:
    def test_geometric_decay_matches_closed_form(self):
        for k_r in (0.25, 0.5, 1.5, 1.75):
            gains = CompGains(k_r=k_r, k_t=np.diag([0.3, 0.5, 0.7]))
            ds = seeded_drift()
            phi, p = ds.phi_e.copy(), ds.p_e.copy()
            for _ in range(50):
                phi, p = predicted_drift_decay(phi, p, gains, DT)
                step_compensation_only(ds, gains, DT)
                np.testing.assert_allclose(ds.phi_e, phi, atol=1e-9)
                np.testing.assert_allclose(ds.p_e, p, atol=1e-9)

    def test_rotation_norm_follows_scalar_rate(self):
        k_r = 0.25
        gains = CompGains(k_r=k_r, k_t=0.5 * np.eye(3))
        ds = seeded_drift()
        phi0 = np.linalg.norm(ds.phi_e)
        for n in range(1, 51):
            step_compensation_only(ds, gains, DT)
            expected = abs(1.0 - k_r) ** n
            assert np.linalg.norm(ds.phi_e) / phi0 == pytest.approx(
                expected, rel=1e-7)

    def test_one_step_zeroing(self):
        gains = CompGains(k_r=1.0, k_t=np.eye(3))
        for _ in range(10):
            ds = seeded_drift(phi_scale=RNG.uniform(0.1, math.pi - 0.1),
                              p_scale=1.0)
            step_compensation_only(ds, gains, DT)
            assert np.linalg.norm(ds.phi_e) <= 1e-9
            assert np.linalg.norm(ds.p_e) <= 1e-9

    def test_monotone_contraction_inside_range(self):
        gains = CompGains(k_r=1.8, k_t=np.diag([1.9, 0.1, 1.0]))
        ds = seeded_drift()
        prev_phi = np.linalg.norm(ds.phi_e)
        prev_p = np.linalg.norm(ds.p_e)
        for _ in range(30):
            step_compensation_only(ds, gains, DT)
            cur_phi = np.linalg.norm(ds.phi_e)
            cur_p = np.linalg.norm(ds.p_e)
            if prev_phi > 1e-12:
                assert cur_phi < prev_phi
            if prev_p > 1e-12:
                assert cur_p < prev_p
            prev_phi, prev_p = cur_phi, cur_p

    def test_divergence_outside_range(self):
        gains = CompGains(k_r=2.5, k_t=0.5 * np.eye(3), unchecked=True)
        ds = DriftState(g_d=Pose(exp_so3(np.array([0.01, 0, 0])), np.zeros(3)))
        prev = np.linalg.norm(ds.phi_e)
        for _ in range(10):
            step_compensation_only(ds, gains, DT)
            cur = np.linalg.norm(ds.phi_e)
            assert cur / prev == pytest.approx(1.5, abs=1e-9)
            prev = cur

    def test_boundary_still_contracts(self):
        gains = CompGains(k_r=1.999, k_t=1.999 * np.eye(3))
        ds = seeded_drift()
        prev = np.linalg.norm(ds.phi_e)
        for _ in range(20):
            step_compensation_only(ds, gains, DT)
            cur = np.linalg.norm(ds.phi_e)
            assert cur < prev
            prev = cur

    def test_translation_decay_with_diagonal_gain(self):
        k_t = np.diag([0.25, 0.5, 0.75])
        gains = CompGains(k_r=0.5, k_t=k_t)
        ds = DriftState(g_d=Pose(Pose.identity().r,
                                 np.array([0.1, 0.2, -0.15])))
        p = ds.p_e.copy()
        for _ in range(50):
            # with zero rotational drift the position contracts axis-wise
            p = (np.eye(3) - k_t) @ p
            step_compensation_only(ds, gains, DT)
            np.testing.assert_allclose(ds.p_e, p, atol=1e-9)
