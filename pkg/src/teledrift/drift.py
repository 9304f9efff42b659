"""Drift bookkeeping on SE(3) and the compensation velocity law.

Two poses are integrated from body twists: the delayed-master pose and the
slave-reference pose.  Their relative pose is the accumulated drift, which
the compensator contracts geometrically whenever the passivity condition
leaves room to act.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearPiRotation
from .liegroup import (Frame, Pose, Twist, _I3, _a_inv_transpose_apply,
                       _integrate_body_raw, _log_so3_matrix,
                       _trusted_rotation, adjoint, exp_so3)


@dataclass(frozen=True)
class CompGains:
    """Compensator gains: scalar rotational k_r, diagonal SPD translational k_t.

    Gains inside (0, 2) guarantee contraction; `unchecked` admits values
    outside that range for divergence studies (and k_r = 0 to disable
    rotational compensation).
    """
    k_r: float
    k_t: np.ndarray
    unchecked: bool = False

    def __post_init__(self):
        k_t = np.asarray(self.k_t, dtype=float)
        if k_t.shape != (3, 3):
            raise ValueError("k_t must be a 3x3 matrix")
        object.__setattr__(self, "k_t", k_t)
        d = np.diag(k_t)
        object.__setattr__(self, "_k_t_diag",
                           d.tolist() if np.array_equal(np.diag(d), k_t)
                           else None)
        if self.unchecked:
            return
        if not 0.0 < self.k_r < 2.0:
            raise ValueError(f"k_r = {self.k_r} outside the convergent "
                             "range (0, 2)")
        if np.max(np.abs(k_t - k_t.T)) > 1e-12:
            raise ValueError("k_t must be symmetric")
        eig = np.linalg.eigvalsh(k_t)
        if not (np.all(eig > 0.0) and np.all(eig < 2.0)):
            raise ValueError("eigenvalues of k_t must lie in (0, 2)")


class DriftState:
    """Integrated delayed-master and slave-reference poses and their drift.

    The drift pose is recomputed from the integrated poses after every
    update rather than propagated incrementally, so frame errors cannot
    accumulate.  State is raw matrices internally; Pose views on access.
    """

    def __init__(self, g_dtilde: Pose = None, g_d: Pose = None):
        # positions are plain float lists internally; the shared identity
        # lets zero-rotation steps keep an `is` identity the hot paths test
        # for, skipping exact-identity rotation algebra
        if g_dtilde is None:
            self._r_dt, self._p_dt = _I3, [0.0, 0.0, 0.0]
        else:
            self._r_dt, self._p_dt = g_dtilde.r.m.copy(), g_dtilde.p.tolist()
        if g_d is None:
            self._r_d, self._p_d = _I3, [0.0, 0.0, 0.0]
        else:
            self._r_d, self._p_d = g_d.r.m.copy(), g_d.p.tolist()
        self._r_e = np.eye(3)
        self._p_e = [0.0, 0.0, 0.0]
        self._phi_e = [0.0, 0.0, 0.0]
        self.rot_log_valid = True
        self._refresh()

    @property
    def g_dtilde(self) -> Pose:
        return Pose(_trusted_rotation(self._r_dt), np.asarray(self._p_dt))

    @property
    def g_d(self) -> Pose:
        return Pose(_trusted_rotation(self._r_d), np.asarray(self._p_d))

    @property
    def g_e(self) -> Pose:
        return Pose(_trusted_rotation(self._r_e), np.asarray(self._p_e))

    @property
    def p_e(self) -> np.ndarray:
        return np.asarray(self._p_e)

    @property
    def phi_e(self) -> np.ndarray:
        return np.asarray(self._phi_e)

    def _refresh(self) -> None:
        p_dt = self._p_dt
        p_d = self._p_d
        if self._r_dt is self._r_d:
            # both rotations are one object: the drift rotation is exactly
            # the identity
            self._r_e = _I3
            self._phi_e = [0.0, 0.0, 0.0]
            self.rot_log_valid = True
            if self._r_dt is _I3:
                self._p_e = [p_d[0] - p_dt[0], p_d[1] - p_dt[1],
                             p_d[2] - p_dt[2]]
            else:
                dp = np.asarray(p_d) - np.asarray(p_dt)
                self._p_e = (self._r_dt.T @ dp).tolist()
            return
        rt = self._r_dt.T
        self._r_e = rt @ self._r_d
        self._p_e = (rt @ (np.asarray(p_d) - np.asarray(p_dt))).tolist()
        try:
            self._phi_e = _log_so3_matrix(self._r_e).tolist()
            self.rot_log_valid = True
        except NearPiRotation:
            self._phi_e = [0.0, 0.0, 0.0]
            self.rot_log_valid = False

    def update(self, v_tilde: Twist, v_sd: Twist, dt: float) -> None:
        """Integrate both poses one step and recompute the drift."""
        self._update_raw(v_tilde.as_array().tolist(),
                         v_sd.as_array().tolist(), dt)

    def _update_raw(self, v_tilde6, v_sd6, dt: float) -> None:
        self._r_dt, self._p_dt = _integrate_body_raw(
            self._r_dt, self._p_dt, v_tilde6[:3], v_tilde6[3:], dt)
        self._r_d, self._p_d = _integrate_body_raw(
            self._r_d, self._p_d, v_sd6[:3], v_sd6[3:], dt)
        self._refresh()


def _compensation_raw(ds: DriftState, gains: CompGains, dt: float):
    """(w_ad, v_ad) as plain 3-lists; hot-loop kernel."""
    phi = ds._phi_e
    if ds.rot_log_valid:
        c = -(gains.k_r / dt)
        w_ad = [c * phi[0], c * phi[1], c * phi[2]]
    else:
        w_ad = [0.0, 0.0, 0.0]
    p_e = ds._p_e
    ktd = gains._k_t_diag
    if ktd is not None:
        scaled = [ktd[0] * p_e[0], ktd[1] * p_e[1], ktd[2] * p_e[2]]
    else:
        scaled = (gains.k_t @ np.asarray(p_e)).tolist()
    phi_dt = [w_ad[0] * dt, w_ad[1] * dt, w_ad[2] * dt]
    q = _a_inv_transpose_apply(phi_dt, scaled)
    s = -1.0 / dt
    return w_ad, [s * q[0], s * q[1], s * q[2]]


def compensation_velocity(ds: DriftState, gains: CompGains, dt: float) -> Twist:
    """Drift-compensation body twist from the previous-tick drift.

    w_ad = -(k_r / dt) phi_E, skipped when the rotational log is invalid;
    v_ad = -(1 / dt) A(w_ad dt)^-T K_T p_E.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    w_ad, v_ad = _compensation_raw(ds, gains, dt)
    return Twist(np.asarray(w_ad), np.asarray(v_ad), Frame.BODY)


def slave_reference_velocity(v_tilde: Twist, v_ad: Twist, v_pc: Twist,
                             g_e: Pose) -> Twist:
    """Map the compensated, passivated velocity into the slave-reference
    frame: V_sd = Ad(g_e)^-1 (V~ + V_ad - V_pc)."""
    combined = v_tilde.as_array() + v_ad.as_array() - v_pc.as_array()
    mapped = adjoint(g_e.inverse()) @ combined
    return Twist(mapped[:3], mapped[3:], Frame.BODY)


def predicted_drift_decay(phi_e: np.ndarray, p_e: np.ndarray,
                          gains: CompGains, dt: float):
    """Closed-form next-step drift under pure compensation.

    phi_E(k) = (1 - k_r) phi_E(k-1);
    p_E(k) = exp_so3(w_ad dt) (I - K_T) p_E(k-1).
    Serves as the analytic oracle for the simulated pipeline.
    """
    phi_next = (1.0 - gains.k_r) * np.asarray(phi_e, dtype=float)
    w_ad_dt = -gains.k_r * np.asarray(phi_e, dtype=float)
    p_next = exp_so3(w_ad_dt).m @ ((np.eye(3) - gains.k_t) @ p_e)
    return phi_next, p_next


def step_compensation_only(ds: DriftState, gains: CompGains, dt: float) -> None:
    """Advance one tick with zero master velocity and no PC action.

    Convenience for convergence studies: applies the compensation law and
    integrates both poses, mirroring the full pipeline with the channel and
    passivity controller quiescent.
    """
    v_ad = compensation_velocity(ds, gains, dt)
    v_sd = slave_reference_velocity(Twist.zero(), v_ad, Twist.zero(), ds.g_e)
    ds.update(Twist.zero(), v_sd, dt)
