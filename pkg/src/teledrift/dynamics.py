"""Device models: decoupled Cartesian rigid-body dynamics, the slave-side
PD controller, and a scripted operator driving the master device."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NotSPD
from .liegroup import (Frame, Pose, Twist, _I3, _integrate_body_raw,
                       _pose_error_raw, _trusted_rotation, log_so3)
from .tdpa import check_spd


def _diag_or_none(m: np.ndarray):
    """Diagonal of m as a vector when m is exactly diagonal, else None.

    Lets hot paths replace 6x6 matmuls with element-wise products.
    """
    d = np.diag(m)
    return d if np.array_equal(np.diag(d), m) else None


class CartesianModel:
    """Decoupled Cartesian task dynamics: lambda_x dv/dt + mu_x v = F.

    Stepped with semi-implicit Euler; the pose integrates the body twist.
    lambda_x may be a constant SPD matrix or a tick-indexed schedule.
    State is kept as raw arrays; pose/twist views are built on access.
    """

    def __init__(self, lambda_x: np.ndarray, mu_x: np.ndarray = None,
                 pose: Pose = None, twist: Twist = None,
                 lambda_schedule: Optional[Callable[[int], np.ndarray]] = None):
        lambda_x = np.asarray(lambda_x, dtype=float)
        check_spd(lambda_x, "lambda_x")
        self.lambda_x = lambda_x
        self._lambda_inv = np.linalg.inv(lambda_x)
        self.mu_x = (np.asarray(mu_x, dtype=float) if mu_x is not None
                     else np.zeros((6, 6)))
        self._lam_inv_diag = _diag_or_none(self._lambda_inv)
        self._mu_diag = _diag_or_none(self.mu_x)
        self._diag_fast = (self._lam_inv_diag is not None
                           and self._mu_diag is not None)
        if self._diag_fast:
            self._lam_inv_l = self._lam_inv_diag.tolist()
            self._mu_l = self._mu_diag.tolist()
        # positions and twists are plain float lists internally; the shared
        # identity keeps an `is` identity through zero-rotation steps,
        # enabling exact-identity fast paths
        if pose is None:
            self._r, self._p = _I3, [0.0, 0.0, 0.0]
        else:
            self._r = pose.r.m.copy()
            self._p = pose.p.tolist()
        self._v = (twist.as_array().tolist() if twist is not None
                   else [0.0] * 6)
        self.lambda_schedule = lambda_schedule
        self.tick = 0

    @property
    def pose(self) -> Pose:
        return Pose(_trusted_rotation(self._r), np.asarray(self._p))

    @property
    def twist(self) -> Twist:
        return Twist(np.asarray(self._v[:3]), np.asarray(self._v[3:]),
                     Frame.BODY)

    def velocity(self) -> np.ndarray:
        """Body twist as a raw 6-vector (angular first)."""
        return np.asarray(self._v)

    def inertia(self, tick: int) -> np.ndarray:
        if self.lambda_schedule is not None:
            lam = np.asarray(self.lambda_schedule(tick), dtype=float)
            check_spd(lam, "lambda_x(tick)")
            return lam
        return self.lambda_x

    def inertia_inv(self, tick: int) -> np.ndarray:
        if self.lambda_schedule is not None:
            return np.linalg.inv(self.inertia(tick))
        return self._lambda_inv

    def step(self, f: np.ndarray, dt: float) -> Twist:
        """Semi-implicit Euler: update velocity from the wrench, then pose."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.step_raw(f, dt)
        return self.twist

    def step_raw(self, f, dt: float) -> None:
        """step() without validation or the Twist view; hot-loop path.

        Accepts the wrench as an ndarray or a plain list.
        """
        v = self._v
        if self.lambda_schedule is None and self._diag_fast:
            fl = f.tolist() if isinstance(f, np.ndarray) else f
            li = self._lam_inv_l
            mu = self._mu_l
            v = [v[i] + dt * (li[i] * (fl[i] - mu[i] * v[i]))
                 for i in range(6)]
        else:
            if self.lambda_schedule is None:
                lam_inv = self._lambda_inv
            else:
                lam_inv = self.inertia_inv(self.tick)
            va = np.asarray(v)
            fa = np.asarray(f, dtype=float)
            v = (va + dt * (lam_inv @ (fa - self.mu_x @ va))).tolist()
        self._v = v
        self._r, self._p = _integrate_body_raw(self._r, self._p,
                                               v[:3], v[3:], dt)
        self.tick += 1


def step_cartesian(m: CartesianModel, f: np.ndarray, dt: float) -> Twist:
    return m.step(f, dt)


@dataclass(frozen=True)
class SlaveControllerGains:
    k_p: np.ndarray  # 6x6 SPD stiffness
    k_d: np.ndarray  # 6x6 SPD damping

    def __post_init__(self):
        k_p = np.asarray(self.k_p, dtype=float)
        k_d = np.asarray(self.k_d, dtype=float)
        check_spd(k_p, "k_p")
        check_spd(k_d, "k_d")
        object.__setattr__(self, "k_p", k_p)
        object.__setattr__(self, "k_d", k_d)


def pose_error(g_from: Pose, g_to: Pose) -> np.ndarray:
    """Body-frame 6-vector error (rotation log; position) of g_from^-1 g_to."""
    return np.asarray(_pose_error_raw(g_from.r.m, g_from.p, g_to.r.m, g_to.p))


def slave_force(gains: SlaveControllerGains, g_ref: Pose, v_ref: Twist,
                g_s: Pose, v_s: Twist) -> np.ndarray:
    """Body-frame PD wrench tracking the reference pose and velocity.

    Raises NearPiRotation on a pathological reference error; the scenario
    runner turns that into a diagnostic abort.
    """
    err = pose_error(g_s, g_ref)
    return gains.k_p @ err + gains.k_d @ (v_ref.as_array() - v_s.as_array())


@dataclass
class OperatorScript:
    """Scripted hand: a desired-pose trajectory rendered through a hand
    impedance (stiffness k_h, damping d_h) acting on the master device."""
    trajectory: Callable[[int], Pose]
    k_h: np.ndarray  # 6x6 stiffness
    d_h: np.ndarray  # 6x6 damping

    def __post_init__(self):
        self.k_h = np.asarray(self.k_h, dtype=float)
        self.d_h = np.asarray(self.d_h, dtype=float)
        self._k_h_diag = _diag_or_none(self.k_h)
        self._d_h_diag = _diag_or_none(self.d_h)

    def hand_force(self, tick: int, pose: Pose, twist: Twist) -> np.ndarray:
        err = pose_error(pose, self.trajectory(tick))
        return self.k_h @ err - self.d_h @ twist.as_array()

    def _hand_force_raw(self, tick: int, r, p, v) -> np.ndarray:
        des = self.trajectory(tick)
        err = np.asarray(_pose_error_raw(r, p, des.r.m, des.p))
        va = np.asarray(v, dtype=float)
        if self._k_h_diag is not None and self._d_h_diag is not None:
            return self._k_h_diag * err - self._d_h_diag * va
        return self.k_h @ err - self.d_h @ va


def step_master(m: CartesianModel, script: OperatorScript,
                f_feedback: np.ndarray, tick: int, dt: float) -> Twist:
    """Drive the master with the scripted hand force plus channel feedback."""
    f_h = script._hand_force_raw(tick, m._r, m._p, m._v)
    return m.step(f_h + f_feedback, dt)
