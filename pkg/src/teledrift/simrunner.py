"""Deterministic per-tick wiring of the teleoperation loop.

Tick order: master step -> forward push -> forward pop -> compensation
velocity -> slave observer (on the compensated velocity) -> admittance PC ->
frame map -> slave controller and dynamics -> backward push -> backward pop,
master observer, impedance PC -> drift pose update -> log.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .channel import DelayLine, DelayProfile, EnergyLedger, LossModel, Port
from .drift import CompGains, DriftState, _compensation_raw
from .dynamics import (CartesianModel, OperatorScript, SlaveControllerGains,
                       _diag_or_none)
from .errors import NearPiRotation, SimulationError, TeledriftError
from .liegroup import (Pose, Rotation, _I3, _exp_so3_matrix, _log_so3_matrix,
                       _pose_error_raw, exp_so3)
from .tdpa import (PcMode, PoState, _pc_admittance_axes_raw,
                   _pc_impedance_axes_raw, pc_admittance_coupled)

_DRIFT_EPS = 1e-12


@dataclass(frozen=True)
class TrajectorySpec:
    """Per-axis sinusoids with a smooth amplitude envelope.

    amplitude/frequency are 6-vectors, rotational axes first (rad / m and
    Hz).  The envelope ramps up over ramp_s, ramps back down before the
    final settle_s of quiet tail, which gives the compensator a window to
    finish draining accumulated drift.
    """
    amplitude: np.ndarray
    frequency_hz: np.ndarray
    phase: np.ndarray = field(default_factory=lambda: np.zeros(6))
    ramp_s: float = 1.0
    settle_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "amplitude",
                           np.asarray(self.amplitude, dtype=float))
        object.__setattr__(self, "frequency_hz",
                           np.asarray(self.frequency_hz, dtype=float))
        object.__setattr__(self, "phase", np.asarray(self.phase, dtype=float))

    def make_trajectory(self, dt: float, duration: float) -> Callable[[int], Pose]:
        active_end = duration - self.settle_s
        omega = 2.0 * math.pi * self.frequency_hz
        no_rotation = bool(np.all(self.amplitude[:3] == 0.0))
        identity_rot = Rotation.identity()

        def traj(tick: int) -> Pose:
            t = tick * dt
            env = 1.0
            if self.ramp_s > 0.0:
                env = min(env, t / self.ramp_s)
                env = min(env, max(0.0, (active_end - t) / self.ramp_s))
            env = max(env, 0.0)
            x = (env * self.amplitude) * np.sin(omega * t + self.phase)
            rot = identity_rot if no_rotation else exp_so3(x[:3])
            return Pose(rot, x[3:])

        return traj

    def sample_coords(self, dt: float, duration: float) -> np.ndarray:
        """All per-tick exponential coordinates at once, shape (n, 6).

        Row k equals the coordinates traj(k) is built from; vectorized for
        the scenario runner.
        """
        n = int(round(duration / dt))
        t = np.arange(n) * dt
        active_end = duration - self.settle_s
        env = np.ones(n)
        if self.ramp_s > 0.0:
            env = np.minimum(env, t / self.ramp_s)
            env = np.minimum(env, np.maximum(0.0, (active_end - t) / self.ramp_s))
        env = np.maximum(env, 0.0)
        omega = 2.0 * math.pi * self.frequency_hz
        return (env[:, None] * self.amplitude) * np.sin(omega * t[:, None]
                                                        + self.phase)


@dataclass
class ScenarioConfig:
    dt: float
    duration: float
    seed: int
    forward_delay: DelayProfile
    backward_delay: DelayProfile
    forward_loss: LossModel
    backward_loss: LossModel
    pc_mode: PcMode
    trajectory: TrajectorySpec
    master_inertia: np.ndarray
    master_damping: np.ndarray
    hand_stiffness: np.ndarray
    hand_damping: np.ndarray
    slave_inertia: np.ndarray
    slave_damping: np.ndarray
    controller: SlaveControllerGains
    comp_gains: Optional[CompGains] = None
    admittance_pc_enabled: bool = True
    impedance_pc_enabled: bool = True

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        n = self.duration / self.dt
        if abs(n - round(n)) > 1e-9:
            raise ValueError("duration must be an integral number of steps")

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt))


# column layout: name -> width
_LOG_FIELDS = [
    ("tick", 1), ("t_s", 1),
    ("master_pos", 3), ("master_rotvec", 3), ("master_twist", 6),
    ("slave_pos", 3), ("slave_rotvec", 3), ("slave_twist", 6),
    ("v_tilde", 6), ("v_ad", 6), ("v_pc", 6), ("v_sd", 6),
    ("f_s", 6), ("f_hat_m", 6),
    ("w_s", 6), ("w_s_total", 1), ("w_m", 6), ("w_m_total", 1),
    ("w_s_post_pc", 1), ("w_m_post_pc", 1),
    ("em_in_total", 1), ("em_out_total", 1),
    ("es_in_total", 1), ("es_out_total", 1),
    ("e_pc_m_total", 1), ("e_pc_s_total", 1),
    ("p_e", 3), ("phi_e", 3), ("p_e_norm", 1), ("phi_e_norm", 1),
    ("rot_log_valid", 1),
]


class TickLog:
    """Dense per-tick record of every logged quantity, one row per tick."""

    def __init__(self, n_ticks: int):
        self.n_ticks = n_ticks
        self._offsets = {}
        off = 0
        for name, width in _LOG_FIELDS:
            self._offsets[name] = (off, width)
            off += width
        self.width = off
        self.data = np.zeros((n_ticks, off))

    def set(self, row: int, name: str, value) -> None:
        off, width = self._offsets[name]
        self.data[row, off:off + width] = value

    def slices(self) -> dict:
        """name -> slice into a row, for bulk writers."""
        return {name: slice(off, off + width)
                for name, (off, width) in self._offsets.items()}

    def get(self, name: str) -> np.ndarray:
        off, width = self._offsets[name]
        col = self.data[:, off:off + width]
        return col[:, 0] if width == 1 else col

    def column_names(self) -> list:
        names = []
        axis = ["wx", "wy", "wz", "vx", "vy", "vz"]
        for name, width in _LOG_FIELDS:
            if width == 1:
                names.append(name)
            elif width == 3:
                names.extend(f"{name}_{s}" for s in ("x", "y", "z"))
            else:
                names.extend(f"{name}_{s}" for s in axis)
        return names


@dataclass(frozen=True)
class Metrics:
    terminal_drift_pos: float   # m
    terminal_drift_rot: float   # rad
    peak_drift_pos: float
    peak_drift_rot: float
    min_post_pc_energy: float   # J, over both directions and all ticks
    max_force_norm: float       # N / N*m mixed norm of F_s
    pos_rms_error: float        # m, master vs slave position
    gap_count: int              # ticks with positive slave-side energy and
                                # nonzero drift
    gap_count_axes: np.ndarray  # same, per axis (6,)


def _safe_rotvec(r_mat: np.ndarray, fallback: list) -> list:
    try:
        return _log_so3_matrix(r_mat).tolist()
    except NearPiRotation:
        return fallback


def run(cfg: ScenarioConfig) -> tuple:
    """Run one scenario; returns (TickLog, Metrics)."""
    n = cfg.n_ticks
    dt = cfg.dt

    traj = cfg.trajectory.make_trajectory(dt, cfg.duration)
    script = OperatorScript(traj, cfg.hand_stiffness, cfg.hand_damping)
    traj_coords = cfg.trajectory.sample_coords(dt, cfg.duration)
    traj_no_rot = bool(np.all(cfg.trajectory.amplitude[:3] == 0.0))
    identity_r = _I3
    master = CartesianModel(cfg.master_inertia, cfg.master_damping)
    slave = CartesianModel(cfg.slave_inertia, cfg.slave_damping)
    slave_lam_inv_const = None
    if slave.lambda_schedule is None:
        slave_lam_inv_const = np.linalg.inv(slave.lambda_x)

    # payload: 6-vector signal, 6 per-axis in-energies, their scalar total
    forward = DelayLine(13, cfg.forward_delay, cfg.forward_loss, n)
    backward = DelayLine(13, cfg.backward_delay, cfg.backward_loss, n)
    master_ledger = EnergyLedger(6)
    slave_ledger = EnergyLedger(6)
    po = PoState(6)
    ds = DriftState()

    log = TickLog(n)
    log_rows = log.data
    f_master_applied = [0.0] * 6  # corrected feedback from previous tick
    f_s_prev = [0.0] * 6
    zero6 = [0.0] * 6
    zero3 = [0.0] * 3

    comp_on = cfg.comp_gains is not None
    concatenated = cfg.pc_mode is PcMode.CONCATENATED
    k_p_mat = cfg.controller.k_p
    k_d_mat = cfg.controller.k_d
    k_p_diag = _diag_or_none(k_p_mat)
    k_d_diag = _diag_or_none(k_d_mat)
    ctrl_diag = k_p_diag is not None and k_d_diag is not None
    kpl = k_p_diag.tolist() if ctrl_diag else None
    kdl = k_d_diag.tolist() if ctrl_diag else None
    k_h_diag = script._k_h_diag
    d_h_diag = script._d_h_diag
    hand_diag = k_h_diag is not None and d_h_diag is not None
    khl = k_h_diag.tolist() if hand_diag else None
    dhl = d_h_diag.tolist() if hand_diag else None
    traj_list = traj_coords.tolist()
    rng6 = range(6)

    gap_count = 0
    gap_axes = [0, 0, 0, 0, 0, 0]
    sum_sq_pos_err = 0.0
    max_force = 0.0
    peak_p = 0.0
    peak_phi = 0.0
    min_post_pc = math.inf
    last_m_rotvec = zero3
    last_s_rotvec = zero3

    try:
        for k in range(n):
            # (1) master device under hand force and corrected feedback
            ck = traj_list[k]
            if traj_no_rot:
                des_r, des_p = identity_r, ck[3:]
            else:
                des_r, des_p = _exp_so3_matrix(np.asarray(ck[:3])), ck[3:]
            err_h = _pose_error_raw(master._r, master._p, des_r, des_p)
            mv = master._v
            fa = f_master_applied
            if hand_diag:
                f_m_in = [khl[i] * err_h[i] - dhl[i] * mv[i] - fa[i]
                          for i in rng6]
            else:
                f_m_in = (script.k_h @ err_h - script.d_h @ np.asarray(mv)
                          - np.asarray(fa)).tolist()
            master.step_raw(f_m_in, dt)
            v_m = master._v

            # (2) forward line carries the master velocity and the master-in
            # energy ledger (through the previous tick)
            fr = forward.stage_raw(k)
            fr[:6] = v_m
            fr[6:12] = master_ledger._e_in
            fr[12] = master_ledger._e_in_total

            # (3) delayed master velocity and delayed master-in energy
            fwl = forward.pop_raw(k)
            v_tilde = fwl[:6]
            em_in_delayed = fwl[6:12]

            # (4) compensation velocity from the previous-tick drift
            if comp_on:
                w_ad, v_ad_lin = _compensation_raw(ds, cfg.comp_gains, dt)
                v_ad = w_ad + v_ad_lin
                v_checked = [v_tilde[i] + v_ad[i] for i in rng6]
            else:
                v_ad = zero6
                v_checked = v_tilde

            # (5) slave-side observer checks the compensated velocity
            slave_ledger.accumulate(f_s_prev, v_checked, dt, Port.RIGHT)
            es_out = slave_ledger._e_out
            epc_s = po.e_pc_s
            w_s_axes = [em_in_delayed[i] - es_out[i] + epc_s[i] for i in rng6]
            w_s_total = (fwl[12] - slave_ledger._e_out_total
                         + po.e_pc_s_total)

            # (6) admittance PC
            if cfg.admittance_pc_enabled:
                if concatenated:
                    v_pc, diss_s = _pc_admittance_axes_raw(w_s_axes,
                                                           f_s_prev, dt)
                    po.add_slave_dissipation(diss_s)
                else:
                    pc = pc_admittance_coupled(
                        w_s_total, np.asarray(f_s_prev), slave.lambda_x, dt,
                        lambda_x_inv=slave_lam_inv_const
                        if slave_lam_inv_const is not None
                        else slave.inertia_inv(k))
                    v_pc = pc.v_pc.tolist()
                    diss_s = pc.dissipated.tolist()
                    po.add_slave_dissipation(diss_s,
                                             total=pc.dissipated_total)
            else:
                v_pc = zero6
                diss_s = zero6

            # (7) map into the slave-reference frame via Ad(g_e)^-1:
            # w' = R^T w, v' = R^T (v - p x w)
            w0, w1, w2, a0, a1, a2 = [v_checked[i] - v_pc[i] for i in rng6]
            p0, p1, p2 = ds._p_e
            cx0 = a0 - (p1 * w2 - p2 * w1)
            cx1 = a1 - (p2 * w0 - p0 * w2)
            cx2 = a2 - (p0 * w1 - p1 * w0)
            if ds._r_e is identity_r:
                v_sd = [w0, w1, w2, cx0, cx1, cx2]
            else:
                ret = ds._r_e.T
                v_sd = ((ret @ np.asarray([w0, w1, w2])).tolist()
                        + (ret @ np.asarray([cx0, cx1, cx2])).tolist())

            # (8) slave controller and dynamics
            err = _pose_error_raw(slave._r, slave._p, ds._r_d, ds._p_d)
            sv = slave._v
            if ctrl_diag:
                f_s = [kpl[i] * err[i] + kdl[i] * (v_sd[i] - sv[i])
                       for i in rng6]
            else:
                f_s = (k_p_mat @ err
                       + k_d_mat @ (np.asarray(v_sd)
                                    - np.asarray(sv))).tolist()
            slave.step_raw(f_s, dt)

            # (9) backward line carries the wrench and the slave-in energy
            br = backward.stage_raw(k)
            br[:6] = f_s
            br[6:12] = slave_ledger._e_in
            br[12] = slave_ledger._e_in_total

            # (10) master-side observer and impedance PC
            bwl = backward.pop_raw(k)
            f_hat_m = bwl[:6]
            es_in_delayed = bwl[6:12]
            master_ledger.accumulate(f_hat_m, v_m, dt, Port.LEFT)
            em_out = master_ledger._e_out
            epc_m = po.e_pc_m
            w_m_axes = [es_in_delayed[i] - em_out[i] + epc_m[i] for i in rng6]
            w_m_total = (bwl[12] - master_ledger._e_out_total
                         + po.e_pc_m_total)
            if cfg.impedance_pc_enabled:
                f_master_applied, diss_m = _pc_impedance_axes_raw(
                    w_m_axes, v_m, f_hat_m, dt)
                po.add_master_dissipation(diss_m)
            else:
                f_master_applied = f_hat_m
                diss_m = zero6

            # (11) drift bookkeeping (previous-tick drift was used above)
            d_l = ds._phi_e + ds._p_e
            drift_norm = math.sqrt(d_l[3] * d_l[3] + d_l[4] * d_l[4]
                                   + d_l[5] * d_l[5]) + \
                math.sqrt(d_l[0] * d_l[0] + d_l[1] * d_l[1]
                          + d_l[2] * d_l[2])
            if w_s_total > 0.0 and drift_norm > _DRIFT_EPS:
                gap_count += 1
            for i in rng6:
                if w_s_axes[i] > 0.0 and (d_l[i] > _DRIFT_EPS
                                          or d_l[i] < -_DRIFT_EPS):
                    gap_axes[i] += 1
            ds._update_raw(v_tilde, v_sd, dt)

            # (12) log
            p_e_l = ds._p_e
            phi_e_l = ds._phi_e
            p_e_norm = math.sqrt(p_e_l[0] * p_e_l[0] + p_e_l[1] * p_e_l[1]
                                 + p_e_l[2] * p_e_l[2])
            phi_e_norm = math.sqrt(phi_e_l[0] * phi_e_l[0]
                                   + phi_e_l[1] * phi_e_l[1]
                                   + phi_e_l[2] * phi_e_l[2])
            if master._r is identity_r:
                last_m_rotvec = zero3
            else:
                last_m_rotvec = _safe_rotvec(master._r, last_m_rotvec)
            if slave._r is identity_r:
                last_s_rotvec = zero3
            else:
                last_s_rotvec = _safe_rotvec(slave._r, last_s_rotvec)
            w_s_post = w_s_total + sum(diss_s)
            w_m_post = w_m_total + sum(diss_m)

            # one dense row in _LOG_FIELDS order
            row = [float(k), k * dt]
            row += master._p
            row += last_m_rotvec
            row += master._v
            row += slave._p
            row += last_s_rotvec
            row += slave._v
            row += v_tilde
            row += v_ad
            row += v_pc
            row += v_sd
            row += f_s
            row += f_hat_m
            row += w_s_axes
            row.append(w_s_total)
            row += w_m_axes
            row.append(w_m_total)
            row.append(w_s_post)
            row.append(w_m_post)
            row.append(master_ledger._e_in_total)
            row.append(master_ledger._e_out_total)
            row.append(slave_ledger._e_in_total)
            row.append(slave_ledger._e_out_total)
            row.append(po.e_pc_m_total)
            row.append(po.e_pc_s_total)
            row += p_e_l
            row += phi_e_l
            row.append(p_e_norm)
            row.append(phi_e_norm)
            row.append(1.0 if ds.rot_log_valid else 0.0)
            log_rows[k] = row

            f_s_prev = f_s
            mp = master._p
            sp = slave._p
            e0 = mp[0] - sp[0]
            e1 = mp[1] - sp[1]
            e2 = mp[2] - sp[2]
            sum_sq_pos_err += e0 * e0 + e1 * e1 + e2 * e2
            max_force = max(max_force,
                            math.sqrt(f_s[0] * f_s[0] + f_s[1] * f_s[1]
                                      + f_s[2] * f_s[2] + f_s[3] * f_s[3]
                                      + f_s[4] * f_s[4] + f_s[5] * f_s[5]))
            peak_p = max(peak_p, p_e_norm)
            peak_phi = max(peak_phi, phi_e_norm)
            min_post_pc = min(min_post_pc, w_s_post, w_m_post)
    except TeledriftError as exc:
        raise SimulationError(k, str(exc)) from exc

    metrics = Metrics(
        terminal_drift_pos=float(np.linalg.norm(ds.p_e)),
        terminal_drift_rot=float(np.linalg.norm(ds.phi_e)),
        peak_drift_pos=peak_p,
        peak_drift_rot=peak_phi,
        min_post_pc_energy=min_post_pc if n > 0 else 0.0,
        max_force_norm=max_force,
        pos_rms_error=math.sqrt(sum_sq_pos_err / n) if n > 0 else 0.0,
        gap_count=gap_count,
        gap_count_axes=np.asarray(gap_axes, dtype=int),
    )
    return log, metrics


def sweep(cfg: ScenarioConfig, gains: list) -> list:
    """Run the scenario once per gain set (same seed); returns Metrics list."""
    if not gains:
        raise ValueError("gains list must be non-empty")
    results = []
    for g in gains:
        _, m = run(replace(cfg, comp_gains=g))
        results.append(m)
    return results
