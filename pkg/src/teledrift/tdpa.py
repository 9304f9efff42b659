"""Passivity observers and passivity controllers.

The observer tracks the directional channel energy including what the
passivity controllers already dissipated.  The slave-side admittance PC
removes velocity (per-axis concatenated form, or inertia-weighted coupled
form); the master-side impedance PC adds damping force.  In every active
case the controller dissipates exactly the observed deficit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NotSPD

EPS_EFFORT = 1e-9  # guard on division by effort/flow
_SPD_SYM_TOL = 1e-10


class PcMode(Enum):
    CONCATENATED = "concatenated"
    COUPLED = "coupled"


@dataclass
class PoState:
    """Cumulative PC-dissipated energy per direction (joules).

    Per-axis accumulators serve the concatenated observers; scalar totals
    serve the coupled observer.  Both only ever increase.
    """
    n_axes: int = 6
    e_pc_m: list = None
    e_pc_s: list = None
    e_pc_m_total: float = 0.0
    e_pc_s_total: float = 0.0

    def __post_init__(self):
        if self.e_pc_m is None:
            self.e_pc_m = [0.0] * self.n_axes
        if self.e_pc_s is None:
            self.e_pc_s = [0.0] * self.n_axes

    def add_slave_dissipation(self, dissipated, total: float = None) -> None:
        d = dissipated.tolist() if isinstance(dissipated, np.ndarray) \
            else dissipated
        e = self.e_pc_s
        for i in range(len(d)):
            e[i] += d[i]
        self.e_pc_s_total += sum(d) if total is None else total

    def add_master_dissipation(self, dissipated) -> None:
        d = dissipated.tolist() if isinstance(dissipated, np.ndarray) \
            else dissipated
        e = self.e_pc_m
        for i in range(len(d)):
            e[i] += d[i]
        self.e_pc_m_total += sum(d)


def observe(e_in_remote_delayed, e_out_local, e_pc_prev):
    """W(k) = E_in(k - T(k)) - E_out(k) + E_PC(k-1), per axis or total."""
    return e_in_remote_delayed - e_out_local + e_pc_prev


@dataclass(frozen=True)
class AdmittancePcResult:
    v_pc: np.ndarray        # velocity removed from the reference (6,)
    dissipated: np.ndarray  # per-axis dissipated energy this tick (6,), J
    # Exact scalar booked by the coupled form (the per-axis split only sums
    # to it up to rounding); None means "sum the per-axis entries".
    dissipated_total: float = None


@dataclass(frozen=True)
class ImpedancePcResult:
    f_pc: np.ndarray        # corrected force applied to the master (6,)
    dissipated: np.ndarray  # per-axis dissipated energy this tick (6,), J


def _pc_admittance_axes_raw(w_l: list, f_l: list, dt: float):
    """List-in/list-out kernel behind pc_admittance_concatenated."""
    n = len(f_l)
    v_pc = [0.0] * n
    dissipated = [0.0] * n
    for i in range(n):
        fi = f_l[i]
        if w_l[i] < 0.0 and (fi > EPS_EFFORT or fi < -EPS_EFFORT):
            beta = -w_l[i] / (dt * fi * fi)
            v_pc[i] = beta * fi
            # dt * fi * v_pc[i] up to rounding; booked exactly so the
            # post-PC balance closes bit-for-bit on active axes
            dissipated[i] = -w_l[i]
    return v_pc, dissipated


def pc_admittance_concatenated(w_s_axes: np.ndarray, f_s: np.ndarray,
                               dt: float) -> AdmittancePcResult:
    """Per-axis damping beta_i = -W_i / (dt F_i^2) on axes with a deficit.

    Axes where |F_i| <= EPS_EFFORT are left alone; the deficit simply
    persists in the observer.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    v_pc, dissipated = _pc_admittance_axes_raw(
        np.asarray(w_s_axes, dtype=float).tolist(),
        np.asarray(f_s, dtype=float).tolist(), dt)
    return AdmittancePcResult(v_pc=np.asarray(v_pc),
                              dissipated=np.asarray(dissipated))


def check_spd(m: np.ndarray, name: str = "matrix") -> None:
    if np.max(np.abs(m - m.T)) > _SPD_SYM_TOL:
        raise NotSPD(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise NotSPD(f"{name} is not positive definite") from None


def pc_admittance_coupled(w_s_total: float, f_s: np.ndarray,
                          lambda_x: np.ndarray, dt: float,
                          lambda_x_inv: np.ndarray = None) -> AdmittancePcResult:
    """Inertia-weighted damping beta = d_f * lambda_x^-1 acting on all axes.

    The force norm uses the lambda_x^-1 metric, which makes the total
    dissipation dt * F^T beta F equal the deficit exactly.  An inverse may be
    passed in to skip the SPD check and factorization in hot loops.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if lambda_x_inv is None:
        check_spd(lambda_x, "lambda_x")
        lambda_x_inv = np.linalg.inv(lambda_x)
    if w_s_total >= 0.0:
        return AdmittancePcResult(v_pc=np.zeros_like(f_s),
                                  dissipated=np.zeros_like(f_s))
    lam_f = lambda_x_inv @ f_s
    norm_f = float(f_s @ lam_f)
    if norm_f <= EPS_EFFORT:
        return AdmittancePcResult(v_pc=np.zeros_like(f_s),
                                  dissipated=np.zeros_like(f_s))
    d_f = -w_s_total / (dt * norm_f)
    v_pc = d_f * lam_f
    return AdmittancePcResult(v_pc=v_pc, dissipated=dt * f_s * v_pc,
                              dissipated_total=-w_s_total)


def _pc_impedance_axes_raw(w_l: list, v_l: list, f_hat_l: list, dt: float):
    """List-in/list-out kernel behind pc_impedance_concatenated."""
    n = len(v_l)
    f_pc = list(f_hat_l)
    dissipated = [0.0] * n
    for i in range(n):
        vi = v_l[i]
        if w_l[i] < 0.0 and (vi > EPS_EFFORT or vi < -EPS_EFFORT):
            alpha = -w_l[i] / (dt * vi * vi)
            f_pc[i] += alpha * vi
            # dt * alpha * vi^2 up to rounding; booked exactly
            dissipated[i] = -w_l[i]
    return f_pc, dissipated


def pc_impedance_concatenated(w_m_axes: np.ndarray, v_m: np.ndarray,
                              f_hat: np.ndarray, dt: float) -> ImpedancePcResult:
    """Master-side dual of the admittance PC: per-axis damping added to the
    delayed force so the correction opposes master motion.

    alpha_i = -W_i / (dt v_i^2) on deficit axes; dissipated_i = dt alpha v^2.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    f_pc, dissipated = _pc_impedance_axes_raw(
        np.asarray(w_m_axes, dtype=float).tolist(),
        np.asarray(v_m, dtype=float).tolist(),
        np.asarray(f_hat, dtype=float).tolist(), dt)
    return ImpedancePcResult(f_pc=np.asarray(f_pc),
                             dissipated=np.asarray(dissipated))
