"""Command-line front end: run, sweep, and check subcommands with CSV export.

Exit codes: 0 success, 2 configuration error, 3 simulation error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import drift, liegroup, tdpa
from .config import load_gains, load_scenario
from .errors import ConfigError, SimulationError
from .simrunner import Metrics, TickLog, run, sweep

_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FMT % x


def write_log_csv(log: TickLog, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(log.column_names()) + "\n")
        for row in log.data:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


_METRIC_COLUMNS = [
    "terminal_drift_pos_m", "terminal_drift_rot_rad",
    "peak_drift_pos_m", "peak_drift_rot_rad",
    "min_post_pc_energy_j", "max_force_norm", "pos_rms_error_m",
    "gap_count",
]


def _metrics_row(m: Metrics) -> list:
    return [m.terminal_drift_pos, m.terminal_drift_rot,
            m.peak_drift_pos, m.peak_drift_rot,
            m.min_post_pc_energy, m.max_force_norm, m.pos_rms_error,
            m.gap_count]


def write_metrics_csv(m: Metrics, path: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(_METRIC_COLUMNS) + "\n")
        fh.write(",".join(_fmt(x) for x in _metrics_row(m)) + "\n")


def write_summary(m: Metrics, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"terminal drift: {m.terminal_drift_pos:.6g} m, "
                 f"{m.terminal_drift_rot:.6g} rad\n")
        fh.write(f"peak drift: {m.peak_drift_pos:.6g} m, "
                 f"{m.peak_drift_rot:.6g} rad\n")
        fh.write(f"min post-PC observed energy: "
                 f"{m.min_post_pc_energy:.6g} J\n")
        fh.write(f"max slave force norm: {m.max_force_norm:.6g}\n")
        fh.write(f"position RMS error: {m.pos_rms_error:.6g} m\n")
        fh.write(f"passivity gap count: {m.gap_count}\n")


def cmd_run(scenario_path: str, out_dir: str) -> int:
    try:
        cfg = load_scenario(scenario_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        log, metrics = run(cfg)
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 3
    os.makedirs(out_dir, exist_ok=True)
    write_log_csv(log, os.path.join(out_dir, "log.csv"))
    write_metrics_csv(metrics, os.path.join(out_dir, "metrics.csv"))
    write_summary(metrics, os.path.join(out_dir, "summary.txt"))
    return 0


def cmd_sweep(scenario_path: str, gains_path: str, out_dir: str) -> int:
    try:
        cfg = load_scenario(scenario_path)
        gains = load_gains(gains_path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        results = sweep(cfg, gains)
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 3
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="\n") as fh:
        fh.write(",".join(
            ["k_r", "k_t_xx", "k_t_yy", "k_t_zz"] + _METRIC_COLUMNS) + "\n")
        for g, m in zip(gains, results):
            row = [g.k_r, g.k_t[0, 0], g.k_t[1, 1], g.k_t[2, 2]]
            row += _metrics_row(m)
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return 0


# ---------------------------------------------------------------------------
# self-check suites

def _suite_exp_log_roundtrip() -> bool:
    rng = np.random.default_rng(11)
    for _ in range(2000):
        phi = rng.normal(size=3)
        norm = np.linalg.norm(phi)
        phi *= rng.uniform(0.0, math.pi - 1e-3) / max(norm, 1e-30)
        back = liegroup.log_so3(liegroup.exp_so3(phi))
        if np.linalg.norm(back - phi) > 1e-9:
            return False
    return True


def _suite_a_inv_transpose_identity() -> bool:
    rng = np.random.default_rng(12)
    for _ in range(2000):
        phi = rng.normal(size=3)
        phi *= rng.uniform(1e-7, 3.0) / np.linalg.norm(phi)
        lhs = liegroup.a_inv_transpose(phi)
        rhs = liegroup.a_inv(phi) @ liegroup.exp_so3(phi).m
        if np.max(np.abs(lhs - rhs)) > 1e-10:
            return False
    return True


def _suite_geometric_decay_k_r() -> bool:
    dt = 1e-3
    for k_r in (0.25, 0.5, 1.5):
        gains = drift.CompGains(k_r=k_r, k_t=0.5 * np.eye(3))
        phi0 = np.array([0.3, -0.2, 0.1])
        ds = drift.DriftState(g_d=liegroup.Pose(liegroup.exp_so3(phi0),
                                                np.array([0.01, 0.02, -0.01])))
        for n in range(1, 21):
            drift.step_compensation_only(ds, gains, dt)
            expected = abs(1.0 - k_r) ** n * np.linalg.norm(phi0)
            got = np.linalg.norm(ds.phi_e)
            if abs(got - expected) > 1e-7 * max(expected, 1e-12):
                return False
    return True


def _suite_exact_dissipation() -> bool:
    rng = np.random.default_rng(13)
    dt = 1e-3
    for _ in range(500):
        w = -rng.uniform(1e-6, 1e-2, size=6)
        f = rng.normal(size=6)
        res = tdpa.pc_admittance_concatenated(w, f, dt)
        active = np.abs(f) > tdpa.EPS_EFFORT
        if np.max(np.abs(res.dissipated[active] + w[active])) > 1e-12:
            return False
        lam = np.diag(rng.uniform(0.5, 3.0, size=6))
        res = tdpa.pc_admittance_coupled(float(w.sum()), f, lam, dt)
        if abs(res.dissipated.sum() + w.sum()) > 1e-12:
            return False
    return True


_SUITES = [
    ("exp_log_roundtrip", _suite_exp_log_roundtrip),
    ("A_inv_transpose_identity", _suite_a_inv_transpose_identity),
    ("geometric_decay_k_r", _suite_geometric_decay_k_r),
    ("exact_dissipation", _suite_exact_dissipation),
]


def cmd_check() -> int:
    ok = True
    for name, fn in _SUITES:
        passed = fn()
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="teledrift",
        description="Deterministic time-delayed bilateral teleoperation "
                    "simulator with TDPA passivity control and SE(3) drift "
                    "compensation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario and export CSV logs")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", required=True, help="output directory")

    p_sweep = sub.add_parser("sweep", help="run a scenario per gain set")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--gains", required=True, help="gains TOML file")
    p_sweep.add_argument("--out", required=True, help="output directory")

    sub.add_parser("check", help="run the embedded invariant suites")

    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args.scenario, args.out)
    if args.command == "sweep":
        return cmd_sweep(args.scenario, args.gains, args.out)
    return cmd_check()


if __name__ == "__main__":
    sys.exit(main())
