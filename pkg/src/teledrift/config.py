"""Scenario file loading and validation.

Scenario files are TOML documents with units spelled out in key names
(dt_s, base_delay_ms, ...).  Unknown keys are rejected; every validation
error names the offending key path.
"""
from __future__ import annotations

import math
import os
import sys
from importlib import resources

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .channel import DelayKind, DelayProfile, LossModel
from .drift import CompGains
from .dynamics import SlaveControllerGains
from .errors import ConfigError
from .simrunner import ScenarioConfig, TrajectorySpec
from .tdpa import PcMode

_SCHEMA = {
    "simulation": {"dt_s": float, "duration_s": float, "seed": int},
    "channel": {
        "forward": {"kind": str, "base_delay_ms": float, "amplitude_ms": float,
                    "period_ms": float, "seed": int},
        "backward": {"kind": str, "base_delay_ms": float, "amplitude_ms": float,
                     "period_ms": float, "seed": int},
        "loss_forward": {"drop_probability": float, "seed": int},
        "loss_backward": {"drop_probability": float, "seed": int},
    },
    "pc": {"mode": str, "admittance_enabled": bool, "impedance_enabled": bool},
    "compensation": {"enabled": bool, "k_r": float, "k_t_diag": list,
                     "allow_nonconvergent": bool},
    "master": {
        "inertia_diag": list, "damping_diag": list,
        "hand": {"stiffness_diag": list, "damping_diag": list},
    },
    "slave": {
        "inertia_diag": list, "damping_diag": list,
        "controller": {"kp_diag": list, "kd_diag": list},
    },
    "trajectory": {"amplitude_rot_rad": list, "amplitude_pos_m": list,
                   "frequency_rot_hz": list, "frequency_pos_hz": list,
                   "phase_rot_rad": list, "phase_pos_rad": list,
                   "ramp_s": float, "settle_s": float},
}

_OPTIONAL = {
    "channel.forward.amplitude_ms", "channel.forward.period_ms",
    "channel.forward.seed",
    "channel.backward.amplitude_ms", "channel.backward.period_ms",
    "channel.backward.seed",
    "channel.loss_forward", "channel.loss_backward",
    "pc.admittance_enabled", "pc.impedance_enabled",
    "compensation.allow_nonconvergent",
    "trajectory.phase_rot_rad", "trajectory.phase_pos_rad",
    "trajectory.settle_s",
}


def _check_keys(doc: dict, schema: dict, path: str = "") -> None:
    for key, val in doc.items():
        full = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key: {full}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{full}: expected a table")
            _check_keys(val, expected, full)
        elif expected is float:
            if not isinstance(val, (int, float)) or isinstance(val, bool):
                raise ConfigError(f"{full}: expected a number")
        elif expected is int:
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError(f"{full}: expected an integer")
        elif expected is bool:
            if not isinstance(val, bool):
                raise ConfigError(f"{full}: expected a boolean")
        elif expected is str:
            if not isinstance(val, str):
                raise ConfigError(f"{full}: expected a string")
        elif expected is list:
            if not isinstance(val, list):
                raise ConfigError(f"{full}: expected an array")
    for key in schema:
        full = f"{path}.{key}" if path else key
        if key not in doc and full not in _OPTIONAL:
            raise ConfigError(f"missing key: {full}")


def _vec(doc: dict, path: str, key: str, length: int) -> np.ndarray:
    vals = doc[key]
    if len(vals) != length or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool)
            for x in vals):
        raise ConfigError(f"{path}.{key}: expected {length} numbers")
    return np.asarray(vals, dtype=float)


def _delay_profile(tbl: dict, dt: float, path: str) -> DelayProfile:
    try:
        kind = DelayKind(tbl["kind"])
    except ValueError:
        raise ConfigError(
            f"{path}.kind: must be one of "
            f"{[k.value for k in DelayKind]}") from None

    def to_samples(key, default=None):
        if key not in tbl:
            if default is None:
                raise ConfigError(f"missing key: {path}.{key}")
            return default
        ms = tbl[key]
        if ms < 0:
            raise ConfigError(f"{path}.{key}: must be non-negative")
        return int(round(ms / 1000.0 / dt))

    base = to_samples("base_delay_ms")
    if base < 1:
        raise ConfigError(f"{path}.base_delay_ms: must be at least one "
                          f"sample ({dt * 1000.0:g} ms)")
    amp = to_samples("amplitude_ms", 0)
    period = to_samples("period_ms", 1000)
    try:
        return DelayProfile(kind=kind, base_delay=base, amplitude=amp,
                            period=max(period, 1), seed=tbl.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def load_scenario(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file into a ScenarioConfig.

    The SIM_SEED environment variable, when set, overrides the file seed.
    """
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"scenario file is not valid TOML: {exc}") from None
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    _check_keys(doc, _SCHEMA)

    sim = doc["simulation"]
    dt = float(sim["dt_s"])
    if dt <= 0.0:
        raise ConfigError("simulation.dt_s: must be positive")
    duration = float(sim["duration_s"])
    if duration <= 0.0:
        raise ConfigError("simulation.duration_s: must be positive")
    n = duration / dt
    if abs(n - round(n)) > 1e-9:
        raise ConfigError("simulation.duration_s: must be an integral "
                          "number of dt_s steps")
    seed = int(os.environ.get("SIM_SEED", sim["seed"]))

    ch = doc["channel"]
    fwd = _delay_profile(ch["forward"], dt, "channel.forward")
    bwd = _delay_profile(ch["backward"], dt, "channel.backward")

    def loss(key):
        tbl = ch.get(key, {})
        try:
            return LossModel(drop_probability=float(
                tbl.get("drop_probability", 0.0)),
                seed=int(tbl.get("seed", 0)))
        except ValueError as exc:
            raise ConfigError(f"channel.{key}: {exc}") from None

    pc = doc["pc"]
    try:
        mode = PcMode(pc["mode"])
    except ValueError:
        raise ConfigError(f"pc.mode: must be one of "
                          f"{[m.value for m in PcMode]}") from None

    comp = doc["compensation"]
    comp_gains = None
    if comp["enabled"]:
        k_t = np.diag(_vec(comp, "compensation", "k_t_diag", 3))
        try:
            comp_gains = CompGains(
                k_r=float(comp["k_r"]), k_t=k_t,
                unchecked=bool(comp.get("allow_nonconvergent", False)))
        except ValueError as exc:
            raise ConfigError(f"compensation: {exc}") from None

    mas = doc["master"]
    sla = doc["slave"]
    for tbl, pth, key in ((mas, "master", "inertia_diag"),
                          (sla, "slave", "inertia_diag")):
        if np.any(_vec(tbl, pth, key, 6) <= 0.0):
            raise ConfigError(f"{pth}.{key}: entries must be positive")

    try:
        controller = SlaveControllerGains(
            k_p=np.diag(_vec(sla["controller"], "slave.controller",
                             "kp_diag", 6)),
            k_d=np.diag(_vec(sla["controller"], "slave.controller",
                             "kd_diag", 6)))
    except Exception as exc:
        raise ConfigError(f"slave.controller: {exc}") from None

    tr = doc["trajectory"]
    amp = np.concatenate([_vec(tr, "trajectory", "amplitude_rot_rad", 3),
                          _vec(tr, "trajectory", "amplitude_pos_m", 3)])
    freq = np.concatenate([_vec(tr, "trajectory", "frequency_rot_hz", 3),
                           _vec(tr, "trajectory", "frequency_pos_hz", 3)])
    phase = np.zeros(6)
    if "phase_rot_rad" in tr:
        phase[:3] = _vec(tr, "trajectory", "phase_rot_rad", 3)
    if "phase_pos_rad" in tr:
        phase[3:] = _vec(tr, "trajectory", "phase_pos_rad", 3)
    ramp = float(tr["ramp_s"])
    if ramp < 0.0:
        raise ConfigError("trajectory.ramp_s: must be non-negative")
    settle = float(tr.get("settle_s", 0.0))
    if settle < 0.0 or settle >= duration:
        raise ConfigError("trajectory.settle_s: must be in [0, duration_s)")

    return ScenarioConfig(
        dt=dt,
        duration=duration,
        seed=seed,
        forward_delay=fwd,
        backward_delay=bwd,
        forward_loss=loss("loss_forward"),
        backward_loss=loss("loss_backward"),
        pc_mode=mode,
        trajectory=TrajectorySpec(amplitude=amp, frequency_hz=freq,
                                  phase=phase, ramp_s=ramp, settle_s=settle),
        master_inertia=np.diag(_vec(mas, "master", "inertia_diag", 6)),
        master_damping=np.diag(_vec(mas, "master", "damping_diag", 6)),
        hand_stiffness=np.diag(_vec(mas["hand"], "master.hand",
                                    "stiffness_diag", 6)),
        hand_damping=np.diag(_vec(mas["hand"], "master.hand",
                                  "damping_diag", 6)),
        slave_inertia=np.diag(_vec(sla, "slave", "inertia_diag", 6)),
        slave_damping=np.diag(_vec(sla, "slave", "damping_diag", 6)),
        controller=controller,
        comp_gains=comp_gains,
        admittance_pc_enabled=bool(pc.get("admittance_enabled", True)),
        impedance_pc_enabled=bool(pc.get("impedance_enabled", True)),
    )


def load_gains(path: str) -> list:
    """Parse a gains file: an array of [[gains]] tables with k_r, k_t_diag."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read gains file: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"gains file is not valid TOML: {exc}") from None
    entries = doc.get("gains")
    if not isinstance(entries, list) or not entries:
        raise ConfigError("gains: expected a non-empty array of tables")
    out = []
    for i, tbl in enumerate(entries):
        path_i = f"gains[{i}]"
        if not isinstance(tbl, dict):
            raise ConfigError(f"{path_i}: expected a table")
        for key in tbl:
            if key not in ("k_r", "k_t_diag", "allow_nonconvergent"):
                raise ConfigError(f"unknown key: {path_i}.{key}")
        if "k_r" not in tbl or "k_t_diag" not in tbl:
            raise ConfigError(f"{path_i}: requires k_r and k_t_diag")
        try:
            out.append(CompGains(
                k_r=float(tbl["k_r"]),
                k_t=np.diag(_vec(tbl, path_i, "k_t_diag", 3)),
                unchecked=bool(tbl.get("allow_nonconvergent", False))))
        except ValueError as exc:
            raise ConfigError(f"{path_i}: {exc}") from None
    return out


def bundled_scenario_path(name: str):
    """Filesystem path of a bundled scenario (e.g. 'falcon_200ms')."""
    return resources.files("teledrift").joinpath(
        "scenarios", f"{name}.scenario")
