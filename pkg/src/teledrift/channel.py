"""Time Delay Power Network plumbing: seeded delay lines with packet loss and
per-port cumulative energy ledgers.

A delay line carries an arbitrary-width payload vector per tick.  Dropped or
not-yet-available samples are absorbed by zero-order hold on the last
successfully delivered sample, and delivery order is preserved (the effective
source tick never moves backwards under variable delay).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class DelayKind(Enum):
    CONSTANT = "constant"
    SINUSOIDAL_JITTER = "sinusoidal_jitter"
    SEEDED_RANDOM_WALK = "seeded_random_walk"


@dataclass(frozen=True)
class DelayProfile:
    """Deterministic per-tick delay, in samples, never below 1."""
    kind: DelayKind = DelayKind.CONSTANT
    base_delay: int = 1
    amplitude: int = 0
    period: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.base_delay < 1:
            raise ValueError("base_delay must be at least 1 sample")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.kind is DelayKind.SINUSOIDAL_JITTER and self.period < 1:
            raise ValueError("period must be positive")

    def delays(self, n: int) -> np.ndarray:
        """Delay sequence for ticks 0..n-1."""
        if self.kind is DelayKind.CONSTANT:
            d = np.full(n, self.base_delay, dtype=int)
        elif self.kind is DelayKind.SINUSOIDAL_JITTER:
            k = np.arange(n)
            d = self.base_delay + np.rint(
                self.amplitude * np.sin(2.0 * math.pi * k / self.period)
            ).astype(int)
        else:
            rng = np.random.default_rng(self.seed)
            steps = rng.integers(-1, 2, size=n)
            walk = np.cumsum(steps)
            walk = np.clip(walk, -self.amplitude, self.amplitude)
            d = self.base_delay + walk
        return np.maximum(d, 1)


@dataclass(frozen=True)
class LossModel:
    """Seeded Bernoulli packet loss."""
    drop_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_probability < 1.0:
            raise ValueError("drop_probability must be in [0, 1)")

    def drops(self, n: int) -> np.ndarray:
        """Boolean drop flags for samples pushed at ticks 0..n-1."""
        if self.drop_probability == 0.0:
            return np.zeros(n, dtype=bool)
        rng = np.random.default_rng(self.seed)
        return rng.random(n) < self.drop_probability


@dataclass(frozen=True)
class ChannelSample:
    tick: int
    payload: np.ndarray


class DelayLine:
    """Single-direction delayed, lossy sample queue.

    push() must be called exactly once per tick; pop(k) returns the sample
    pushed at tick k - T(k) under hold-last loss semantics.
    """

    def __init__(self, width: int, profile: DelayProfile, loss: LossModel,
                 capacity: int):
        self.width = width
        self.profile = profile
        self.loss = loss
        self._delays = profile.delays(capacity).tolist()
        self._drops = loss.drops(capacity).tolist()
        self._buf = [[0.0] * width for _ in range(capacity)]
        self._n_pushed = 0
        self._last_src = -1
        self._held_tick = -1
        self._held_payload = [0.0] * width

    def push(self, s: ChannelSample) -> None:
        self.push_raw(s.tick, s.payload)

    def push_raw(self, tick: int, payload) -> None:
        self.stage_raw(tick)[:] = (payload.tolist()
                                   if isinstance(payload, np.ndarray)
                                   else payload)

    def stage_raw(self, tick: int) -> list:
        """Writable payload row for this tick's push; advances the cursor.

        Lets the caller fill the buffer in place instead of building a
        temporary payload vector.  Rows must not be mutated after the tick
        they were staged in.
        """
        if tick != self._n_pushed:
            raise ValueError(f"expected push for tick {self._n_pushed}, "
                             f"got {tick}")
        self._n_pushed += 1
        return self._buf[tick]

    def pop(self, k: int) -> ChannelSample:
        payload = self.pop_raw(k)
        return ChannelSample(self._held_tick, np.array(payload))

    def pop_raw(self, k: int) -> list:
        """Payload delivered at tick k (hold-last semantics).

        Returns the internal buffer row; callers must treat it read-only.
        """
        src = k - self._delays[k]
        # causality clamp: never deliver older than what was already delivered
        if src < self._last_src:
            src = self._last_src
        if 0 <= src < self._n_pushed and not self._drops[src]:
            self._held_tick = src
            self._held_payload = self._buf[src]
        self._last_src = src
        return self._held_payload


class Port(Enum):
    LEFT = "left"
    RIGHT = "right"


class EnergyLedger:
    """Per-axis cumulative in/out energies at one channel port (joules).

    The in/out split follows the sign of the instantaneous per-axis power:
    positive power flows into the channel.  At the right port the power sign
    is flipped.  Scalar totals are the sums over axes.
    """

    def __init__(self, n_axes: int):
        # plain float lists internally; ndarray views on the properties
        self._e_in = [0.0] * n_axes
        self._e_out = [0.0] * n_axes
        self._e_in_total = 0.0
        self._e_out_total = 0.0

    @property
    def e_in(self) -> np.ndarray:
        return np.asarray(self._e_in)

    @property
    def e_out(self) -> np.ndarray:
        return np.asarray(self._e_out)

    @property
    def e_in_total(self) -> float:
        return self._e_in_total

    @property
    def e_out_total(self) -> float:
        return self._e_out_total

    def accumulate(self, f, v, dt: float, port: Port) -> None:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        f_l = f.tolist() if isinstance(f, np.ndarray) else f
        v_l = v.tolist() if isinstance(v, np.ndarray) else v
        sign = 1.0 if port is Port.LEFT else -1.0
        e_in, e_out = self._e_in, self._e_out
        d_in = 0.0
        d_out = 0.0
        for i in range(len(f_l)):
            p = sign * (f_l[i] * v_l[i])
            if p > 0.0:
                e_in[i] += dt * p
                d_in += dt * p
            else:
                e_out[i] -= dt * p
                d_out -= dt * p
        self._e_in_total += d_in
        self._e_out_total += d_out


def observed_energy(e_in_remote_delayed, e_out_local):
    """Observed directional energy E_in(k - T(k)) - E_out(k).

    Non-negativity of this quantity at every tick is the passivity condition
    for one direction of the channel.  Works on scalars or per-axis arrays.
    """
    return e_in_remote_delayed - e_out_local
