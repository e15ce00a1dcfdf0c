"""PI controller that adapts the number of seed copies between rounds.

The controlled output is ``O = s - d`` (signals minus seeds) with reference
zero.  Around the optimum the plant ``d -> s - d`` has negative slope for
``d < N/2``, so the loop integrates ``O`` itself: more single-id signals than
seeds means one more seed would still pay off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "ControllerConfig",
    "ControllerState",
    "StabilityResult",
    "ziegler_nichols",
    "step",
    "pi_update",
    "check_stability",
    "closed_loop_poles",
    "default_initial_seeds",
]

# Ziegler-Nichols constants: the ultimate gain is the infimum of the
# |H C| < 1 bound (N - d) / (2 (N - 2d)) over N and d, reached as d -> 0;
# at that gain d may flip sign every round, a two-round period.
ULTIMATE_GAIN = 0.5
OSCILLATION_PERIOD = 2.0


def default_initial_seeds(n: int) -> int:
    return max(1, int(math.floor(0.1 * n + 0.5)))


@dataclass(frozen=True)
class ControllerConfig:
    kp: float
    ki: float
    d_min: int
    d_max: int
    d_init: int

    def __post_init__(self):
        if not (self.kp > 0 and self.ki > 0):
            raise ValueError("controller gains must be positive")
        if not self.d_min <= self.d_init <= self.d_max:
            raise ValueError(f"need d_min <= d_init <= d_max, got {self.d_min}, {self.d_init}, {self.d_max}")

    def scaled(self, factor: float) -> "ControllerConfig":
        """Same controller with both gains multiplied by ``factor``."""
        return replace(self, kp=self.kp * factor, ki=self.ki * factor)


def ziegler_nichols(n: int, d_init: int | None = None) -> ControllerConfig:
    """Nominal gains ``kp = 0.4 Ku`` and ``ki = kp / (0.85 Ti)``."""
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    kp = 0.4 * ULTIMATE_GAIN
    ki = kp / (0.85 * OSCILLATION_PERIOD)
    d0 = default_initial_seeds(n) if d_init is None else d_init
    return ControllerConfig(kp=kp, ki=ki, d_min=1, d_max=n, d_init=d0)


@dataclass
class ControllerState:
    """Mutable controller state for one content stream.

    ``control`` is the real-valued control signal; ``d_current`` is its
    rounded and clamped actuation used in the next round.
    """

    d_current: int
    control: float
    prev_error: float = 0.0
    integral_error: float = 0.0
    history: list = field(default_factory=list)

    @classmethod
    def initial(cls, config: ControllerConfig) -> "ControllerState":
        return cls(d_current=config.d_init, control=float(config.d_init))


def pi_update(control: float, error: float, prev_error: float, kp: float, ki: float) -> float:
    """One step of ``C(z) = kp + ki / (z - 1)`` in incremental form."""
    return control + kp * (error - prev_error) + ki * prev_error


def step(state: ControllerState, config: ControllerConfig, s_observed: int) -> ControllerState:
    """Feed the signal count of the round just played and set the next ``d``.

    Incremental form of ``C(z) = kp + ki / (z - 1)`` with ``e = s - d``:
    ``u += kp (e - e_prev) + ki e_prev``.  The integral increment is dropped
    while the actuation sits at a bound and would be pushed further out
    (conditional integration).
    """
    if s_observed < 0:
        raise ValueError("signal count must be >= 0")
    d = state.d_current
    error = float(s_observed - d)
    state.history.append((len(state.history), d, int(s_observed), int(s_observed) - d))

    ki = config.ki
    pushing_out = (d >= config.d_max and state.prev_error > 0) or (d <= config.d_min and state.prev_error < 0)
    if pushing_out:
        ki = 0.0
    else:
        state.integral_error += state.prev_error
    u = pi_update(state.control, error, state.prev_error, config.kp, ki)
    u = min(max(u, float(config.d_min)), float(config.d_max))

    state.control = u
    state.prev_error = error
    state.d_current = int(min(max(math.floor(u + 0.5), config.d_min), config.d_max))
    return state


@dataclass(frozen=True)
class StabilityResult:
    stable: bool
    a1: float
    a2: float


def check_stability(kp: float, ki: float, h_gain: float) -> StabilityResult:
    """Stability-triangle test of ``z**2 + a1 z + a2``.

    ``a1 = -h kp - 1`` and ``a2 = h (kp - ki)``; boundary cases count as
    unstable.
    """
    a1 = -h_gain * kp - 1.0
    a2 = h_gain * (kp - ki)
    stable = a2 < 1.0 and a1 < a2 + 1.0 and a1 > -1.0 - a2
    return StabilityResult(bool(stable), a1, a2)


def closed_loop_poles(kp: float, ki: float, h_gain: float) -> np.ndarray:
    res = check_stability(kp, ki, h_gain)
    return np.roots([1.0, res.a1, res.a2])
