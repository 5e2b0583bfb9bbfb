"""Per-node battery accounting: the hard threshold, the quantized levels
above it, and the battery factor that multiplies into the priority index.

The factor is piecewise: below the hard threshold it grows as the battery
drains (threshold/level, so weak nodes sink in priority); at or above the
threshold it steps up with the level index (full batteries can afford to
wait). Its global minimum is the first level at the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass


class Depleted(Exception):
    pass


@dataclass
class EnergyCosts:
    tx_power: float = 0.6
    rx_power: float = 0.3
    idle_power: float = 0.0
    link_rate: float = 1e6  # bit/s

    def __post_init__(self):
        if min(self.tx_power, self.rx_power, self.idle_power) < 0:
            raise ValueError("power draws must be non-negative")
        if not (self.tx_power >= self.rx_power >= self.idle_power):
            raise ValueError("need tx_power >= rx_power >= idle_power")
        if self.link_rate <= 0:
            raise ValueError("link_rate must be positive")


@dataclass
class BatteryState:
    level: float
    initial: float = 50.0
    hard_threshold: float = 10.0
    levels_above: int = 3
    level_penalty: float = 0.25

    def __post_init__(self):
        if not (0 <= self.level <= self.initial):
            raise ValueError(f"level must lie in [0, {self.initial}], got {self.level}")
        if not (0 < self.hard_threshold < self.initial):
            raise ValueError("hard_threshold must lie strictly between 0 and initial")
        if self.levels_above < 1:
            raise ValueError("levels_above must be >= 1")
        if self.level_penalty < 0:
            raise ValueError("level_penalty must be non-negative")

    @property
    def depleted(self) -> bool:
        return self.level <= 0.0


def airtime(nbytes: int, costs: EnergyCosts) -> float:
    """Seconds on air for a payload of nbytes at the configured link rate."""
    return 8.0 * nbytes / costs.link_rate


def consume_tx(state: BatteryState, costs: EnergyCosts, nbytes: int) -> BatteryState:
    """Charge the battery for transmitting nbytes; clamps at zero."""
    if state.depleted:
        raise Depleted("transmit attempted on a depleted battery")
    state.level = max(0.0, state.level - costs.tx_power * airtime(nbytes, costs))
    return state


def consume_rx(state: BatteryState, costs: EnergyCosts, nbytes: int) -> BatteryState:
    """Charge the battery for receiving nbytes; clamps at zero."""
    if state.depleted:
        raise Depleted("receive attempted on a depleted battery")
    state.level = max(0.0, state.level - costs.rx_power * airtime(nbytes, costs))
    return state


def consume_idle(state: BatteryState, costs: EnergyCosts, seconds: float) -> BatteryState:
    if state.depleted:
        raise Depleted("idle drain on a depleted battery")
    state.level = max(0.0, state.level - costs.idle_power * seconds)
    return state


def battery_level(state: BatteryState) -> int:
    """Quantized level index: 0 below the hard threshold, else 1..levels_above.

    The band width above the threshold is (initial - threshold)/levels_above,
    so nodes in the same band are indistinguishable to the scheduler.
    """
    if state.level < state.hard_threshold:
        return 0
    width = (state.initial - state.hard_threshold) / state.levels_above
    idx = 1 + int((state.level - state.hard_threshold) / width)
    return min(idx, state.levels_above)


def battery_factor(state: BatteryState) -> float:
    """Multiplicative priority-index factor X >= 1.

    Below the hard threshold X = threshold/level (draining raises X,
    sinking the node's priority); at or above it X steps up with the level
    index, so the factor is minimized exactly at the first above-threshold
    level.
    """
    if state.depleted:
        raise Depleted("battery factor undefined at zero charge")
    if state.level < state.hard_threshold:
        return state.hard_threshold / state.level
    return 1.0 + (battery_level(state) - 1) * state.level_penalty
