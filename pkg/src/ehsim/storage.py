"""State of charge of the thin-film storage cell, tracked in joules.

The cell is treated as flat-voltage: capacity is charge x nominal charge
voltage, 1 mAh x 4.1 V = 14.76 J. Threshold crossings inside a step are
resolved analytically, so event times do not depend on the step grid.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

NOMINAL_CAPACITY_J = 1e-3 * 3600.0 * 4.1


class BatteryEventKind(enum.Enum):
    BROWN_OUT = "BrownOut"
    COLD_START_REACHED = "ColdStartReached"
    FULL_CLAMP = "FullClamp"


@dataclass(frozen=True)
class BatteryEvent:
    kind: BatteryEventKind
    timestamp: float


@dataclass(frozen=True)
class BatteryModel:
    capacity: float = NOMINAL_CAPACITY_J
    brown_out_threshold: float = 0.0
    cold_start_threshold: float = 0.0
    charge_efficiency: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.brown_out_threshold <= self.cold_start_threshold <= self.capacity:
            raise ValueError(
                "battery thresholds must satisfy 0 <= brown_out <= cold_start <= capacity, got "
                f"{self.brown_out_threshold}, {self.cold_start_threshold}, {self.capacity}"
            )
        if not 0.0 <= self.charge_efficiency <= 1.0:
            raise ValueError(f"charge efficiency must lie in [0, 1], got {self.charge_efficiency}")


@dataclass(frozen=True)
class BatteryState:
    soc: float = 0.0


@dataclass
class PowerStep:
    """Outcome of holding one (harvest, load) pair for a step.

    ``stored`` is the harvested energy after charge efficiency, ``consumed``
    what the load actually drew (the load is disconnected at brown-out),
    ``clamped`` the stored energy refused at full charge. They satisfy
    ``stored == (state.soc - soc_before) + consumed + clamped``.
    """

    state: BatteryState
    stored: float = 0.0
    consumed: float = 0.0
    clamped: float = 0.0
    events: list[BatteryEvent] = field(default_factory=list)

    @property
    def browned_out(self) -> bool:
        return any(e.kind is BatteryEventKind.BROWN_OUT for e in self.events)


def can_cold_start(state: BatteryState, model: BatteryModel) -> bool:
    return state.soc >= model.cold_start_threshold


def time_to_brown_out(soc: float, model: BatteryModel, harvest_w: float, load_w: float) -> float:
    """Seconds until the load drains ``soc`` to the brown-out threshold (inf if never)."""
    net = model.charge_efficiency * harvest_w - load_w
    if load_w <= 0 or net >= 0:
        return float("inf")
    if soc <= model.brown_out_threshold:
        return 0.0
    return (soc - model.brown_out_threshold) / -net


def time_to_cold_start(soc: float, model: BatteryModel, harvest_w: float) -> float:
    """Seconds of unloaded charging until the cold-start threshold (inf if never)."""
    if soc >= model.cold_start_threshold:
        return 0.0
    charge = model.charge_efficiency * harvest_w
    if charge <= 0:
        return float("inf")
    return (model.cold_start_threshold - soc) / charge


def apply_net_power(
    state: BatteryState,
    model: BatteryModel,
    harvest_w: float,
    load_w: float,
    dt: float,
    t0: float = 0.0,
) -> PowerStep:
    """Hold ``harvest_w`` (cell-side) and ``load_w`` for ``dt`` seconds starting at ``t0``.

    If the load drains the cell to the brown-out threshold the load is cut at
    the crossing instant and the rest of the step charges unloaded.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if harvest_w < 0 or load_w < 0:
        raise ValueError(f"harvest and load must be non-negative, got {harvest_w}, {load_w}")

    charge = model.charge_efficiency * harvest_w
    net = charge - load_w
    soc = state.soc
    step = PowerStep(state, stored=charge * dt)

    tau_bo = time_to_brown_out(soc, model, harvest_w, load_w)
    if tau_bo <= dt:
        step.consumed = load_w * tau_bo
        step.events.append(BatteryEvent(BatteryEventKind.BROWN_OUT, t0 + tau_bo))
        bo_state = BatteryState(model.brown_out_threshold)
        remaining = dt - tau_bo
        if remaining > 0 and charge > 0:
            rest = apply_net_power(bo_state, model, harvest_w, 0.0, remaining, t0 + tau_bo)
            step.state = rest.state
            step.clamped = rest.clamped
            step.events.extend(rest.events)
        else:
            step.state = bo_state
        return step

    step.consumed = load_w * dt
    if net > 0:
        tau_full = (model.capacity - soc) / net
        if tau_full < dt:
            new_soc = model.capacity
            step.clamped = net * (dt - max(tau_full, 0.0))
            full_at = t0 + max(tau_full, 0.0)
        else:
            new_soc = soc + net * dt
            full_at = None
        thr = model.cold_start_threshold
        if soc < thr <= new_soc:
            step.events.append(BatteryEvent(BatteryEventKind.COLD_START_REACHED, t0 + (thr - soc) / net))
        if full_at is not None:
            step.events.append(BatteryEvent(BatteryEventKind.FULL_CLAMP, full_at))
    else:
        new_soc = max(soc + net * dt, 0.0)
    step.state = BatteryState(new_soc)
    return step


def withdraw(state: BatteryState, model: BatteryModel, energy: float, t: float) -> PowerStep:
    """Instantaneous debit, used for relay forwarding. Browns out if it cannot be paid."""
    if energy < 0:
        raise ValueError("withdrawal must be non-negative")
    available = state.soc - model.brown_out_threshold
    if energy <= available:
        return PowerStep(BatteryState(state.soc - energy), consumed=energy)
    if available <= 0:
        step = PowerStep(state)
    else:
        step = PowerStep(BatteryState(model.brown_out_threshold), consumed=available)
    step.events.append(BatteryEvent(BatteryEventKind.BROWN_OUT, t))
    return step
