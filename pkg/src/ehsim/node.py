"""Duty-cycled sensor node: Offline / Sleep / Warmup / SampleTransmit.

A cycle is Sleep -> Warmup -> SampleTransmit and tiles the period exactly
(836 + 60 + 4 = 900 s by default). All six gas channels plus temperature and
humidity are sampled at the end of warm-up; the packet is handed to the
link at the end of the transmit window. Failed attempts extend the transmit
phase by one retry slot each, taken out of the next sleep so the period
still tiles.

Node state is mutated in place by :func:`settle`, :func:`advance` and
:func:`debit`; each returns the events and packets it produced.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import EngineContractError
from .network import LOSSLESS, LinkModel, Packet, transmit
from .quantities import SECONDS_PER_DAY, OperatingPoint
from .rng import NodeStreams
from .scenario import EnvSample
from .sensing import SensingFrontEnd
from .storage import (
    BatteryEventKind,
    BatteryModel,
    BatteryState,
    NOMINAL_CAPACITY_J,
    apply_net_power,
    can_cold_start,
    time_to_brown_out,
    time_to_cold_start,
    withdraw,
)

# event times closer than this to a step end are taken to fall on it
TIME_EPS = 1e-9


class NodePhase(enum.Enum):
    OFFLINE = "Offline"
    SLEEP = "Sleep"
    WARMUP = "Warmup"
    SAMPLE_TRANSMIT = "SampleTransmit"


ACTIVE_PHASES = (NodePhase.SLEEP, NodePhase.WARMUP, NodePhase.SAMPLE_TRANSMIT)


@dataclass(frozen=True)
class DutyCycleConfig:
    period: float = 900.0
    warmup_duration: float = 60.0
    transmit_duration: float = 4.0
    sleep_point: OperatingPoint = OperatingPoint(3.7, 3e-6)
    warmup_point: OperatingPoint = OperatingPoint(3.7, 115e-6)
    transmit_point: OperatingPoint = OperatingPoint(3.7, 25e-3)

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("duty-cycle period must be positive")
        if self.warmup_duration < 0 or self.transmit_duration < 0:
            raise ValueError("phase durations must be non-negative")
        if self.warmup_duration + self.transmit_duration > self.period:
            raise ValueError("warm-up plus transmit must fit in the period")

    def check_simulatable(self) -> None:
        if not (self.warmup_duration > 0 and self.transmit_duration > 0 and self.sleep_duration > 0):
            raise ValueError("simulated phases must all have positive duration")

    @property
    def sleep_duration(self) -> float:
        return self.period - self.warmup_duration - self.transmit_duration

    @property
    def periods_per_day(self) -> float:
        return SECONDS_PER_DAY / self.period

    @property
    def cycle_energy(self) -> float:
        """Energy of one complete tiled cycle."""
        return (
            self.sleep_point.power * self.sleep_duration
            + self.warmup_point.power * self.warmup_duration
            + self.transmit_point.power * self.transmit_duration
        )


def load_power(config: DutyCycleConfig, phase: NodePhase) -> float:
    if phase is NodePhase.SLEEP:
        return config.sleep_point.power
    if phase is NodePhase.WARMUP:
        return config.warmup_point.power
    if phase is NodePhase.SAMPLE_TRANSMIT:
        return config.transmit_point.power
    return 0.0


def default_battery_model(config: DutyCycleConfig | None = None, **overrides) -> BatteryModel:
    """Cell whose cold-start threshold is the energy of one full duty cycle."""
    config = config or DutyCycleConfig()
    params = dict(capacity=NOMINAL_CAPACITY_J, brown_out_threshold=0.0, cold_start_threshold=config.cycle_energy)
    params.update(overrides)
    return BatteryModel(**params)


@dataclass(frozen=True)
class Measurement:
    timestamp: float
    ppm: tuple[float, ...]
    temperature: float
    relative_humidity: float
    soc: float
    sequence: int


@dataclass(frozen=True)
class NodeEvent:
    kind: str
    timestamp: float
    detail: str = ""


@dataclass
class NodeHardware:
    """Everything fixed about one node: schedule, cell, sensors, radio, RNG streams."""

    node_id: int
    duty: DutyCycleConfig = field(default_factory=DutyCycleConfig)
    battery: BatteryModel = field(default_factory=default_battery_model)
    sensing: SensingFrontEnd = field(default_factory=SensingFrontEnd)
    link: LinkModel = LOSSLESS
    streams: NodeStreams | None = None
    packet_size: int = 48

    def __post_init__(self):
        self.duty.check_simulatable()
        if self.streams is None:
            self.streams = NodeStreams(0, self.node_id)


@dataclass
class EnergyTally:
    stored: float = 0.0
    clamped: float = 0.0
    charge_loss: float = 0.0
    consumed: dict[str, float] = field(default_factory=lambda: {p.value: 0.0 for p in NodePhase})
    relay: float = 0.0
    time_in_phase: dict[str, float] = field(default_factory=lambda: {p.value: 0.0 for p in NodePhase})

    @property
    def total_consumed(self) -> float:
        return sum(self.consumed.values()) + self.relay


@dataclass
class NodeState:
    node_id: int
    battery: BatteryState
    time: float = 0.0
    phase: NodePhase = NodePhase.OFFLINE
    phase_start: float = 0.0
    phase_end: float = float("inf")
    pending_measurement: Measurement | None = None
    cycle_count: int = 0
    transmitted: bool = False
    in_flight: Packet | None = None
    retry_time: float = 0.0
    cold_start_ready: bool = False
    clamping: bool = False
    tally: EnergyTally = field(default_factory=EnergyTally)

    @property
    def phase_elapsed(self) -> float:
        return self.time - self.phase_start


def new_node(node_id: int, soc: float = 0.0, t0: float = 0.0) -> NodeState:
    return NodeState(node_id, BatteryState(soc), time=t0, phase_start=t0)


def _enter(node: NodeState, phase: NodePhase, duration: float) -> None:
    node.phase = phase
    node.phase_start = node.time
    node.phase_end = node.time + duration


def _go_offline(node: NodeState) -> None:
    node.phase = NodePhase.OFFLINE
    node.phase_start = node.time
    node.phase_end = float("inf")
    node.pending_measurement = None
    node.transmitted = False
    node.in_flight = None
    node.retry_time = 0.0
    node.cold_start_ready = False


def settle(node: NodeState, hw: NodeHardware, sample: EnvSample) -> tuple[list[NodeEvent], list[Packet]]:
    """Run every phase transition due at ``node.time``. ``sample`` holds at that instant."""
    events: list[NodeEvent] = []
    packets: list[Packet] = []
    duty = hw.duty
    for _ in range(8):
        if node.phase is NodePhase.OFFLINE:
            if not (node.cold_start_ready or can_cold_start(node.battery, hw.battery)):
                break
            node.cold_start_ready = False
            events.append(NodeEvent("cold_start", node.time, f"soc={node.battery.soc:.6g}"))
            _enter(node, NodePhase.SLEEP, duty.sleep_duration)
            continue
        if node.time < node.phase_end - TIME_EPS:
            break
        if node.phase is NodePhase.SLEEP:
            _enter(node, NodePhase.WARMUP, duty.warmup_duration)
        elif node.phase is NodePhase.WARMUP:
            ppm, temp, rh = hw.sensing.measure(sample, hw.streams["sensing"], hw.streams["environment"])
            node.pending_measurement = Measurement(
                node.time, tuple(ppm), temp, rh, node.battery.soc, node.cycle_count
            )
            node.transmitted = False
            node.retry_time = 0.0
            _enter(node, NodePhase.SAMPLE_TRANSMIT, duty.transmit_duration)
        elif not node.transmitted:
            pkt = Packet(node.node_id, node.cycle_count, node.pending_measurement, size=hw.packet_size)
            result = transmit(pkt, hw.link, hw.streams["link"], duty.transmit_point.power)
            node.transmitted = True
            node.in_flight = pkt
            node.retry_time = (result.attempts - 1) * hw.link.retry_duration
            node.phase_end += node.retry_time
        else:
            pkt = node.in_flight
            pkt.sent_at = node.time
            packets.append(pkt)
            if not pkt.delivered:
                events.append(NodeEvent("packet_lost", node.time, f"seq={pkt.sequence} attempts={pkt.attempts}"))
            node.cycle_count += 1
            node.pending_measurement = None
            node.transmitted = False
            node.in_flight = None
            _enter(node, NodePhase.SLEEP, duty.sleep_duration - node.retry_time)
            node.retry_time = 0.0
    else:
        raise EngineContractError("phase machine failed to settle")
    return events, packets


def next_event_in(node: NodeState, hw: NodeHardware, harvest_w: float) -> float:
    """Seconds from ``node.time`` to the node's next phase boundary or threshold crossing."""
    soc = node.battery.soc
    if node.phase is NodePhase.OFFLINE:
        return time_to_cold_start(soc, hw.battery, harvest_w)
    load = load_power(hw.duty, node.phase)
    return min(node.phase_end - node.time, time_to_brown_out(soc, hw.battery, harvest_w, load))


def advance(
    node: NodeState,
    hw: NodeHardware,
    sample: EnvSample,
    harvest_w: float,
    dt: float,
    until: float | None = None,
) -> tuple[list[NodeEvent], list[Packet]]:
    """Settle due transitions, then hold the current phase's load for ``dt`` seconds.

    ``until`` pins the absolute end time (the engine passes its breakpoint so
    node clocks never drift from it by rounding).
    """
    events, packets = settle(node, hw, sample)
    if until is not None:
        dt = until - node.time
    if not dt > 0:
        raise EngineContractError(f"node {node.node_id}: non-positive step {dt}")
    if node.phase is not NodePhase.OFFLINE and node.time + dt > node.phase_end + TIME_EPS:
        raise EngineContractError(
            f"node {node.node_id}: step to {node.time + dt} crosses phase end {node.phase_end}"
        )
    phase = node.phase
    load = load_power(hw.duty, phase)
    soc0 = node.battery.soc
    bo_due = phase is not NodePhase.OFFLINE and time_to_brown_out(soc0, hw.battery, harvest_w, load) <= dt + TIME_EPS
    cs_due = phase is NodePhase.OFFLINE and time_to_cold_start(soc0, hw.battery, harvest_w) <= dt + TIME_EPS

    step = apply_net_power(node.battery, hw.battery, harvest_w, load, dt, node.time)
    tally = node.tally
    tally.stored += step.stored
    tally.charge_loss += (1.0 - hw.battery.charge_efficiency) * harvest_w * dt
    tally.clamped += step.clamped
    tally.consumed[phase.value] += step.consumed
    tally.time_in_phase[phase.value] += dt
    node.battery = step.state

    clamped_now = step.clamped > 0
    if clamped_now and not node.clamping:
        events.append(NodeEvent("full_clamp", next(e.timestamp for e in step.events if e.kind is BatteryEventKind.FULL_CLAMP)))
    node.clamping = clamped_now

    browned = step.browned_out
    if bo_due and not browned:
        # crossing lands within TIME_EPS past the step end: finish draining now
        residue = node.battery.soc - hw.battery.brown_out_threshold
        tally.consumed[phase.value] += residue
        node.battery = BatteryState(hw.battery.brown_out_threshold)
        browned = True
        bo_time = node.time + dt
    elif browned:
        bo_time = next(e.timestamp for e in step.events if e.kind is BatteryEventKind.BROWN_OUT)
    node.time = node.time + dt if until is None else until
    if browned:
        events.append(NodeEvent("brown_out", bo_time, f"phase={phase.value}"))
        _go_offline(node)
        node.phase_start = bo_time
        # charging after the cut may already have crossed the cold-start threshold
        node.cold_start_ready = any(e.kind is BatteryEventKind.COLD_START_REACHED for e in step.events)
    elif cs_due:
        node.cold_start_ready = True
    return events, packets


def debit(node: NodeState, hw: NodeHardware, energy: float) -> tuple[bool, list[NodeEvent]]:
    """Charge an instantaneous relay-forwarding cost. False if the node cannot pay it."""
    if node.phase is NodePhase.OFFLINE:
        return False, []
    step = withdraw(node.battery, hw.battery, energy, node.time)
    node.battery = step.state
    node.tally.relay += step.consumed
    if step.browned_out:
        _go_offline(node)
        return False, [NodeEvent("brown_out", node.time, "phase=relay")]
    return True, []
