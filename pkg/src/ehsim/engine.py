"""Simulation engine: advances every node over a (tiled) environment trace.

Both modes walk the same global breakpoint sequence: trace-sample changes,
day boundaries, state-of-charge log ticks, and each node's next phase
boundary or analytic threshold crossing. ``fixed_step`` adds a uniform grid
of ``step`` seconds on top, so it is the event mode with extra, redundant
subdivisions; agreement between the two checks that no breakpoint is
missed and that splitting a constant-power step is exact.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace

from .budget import build_ledger, ledger_to_json, simulated_daily_consumption
from .errors import ConfigurationError
from .harvest import SOURCES, HarvesterSet, total_harvest_power
from .network import LinkModel, Packet, Topology, GatewayState, gateway_ingest, transmit
from .node import (
    DutyCycleConfig,
    NodeHardware,
    NodePhase,
    NodeState,
    advance,
    debit,
    default_battery_model,
    new_node,
    next_event_in,
    settle,
)
from .quantities import SECONDS_PER_DAY
from .rng import NodeStreams
from .scenario import SCENARIOS, EnvTrace, generate, parse_trace
from .sensing import CrossSensitivityMatrix, SensingFrontEnd
from .storage import BatteryModel


@dataclass
class SimulationConfig:
    scenario: str | None = "office-window-day"
    trace_path: str | None = None
    trace: EnvTrace | None = None
    days: float | None = None
    duration: float | None = None  # seconds; overrides days
    nodes: int = 1
    rf_distances: tuple[float | None, ...] = ()
    start_soc: float | tuple[float, ...] = 0.0
    duty: DutyCycleConfig = field(default_factory=DutyCycleConfig)
    harvesters: HarvesterSet = field(default_factory=HarvesterSet)
    battery: BatteryModel | None = None
    link: LinkModel = field(default_factory=LinkModel)
    topology: Topology = field(default_factory=Topology)
    sensing_noise: bool = True
    cross_sensitivity: CrossSensitivityMatrix | None = None
    seed: int | None = 0
    mode: str = "event"
    step: float = 0.25
    soc_interval: float = 60.0
    # scale link noise by the built-in scenario's interference level
    scenario_link_noise: bool = True

    @property
    def stochastic(self) -> bool:
        return (
            self.sensing_noise
            or self.link.loss_probability > 0
            or any(h.loss_probability > 0 for h in self.topology.hop_links)
            or (self.trace is None and self.trace_path is None and self.scenario == "doha-traffic")
        )

    @property
    def uses_builtin_scenario(self) -> bool:
        return self.trace is None and self.trace_path is None

    def effective_link(self) -> LinkModel:
        if self.scenario_link_noise and self.uses_builtin_scenario and self.scenario in SCENARIOS:
            factor = SCENARIOS[self.scenario].link_noise
            if factor != 1.0:
                return replace(self.link, noise_multiplier=self.link.noise_multiplier * factor)
        return self.link

    def battery_model(self) -> BatteryModel:
        return self.battery if self.battery is not None else default_battery_model(self.duty)

    def start_socs(self) -> list[float]:
        if isinstance(self.start_soc, (int, float)):
            return [float(self.start_soc)] * self.nodes
        return [float(s) for s in self.start_soc]

    def validate(self) -> None:
        def bad(msg):
            raise ConfigurationError(msg)

        if self.trace is None and self.trace_path is None and self.scenario is None:
            bad("no trace source: give a scenario name, a trace file or a trace")
        if self.trace is None and self.trace_path is None and self.scenario not in SCENARIOS:
            bad(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.nodes < 1:
            bad("node count must be at least 1")
        if self.mode not in ("event", "fixed_step"):
            bad(f"engine mode must be 'event' or 'fixed_step', got {self.mode!r}")
        if self.mode == "fixed_step" and not 0 < self.step <= 1.0:
            bad(f"fixed-step dt must lie in (0, 1] s, got {self.step}")
        if self.stochastic and self.seed is None:
            bad("a seed is required when sensing noise, link loss or a seeded scenario is enabled")
        if self.seed is not None and self.seed < 0:
            bad("seed must be non-negative")
        for label, v in (("days", self.days), ("duration", self.duration)):
            if v is not None and not v > 0:
                bad(f"{label} must be positive")
        if not self.soc_interval > 0:
            bad("soc_interval must be positive")
        try:
            self.duty.check_simulatable()
        except ValueError as exc:
            bad(str(exc))
        retry_budget = max(
            link.max_retries * link.retry_duration for link in (self.link, *self.topology.hop_links)
        )
        if retry_budget >= self.duty.sleep_duration:
            bad("retries must fit inside the sleep phase")
        if len(self.rf_distances) > self.nodes:
            bad("more rf_distances than nodes")
        if any(d is not None and not d > 0 for d in self.rf_distances):
            bad("rf distance overrides must be positive")
        socs = self.start_socs()
        if len(socs) != self.nodes:
            bad("start_soc list must have one entry per node")
        cap = self.battery_model().capacity
        if any(not 0 <= s <= cap for s in socs):
            bad(f"start soc must lie in [0, {cap}]")

    def load_trace(self) -> EnvTrace:
        if self.trace is not None:
            return self.trace
        if self.trace_path is not None:
            return parse_trace(self.trace_path)
        return generate(self.scenario, self.seed or 0)

    def run_duration(self, trace: EnvTrace) -> float:
        if self.duration is not None:
            return float(self.duration)
        if self.days is not None:
            return float(self.days) * SECONDS_PER_DAY
        return trace.span

    def describe(self) -> dict:
        link = self.effective_link()
        return {
            "scenario": self.scenario if self.trace is None and self.trace_path is None else None,
            "trace_path": self.trace_path,
            "days": self.days,
            "duration_s": self.duration,
            "nodes": self.nodes,
            "rf_distances_m": list(self.rf_distances),
            "start_soc_j": self.start_socs(),
            "seed": self.seed,
            "mode": self.mode,
            "step_s": self.step if self.mode == "fixed_step" else None,
            "link": {
                "base_loss_probability": link.base_loss_probability,
                "noise_multiplier": link.noise_multiplier,
                "coding_gain": link.coding_gain,
                "max_retries": link.max_retries,
                "retry_duration_s": link.retry_duration,
                "loss_probability": link.loss_probability,
            },
            "topology": {"mode": self.topology.mode, "hops": self.topology.hops},
            "sensing_noise": self.sensing_noise,
            "battery": {
                "capacity_j": self.battery_model().capacity,
                "brown_out_threshold_j": self.battery_model().brown_out_threshold,
                "cold_start_threshold_j": self.battery_model().cold_start_threshold,
                "charge_efficiency": self.battery_model().charge_efficiency,
            },
        }


@dataclass
class NodeReport:
    node_id: int
    start_soc: float
    final_soc: float
    events: list[dict]
    packets_emitted: int
    packets_delivered: int
    audit: dict
    daily: list[dict]
    network_energy: float

    @property
    def audit_residual(self) -> float:
        return self.audit["residual_j"]


@dataclass
class RunReport:
    config: dict
    duration: float
    nodes: list[NodeReport]
    soc_series: list[tuple[float, tuple[float, ...]]]
    packets: list[Packet]
    gateway: GatewayState
    ledger: dict

    def node(self, node_id: int) -> NodeReport:
        return self.nodes[node_id]

    @property
    def final_socs(self) -> list[float]:
        return [n.final_soc for n in self.nodes]

    def to_json(self) -> dict:
        gw = {
            str(nid): {
                "received": s.received,
                "duplicates": s.duplicates,
                "prr": s.prr,
                "mean_latency_s": (sum(s.latency.values()) / len(s.latency)) if s.latency else None,
            }
            for nid, s in sorted(self.gateway.stats.items())
        }
        return {
            "config": self.config,
            "duration_s": self.duration,
            "nodes": [
                {
                    "node_id": n.node_id,
                    "start_soc_j": n.start_soc,
                    "final_soc_j": n.final_soc,
                    "packets_emitted": n.packets_emitted,
                    "packets_delivered": n.packets_delivered,
                    "prr": n.packets_delivered / n.packets_emitted if n.packets_emitted else None,
                    "network_energy_j": n.network_energy,
                    "audit": n.audit,
                    "daily": n.daily,
                    "events": n.events,
                }
                for n in self.nodes
            ],
            "gateway": gw,
            "ledger": self.ledger,
        }


class _TiledTrace:
    """Periodic extension of a trace beyond its span."""

    def __init__(self, trace: EnvTrace):
        self.trace = trace
        self.start = trace.start
        self.span = trace.span
        self.offsets = [t - trace.start for t in trace.times] + [trace.span]

    def locate(self, t: float) -> tuple[int, float]:
        """(sample index in force at ``t``, absolute time of the next sample change).

        Boundaries are compared as absolute times ``base + offset`` only, so
        rounding in ``t - base`` can never hand back a change time <= ``t``.
        """
        k = math.floor((t - self.start) / self.span)
        base = self.start + k * self.span
        while base > t:
            k -= 1
            base = self.start + k * self.span
        while base + self.span <= t:
            k += 1
            base = self.start + k * self.span
        idx = max(bisect.bisect_right(self.offsets, t - base) - 1, 0)
        idx = min(idx, len(self.offsets) - 2)
        while idx > 0 and base + self.offsets[idx] > t:
            idx -= 1
        while base + self.offsets[idx + 1] <= t:
            idx += 1
            if idx == len(self.offsets) - 1:
                k += 1
                base = self.start + k * self.span
                idx = 0
        return idx, base + self.offsets[idx + 1]


def _snapshot(state: NodeState) -> dict:
    t = state.tally
    return {
        "soc": state.battery.soc,
        "stored": t.stored,
        "consumed": t.total_consumed,
        "clamped": t.clamped,
        "packets": state.cycle_count,
    }


def run(config: SimulationConfig) -> RunReport:
    config.validate()
    trace = config.load_trace()
    duration = config.run_duration(trace)
    tiled = _TiledTrace(trace)
    link = config.effective_link()
    battery = config.battery_model()
    seed = config.seed or 0
    sensing = SensingFrontEnd(
        noise=config.sensing_noise,
        cross=config.cross_sensitivity or CrossSensitivityMatrix(),
    )

    hws: list[NodeHardware] = []
    states: list[NodeState] = []
    harvest: list[list[tuple[float, dict]]] = []
    time_at_sample: list[list[float]] = []
    socs = config.start_socs()
    t0 = trace.start
    for nid in range(config.nodes):
        hws.append(
            NodeHardware(
                nid,
                duty=config.duty,
                battery=battery,
                sensing=sensing,
                link=config.topology.link_for_hop(0, link),
                streams=NodeStreams(seed, nid),
            )
        )
        states.append(new_node(nid, socs[nid], t0))
        dist = config.rf_distances[nid] if nid < len(config.rf_distances) else None
        harvest.append([total_harvest_power(config.harvesters, s, dist) for s in trace])
        time_at_sample.append([0.0] * len(trace))

    events: list[list[dict]] = [[] for _ in states]
    daily: list[list[dict]] = [[] for _ in states]
    day_marks = [_snapshot(s) for s in states]
    packets: list[Packet] = []
    gateway = GatewayState()
    soc_series: list[tuple[float, tuple[float, ...]]] = [(t0, tuple(s.battery.soc for s in states))]

    t_end = t0 + duration
    fixed = config.mode == "fixed_step"
    step = config.step
    grid_k = 0
    soc_k = 1
    day_k = 1
    t = t0

    def log_events(nid, evs):
        for e in evs:
            events[nid].append({"t": e.timestamp, "kind": e.kind, "detail": e.detail})

    def handle(src: int, pkts: list[Packet]):
        for pkt in pkts:
            packets.append(pkt)
            delivered = pkt.delivered
            for hop, relay in enumerate(config.topology.relays(src), start=1):
                if not delivered:
                    break
                hop_link = config.topology.link_for_hop(hop, link)
                fwd = Packet(pkt.node_id, pkt.sequence, pkt.measurement, size=pkt.size)
                res = transmit(fwd, hop_link, hws[relay].streams["relay"], config.duty.transmit_point.power)
                cost = config.duty.transmit_point.power * config.duty.transmit_duration + res.extra_energy
                paid, evs = debit(states[relay], hws[relay], cost)
                log_events(relay, evs)
                delivered = paid and res.delivered
                pkt.hops += 1
                pkt.attempts += res.attempts
            pkt.delivered = delivered
            if delivered:
                gateway_ingest(gateway, pkt, pkt.sent_at)

    while t < t_end:
        idx, trace_next = tiled.locate(t)
        sample = trace[idx]
        for nid, st in enumerate(states):
            evs, pkts = settle(st, hws[nid], sample)
            log_events(nid, evs)
            handle(nid, pkts)

        candidates = [t_end, trace_next, t0 + soc_k * config.soc_interval, t0 + day_k * SECONDS_PER_DAY]
        if fixed:
            while t0 + grid_k * step <= t:
                grid_k += 1
            candidates.append(t0 + grid_k * step)
        for nid, st in enumerate(states):
            candidates.append(st.time + next_event_in(st, hws[nid], harvest[nid][idx][0]))
        t_next = min(c for c in candidates if c > t)

        dt = t_next - t
        for nid, st in enumerate(states):
            evs, pkts = advance(st, hws[nid], sample, harvest[nid][idx][0], dt, until=t_next)
            log_events(nid, evs)
            handle(nid, pkts)
            time_at_sample[nid][idx] += dt
        t = t_next
        if t >= t_end:
            # phase ends landing exactly on the run end still count
            final = trace[tiled.locate(t)[0]]
            for nid, st in enumerate(states):
                evs, pkts = settle(st, hws[nid], final)
                log_events(nid, evs)
                handle(nid, pkts)

        if t >= t0 + soc_k * config.soc_interval:
            soc_series.append((t, tuple(s.battery.soc for s in states)))
            while t0 + soc_k * config.soc_interval <= t:
                soc_k += 1
        if t >= t0 + day_k * SECONDS_PER_DAY or t >= t_end:
            for nid, st in enumerate(states):
                now = _snapshot(st)
                prev = day_marks[nid]
                daily[nid].append(
                    {
                        "day": len(daily[nid]),
                        "soc_start_j": prev["soc"],
                        "soc_end_j": now["soc"],
                        "soc_gain_j": now["soc"] - prev["soc"],
                        "stored_j": now["stored"] - prev["stored"],
                        "consumed_j": now["consumed"] - prev["consumed"],
                        "clamped_j": now["clamped"] - prev["clamped"],
                        "packets": now["packets"] - prev["packets"],
                    }
                )
                day_marks[nid] = now
            if t >= t0 + day_k * SECONDS_PER_DAY:
                day_k += 1

    if soc_series[-1][0] != t:
        soc_series.append((t, tuple(s.battery.soc for s in states)))

    node_reports = []
    for nid, st in enumerate(states):
        tally = st.tally
        per_source = {src: math.fsum(time_at_sample[nid][i] * harvest[nid][i][1][src] for i in range(len(trace))) for src in SOURCES}
        delta = st.battery.soc - socs[nid]
        residual = tally.stored - (delta + tally.total_consumed + tally.clamped)
        audit = {
            "stored_j": tally.stored,
            "harvested_cell_side_j": math.fsum(per_source.values()),
            "per_source_j": per_source,
            "consumed_j": tally.total_consumed,
            "consumed_by_phase_j": dict(tally.consumed),
            "relay_j": tally.relay,
            "clamped_j": tally.clamped,
            "charge_loss_j": tally.charge_loss,
            "delta_soc_j": delta,
            "residual_j": residual,
            "time_in_phase_s": dict(tally.time_in_phase),
        }
        mine = [p for p in packets if p.node_id == nid]
        node_reports.append(
            NodeReport(
                node_id=nid,
                start_soc=socs[nid],
                final_soc=st.battery.soc,
                events=events[nid],
                packets_emitted=len(mine),
                packets_delivered=sum(p.delivered for p in mine),
                audit=audit,
                daily=daily[nid],
                network_energy=tally.consumed[NodePhase.SAMPLE_TRANSMIT.value] + tally.relay,
            )
        )

    ledger = build_ledger(config.duty, config.harvesters)
    ledger_json = ledger_to_json(ledger, config.duty)
    ledger_json["cycle_energy_j"] = config.duty.cycle_energy
    ledger_json["simulated_consumption_j_per_day"] = simulated_daily_consumption(config.duty)

    return RunReport(
        config=config.describe(),
        duration=duration,
        nodes=node_reports,
        soc_series=soc_series,
        packets=packets,
        gateway=gateway,
        ledger=ledger_json,
    )


def with_overrides(config: SimulationConfig, **kw) -> SimulationConfig:
    return replace(config, **kw)
