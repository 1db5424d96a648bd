"""Lossy link with bounded retransmission, relay topologies, and the gateway sink.

The link is probability-based: one Bernoulli trial per attempt with loss
``p = clamp(base * noise / coding_gain, 0, 1)``. The sender learns the
outcome for free (implicit acknowledgement).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .sensing import SPECIES

if TYPE_CHECKING:
    from .node import Measurement

TRANSMIT_POWER_W = 3.7 * 25e-3
EXPORT_COLUMNS = (
    "timestamp_s",
    "node_id",
    "seq",
    "co_ppm",
    "no2_ppm",
    "h2s_ppm",
    "nh3_ppm",
    "no_ppm",
    "cl2_ppm",
    "temp_c",
    "rh_pct",
    "soc_j",
)


@dataclass(frozen=True)
class LinkModel:
    base_loss_probability: float = 0.05
    noise_multiplier: float = 1.0
    coding_gain: float = 4.0
    max_retries: int = 2
    retry_duration: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.base_loss_probability <= 1.0:
            raise ValueError("base loss probability must lie in [0, 1]")
        if self.noise_multiplier < 1.0 or self.coding_gain < 1.0:
            raise ValueError("noise multiplier and coding gain must be >= 1")
        if self.max_retries < 0 or self.retry_duration < 0:
            raise ValueError("max_retries and retry_duration must be non-negative")

    @property
    def loss_probability(self) -> float:
        p = self.base_loss_probability * self.noise_multiplier / self.coding_gain
        return min(max(p, 0.0), 1.0)

    @property
    def max_attempts(self) -> int:
        return 1 + self.max_retries

    def delivery_probability(self) -> float:
        return 1.0 - self.loss_probability**self.max_attempts


LOSSLESS = LinkModel(base_loss_probability=0.0)


@dataclass
class Packet:
    node_id: int
    sequence: int
    measurement: Measurement
    size: int = 48
    attempts: int = 0
    delivered: bool = False
    hops: int = 1
    sent_at: float | None = None


@dataclass(frozen=True)
class TransmitResult:
    delivered: bool
    attempts: int
    extra_energy: float


def transmit(
    packet: Packet, link: LinkModel, rng: np.random.Generator, transmit_power: float = TRANSMIT_POWER_W
) -> TransmitResult:
    """Attempt delivery up to ``1 + max_retries`` times.

    ``extra_energy`` covers the retries only; the first attempt is the
    node's regular transmit window.
    """
    if packet.attempts:
        raise ValueError("packet has already been transmitted on this hop")
    p = link.loss_probability
    attempts = 0
    delivered = False
    while attempts < link.max_attempts:
        attempts += 1
        if rng.random() >= p:
            delivered = True
            break
    extra = (attempts - 1) * link.retry_duration * transmit_power
    packet.attempts = attempts
    packet.delivered = delivered
    return TransmitResult(delivered, attempts, extra)


@dataclass(frozen=True)
class Topology:
    """``star``: every node reaches the gateway directly.

    ``relay_chain``: nodes sit on a line ordered by id, node 0 next to the
    gateway. Node ``k`` reaches the gateway in ``min(k, hops - 1) + 1`` hops,
    forwarded by nodes ``k-1, k-2, ...``; each relay pays its own transmit
    energy per forwarded packet.
    """

    mode: str = "star"
    hops: int = 1
    hop_links: tuple[LinkModel, ...] = ()

    def __post_init__(self):
        if self.mode not in ("star", "relay_chain"):
            raise ValueError(f"unknown topology mode {self.mode!r}")
        if self.hops < 1:
            raise ValueError("relay chain needs hops >= 1")

    def relays(self, node_id: int) -> list[int]:
        if self.mode == "star":
            return []
        depth = min(node_id, self.hops - 1)
        return [node_id - k for k in range(1, depth + 1)]

    def link_for_hop(self, hop: int, default: LinkModel) -> LinkModel:
        if not self.hop_links:
            return default
        return self.hop_links[min(hop, len(self.hop_links) - 1)]


@dataclass
class NodeDeliveryStats:
    received: int = 0
    duplicates: int = 0
    max_sequence: int = -1
    latency: dict[int, float] = field(default_factory=dict)

    @property
    def prr(self) -> float:
        """Unique packets received over packets the sequence numbers say were sent."""
        sent = self.max_sequence + 1
        return self.received / sent if sent > 0 else 0.0


@dataclass
class GatewayState:
    received: dict[tuple[int, int], tuple[float, Packet]] = field(default_factory=dict)
    stats: dict[int, NodeDeliveryStats] = field(default_factory=dict)

    def records(self) -> list[dict]:
        rows = []
        for (_, _), (_, pkt) in sorted(self.received.items(), key=lambda kv: (kv[1][1].measurement.timestamp, kv[0])):
            m = pkt.measurement
            row = {"timestamp_s": m.timestamp, "node_id": pkt.node_id, "seq": pkt.sequence}
            for sp, v in zip(SPECIES, m.ppm):
                row[sp.column] = v
            row.update(temp_c=m.temperature, rh_pct=m.relative_humidity, soc_j=m.soc)
            rows.append(row)
        return rows


def gateway_ingest(gateway: GatewayState, packet: Packet, timestamp: float) -> GatewayState:
    """Insert a delivered packet, deduplicating on (node_id, sequence)."""
    stats = gateway.stats.setdefault(packet.node_id, NodeDeliveryStats())
    key = (packet.node_id, packet.sequence)
    if key in gateway.received:
        stats.duplicates += 1
        return gateway
    gateway.received[key] = (timestamp, packet)
    stats.received += 1
    stats.max_sequence = max(stats.max_sequence, packet.sequence)
    stats.latency[packet.sequence] = timestamp - packet.measurement.timestamp
    return gateway


def export(gateway: GatewayState, path: str | Path, fmt: str = "csv") -> Path:
    """Write every received measurement as CSV or JSON (same fields)."""
    path = Path(path)
    rows = gateway.records()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=EXPORT_COLUMNS, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    elif fmt == "json":
        path.write_text(json.dumps(rows, indent=1) + "\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}")
    return path
