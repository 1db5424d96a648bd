import math

import pytest

import oracles
from ehsim.errors import EngineContractError
from ehsim.network import LinkModel
from ehsim.node import (
    DutyCycleConfig,
    NodeHardware,
    NodePhase,
    advance,
    debit,
    default_battery_model,
    load_power,
    new_node,
    next_event_in,
    settle,
)
from ehsim.scenario import EnvSample
from ehsim.sensing import SensingFrontEnd

DUTY = DutyCycleConfig()
SENSING = SensingFrontEnd(noise=False)
QUIET = EnvSample(0.0)


def hardware(**kw):
    return NodeHardware(0, sensing=SENSING, **kw)


def run_node(node, hw, harvest_w, until):
    """Drive a node to ``until`` the way the engine does, one breakpoint at a time."""
    events, packets = [], []
    while node.time < until:
        ev, pk = settle(node, hw, QUIET)
        events += ev
        packets += pk
        t_next = min(until, node.time + next_event_in(node, hw, harvest_w))
        if t_next <= node.time:
            t_next = until
        ev, pk = advance(node, hw, QUIET, harvest_w, t_next - node.time, until=t_next)
        events += ev
        packets += pk
    ev, pk = settle(node, hw, QUIET)
    return events + ev, packets + pk


def test_load_power():
    assert load_power(DUTY, NodePhase.SLEEP) == pytest.approx(11.1e-6, rel=1e-12)
    assert load_power(DUTY, NodePhase.WARMUP) == pytest.approx(425.5e-6, rel=1e-12)
    assert load_power(DUTY, NodePhase.SAMPLE_TRANSMIT) == pytest.approx(92.5e-3, rel=1e-12)
    assert load_power(DUTY, NodePhase.OFFLINE) == 0.0


def test_phase_tiling():
    assert DUTY.sleep_duration + DUTY.warmup_duration + DUTY.transmit_duration == DUTY.period
    assert DUTY.sleep_duration == 836
    assert DUTY.cycle_energy == pytest.approx(float(oracles.tiled_cycle_energy()), rel=1e-12)
    with pytest.raises(ValueError):
        DutyCycleConfig(warmup_duration=900, transmit_duration=4)


def test_offline_without_energy_stays_offline():
    hw = hardware()
    node = new_node(0, 0.0)
    events, packets = run_node(node, hw, 0.0, 5 * 86400)
    assert node.phase is NodePhase.OFFLINE
    assert events == [] and packets == []
    assert node.tally.total_consumed == 0.0


def test_cold_start_then_cycles():
    hw = hardware()
    node = new_node(0, 0.0)
    harvest = 1e-3
    events, packets = run_node(node, hw, harvest, 3 * 900 + 1000)
    cs = [e for e in events if e.kind == "cold_start"]
    assert len(cs) == 1
    assert cs[0].timestamp == pytest.approx(hw.battery.cold_start_threshold / harvest, rel=1e-9)
    assert [p.sequence for p in packets] == list(range(len(packets)))
    assert len(packets) == 3


def test_full_day_zero_harvest_from_full():
    hw = hardware()
    node = new_node(0, hw.battery.capacity)
    events, packets = run_node(node, hw, 0.0, 86400)
    bo = [e for e in events if e.kind == "brown_out"]
    assert len(bo) == 1
    assert bo[0].timestamp == pytest.approx(oracles.brown_out_time_full_battery(), rel=1e-9)
    assert node.tally.total_consumed == pytest.approx(hw.battery.capacity, rel=1e-12)
    assert node.battery.soc == 0.0
    cycles = bo[0].timestamp / 900
    assert len(packets) == math.floor(cycles)


def test_brown_out_discards_pending_measurement():
    hw = hardware()
    node = new_node(0, 0.2)
    node.cold_start_ready = True
    events, packets = run_node(node, hw, 0.0, 900)
    assert packets == []
    assert node.pending_measurement is None and node.phase is NodePhase.OFFLINE
    assert any(e.kind == "brown_out" and "SampleTransmit" in e.detail for e in events)


def test_packet_carries_measurement():
    hw = hardware()
    node = new_node(0, 5.0)
    _, packets = run_node(node, hw, 0.0, 900)
    (pkt,) = packets
    assert pkt.measurement.timestamp == pytest.approx(896.0)
    assert pkt.sent_at == pytest.approx(900.0)
    assert len(pkt.measurement.ppm) == 6


def test_retries_shorten_following_sleep():
    hw = hardware(link=LinkModel(base_loss_probability=1.0, coding_gain=1.0))
    node = new_node(0, 5.0)
    # two failed retries each cycle: the period still tiles, so cycle 2 ends at 900 + 902
    events, packets = run_node(node, hw, 0.0, 1802)
    sleep_t = node.tally.time_in_phase["Sleep"]
    tx_t = node.tally.time_in_phase["SampleTransmit"]
    assert len(packets) == 2 and not any(p.delivered for p in packets)
    assert tx_t == pytest.approx(2 * (4 + 2))
    assert sleep_t + tx_t + node.tally.time_in_phase["Warmup"] == pytest.approx(1802)
    assert [p.sent_at for p in packets] == pytest.approx([902.0, 1802.0])
    assert sum(e.kind == "packet_lost" for e in events) == 2


def test_advance_contract():
    hw = hardware()
    node = new_node(0, 5.0)
    node.cold_start_ready = True
    settle(node, hw, QUIET)
    with pytest.raises(EngineContractError):
        advance(node, hw, QUIET, 0.0, 0.0)
    with pytest.raises(EngineContractError):
        advance(node, hw, QUIET, 0.0, 2000.0)


def test_debit_for_relay():
    hw = hardware()
    node = new_node(0, 1.0)
    node.cold_start_ready = True
    settle(node, hw, QUIET)
    ok, _ = debit(node, hw, 0.37)
    assert ok and node.battery.soc == pytest.approx(0.63) and node.tally.relay == pytest.approx(0.37)
    ok, events = debit(node, hw, 5.0)
    assert not ok and node.phase is NodePhase.OFFLINE and events[0].kind == "brown_out"


def test_never_offline_day_vs_ledger():
    hw = hardware(battery=default_battery_model(capacity=1000.0))
    node = new_node(0, 500.0)
    _, packets = run_node(node, hw, 0.0, 86400)
    assert len(packets) == 96
    ledger_total = float(sum(oracles.exact_consumption()))
    assert node.tally.total_consumed == pytest.approx(96 * DUTY.cycle_energy, rel=1e-12)
    assert abs(node.tally.total_consumed - ledger_total) / ledger_total <= 0.01


def test_determinism():
    hwa = NodeHardware(0, sensing=SensingFrontEnd(noise=True))
    hwb = NodeHardware(0, sensing=SensingFrontEnd(noise=True))
    a, b = new_node(0, 5.0), new_node(0, 5.0)
    _, pa = run_node(a, hwa, 0.0, 4 * 900)
    _, pb = run_node(b, hwb, 0.0, 4 * 900)
    assert [p.measurement for p in pa] == [p.measurement for p in pb]
