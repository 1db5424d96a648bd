"""Closed-form daily energy ledger for the reference office-window day.

This is the independent check on the time-stepped simulator. It keeps the
reference table's own duty readings, where sleep is "14 of every 15
minutes" even though warm-up and transmit also occupy 64 s of the period,
so the three lines cover 904 s. The simulator tiles the period properly
(836 s sleep); the two consumption totals differ by about 0.005 J/day.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .harvest import HarvesterSet, pv_power, rf_power, teg_power
from .node import DutyCycleConfig
from .quantities import SECONDS_PER_DAY, OperatingPoint, energy_of


@dataclass(frozen=True)
class LedgerLine:
    label: str
    duty: str
    energy: float  # J/day
    operating_point: OperatingPoint | None = None


@dataclass(frozen=True)
class OfficeWindowConditions:
    indoor_lux: float = 200.0
    indoor_hours: float = 8.0
    outdoor_lux: float = 50_000.0
    outdoor_minutes: float = 15.0
    teg_delta_t: float = 6.0
    teg_hours: float = 10.0
    rf_eirp: float = 3.0
    rf_distance: float = 5.0
    rf_hours: float = 24.0


@dataclass(frozen=True)
class EnergyLedger:
    consumption: tuple[LedgerLine, ...]
    recovery: tuple[LedgerLine, ...]

    @property
    def total_consumption(self) -> float:
        return math.fsum(line.energy for line in self.consumption)

    @property
    def total_recovery(self) -> float:
        return math.fsum(line.energy for line in self.recovery)

    @property
    def margin(self) -> float:
        return self.total_recovery - self.total_consumption


def _minutes(seconds: float) -> str:
    if seconds >= 60 and seconds % 60 == 0:
        m = seconds / 60
        return f"{m:g} minute" + ("s" if m != 1 else "")
    return f"{seconds:g} seconds"


def consumption_ledger(config: DutyCycleConfig) -> tuple[tuple[LedgerLine, ...], float]:
    per_day = config.periods_per_day
    every = f"every {_minutes(config.period)}"
    sleep_reading = config.period - config.warmup_duration
    lines = (
        LedgerLine(
            "Sensor warm-up",
            f"{_minutes(config.warmup_duration)} {every}",
            energy_of(config.warmup_point.power, config.warmup_duration * per_day),
            config.warmup_point,
        ),
        LedgerLine(
            "Data transmission and processing",
            f"{_minutes(config.transmit_duration)} {every}",
            energy_of(config.transmit_point.power, config.transmit_duration * per_day),
            config.transmit_point,
        ),
        LedgerLine(
            "Sleep mode",
            f"{_minutes(sleep_reading)} {every}",
            energy_of(config.sleep_point.power, sleep_reading * per_day),
            config.sleep_point,
        ),
    )
    return lines, math.fsum(line.energy for line in lines)


def recovery_ledger(
    hs: HarvesterSet, conditions: OfficeWindowConditions | None = None
) -> tuple[tuple[LedgerLine, ...], float]:
    c = conditions or OfficeWindowConditions()
    rf_w = rf_power(hs.rf, c.rf_eirp, c.rf_distance) if c.rf_eirp > 0 else 0.0
    lines = (
        LedgerLine(
            "Internal artificial light",
            f"{c.indoor_hours:g} h @ {c.indoor_lux:g} lux",
            energy_of(pv_power(hs.pv_indoor, c.indoor_lux), c.indoor_hours * 3600.0),
            hs.pv_indoor.calibration_point,
        ),
        LedgerLine(
            "External light",
            f"{c.outdoor_minutes:g} min @ {c.outdoor_lux / 1000:g} klux",
            energy_of(pv_power(hs.pv_outdoor, c.outdoor_lux), c.outdoor_minutes * 60.0),
            hs.pv_outdoor.calibration_point,
        ),
        LedgerLine(
            "Temperature gradient through a window",
            f"{c.teg_hours:g} h with {c.teg_delta_t:g} C, {24 - c.teg_hours:g} h with 0 C",
            energy_of(teg_power(hs.teg, c.teg_delta_t), c.teg_hours * 3600.0),
        ),
        LedgerLine(
            f"RF energy @ {hs.rf.carrier_frequency / 1e6:g} MHz",
            f"{c.rf_eirp:g} W EIRP at {c.rf_distance:g} m, {c.rf_hours:g} h",
            energy_of(rf_w, c.rf_hours * 3600.0),
        ),
    )
    return lines, math.fsum(line.energy for line in lines)


def build_ledger(
    config: DutyCycleConfig | None = None,
    hs: HarvesterSet | None = None,
    conditions: OfficeWindowConditions | None = None,
) -> EnergyLedger:
    cons, _ = consumption_ledger(config or DutyCycleConfig())
    rec, _ = recovery_ledger(hs or HarvesterSet(), conditions)
    return EnergyLedger(cons, rec)


def margin(ledger: EnergyLedger) -> float:
    return ledger.margin


def simulated_daily_consumption(config: DutyCycleConfig) -> float:
    """Consumption of a never-offline node with the tiled schedule, J/day."""
    return config.cycle_energy * config.periods_per_day


def ledger_to_json(ledger: EnergyLedger, config: DutyCycleConfig | None = None) -> dict:
    def line(line: LedgerLine) -> dict:
        out = {"label": line.label, "duty": line.duty, "energy_j_per_day": line.energy}
        if line.operating_point is not None:
            out["voltage_v"] = line.operating_point.voltage
            out["current_a"] = line.operating_point.current
        return out

    data = {
        "consumption": [line(x) for x in ledger.consumption],
        "recovery": [line(x) for x in ledger.recovery],
        "total_consumption_j_per_day": ledger.total_consumption,
        "total_recovery_j_per_day": ledger.total_recovery,
        "margin_j_per_day": ledger.margin,
    }
    if config is not None:
        data["simulated_consumption_j_per_day"] = simulated_daily_consumption(config)
    return data


def render_ledger(ledger: EnergyLedger, config: DutyCycleConfig | None = None) -> str:
    rows: list[tuple[str, str]] = []

    def op(line: LedgerLine) -> str:
        p = line.operating_point
        if p is None:
            return ""
        amps = p.current
        cur = f"{amps * 1e3:g} mA" if amps >= 1e-3 else f"{amps * 1e6:g} uA"
        return f" ({cur} @ {p.voltage:g} V)"

    for x in ledger.consumption:
        rows.append((f"{x.label} ({x.duty}){op(x)}", f"{x.energy:.3f}"))
    rows.append(("Total energy required per day", f"{ledger.total_consumption:.3f}"))
    rows.append(("Total energy recovered per day", f"{ledger.total_recovery:.3f}"))
    for i, x in enumerate(ledger.recovery, start=1):
        rows.append((f"  {i}- {x.label} ({x.duty}){op(x)}", f"{x.energy:.3f}"))
    rows.append(("Margin (recovered - required)", f"{ledger.margin:+.3f}"))
    if config is not None:
        rows.append(
            (
                f"Simulated consumption, tiled {config.sleep_duration:g} s sleep",
                f"{simulated_daily_consumption(config):.3f}",
            )
        )
    width = max(len(label) for label, _ in rows)
    header = f"{'Operation':<{width}}  Energy per day (J/d)"
    lines = [header, "-" * len(header)]
    lines += [f"{label:<{width}}  {value:>10}" for label, value in rows]
    return "\n".join(lines) + "\n"
