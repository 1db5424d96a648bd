"""Harvested-power models for the four ambient sources.

Each model maps its environmental driver to *cell-side* power: the raw
transducer output times a lumped conversion efficiency. The default
efficiencies are the ratios between the recovered daily energies of the
reference office-window day and the raw source energies, so the defaults
land on those daily totals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

from .quantities import SPEED_OF_LIGHT, OperatingPoint

if TYPE_CHECKING:
    from .scenario import EnvSample

SOURCES = ("pv_indoor", "pv_outdoor", "teg", "piezo", "rf")


def _check_efficiency(eta: float) -> None:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"conversion efficiency must lie in [0, 1], got {eta}")


@dataclass(frozen=True)
class PvPanelModel:
    """Amorphous-silicon cell, linear in illuminance through one calibration point."""

    mode: str
    calibration_illuminance: float
    calibration_point: OperatingPoint
    conversion_efficiency: float
    enabled: bool = True

    def __post_init__(self):
        if self.mode not in ("indoor", "outdoor"):
            raise ValueError(f"PV mode must be 'indoor' or 'outdoor', got {self.mode!r}")
        if self.calibration_illuminance <= 0:
            raise ValueError("calibration illuminance must be positive")
        _check_efficiency(self.conversion_efficiency)

    @property
    def slope(self) -> float:
        """Raw W per lux."""
        return self.calibration_point.power / self.calibration_illuminance

    def raw_power(self, illuminance: float) -> float:
        if illuminance < 0:
            raise ValueError(f"illuminance must be non-negative, got {illuminance}")
        return self.slope * illuminance


def pv_power(model: PvPanelModel, illuminance: float) -> float:
    if not model.enabled:
        return 0.0
    return model.conversion_efficiency * model.raw_power(illuminance)


@dataclass(frozen=True)
class TegBankModel:
    """TEG bank as a calibration table of (delta-T, raw W), piecewise linear.

    Below ``activation_threshold`` the converter does not start and output is
    zero. Between the threshold and the first table entry the output is scaled
    proportionally from the first entry; above the table the last segment's
    slope is extended.
    """

    calibration_table: tuple[tuple[float, float], ...]
    activation_threshold: float
    conversion_efficiency: float
    enabled: bool = True

    def __post_init__(self):
        table = self.calibration_table
        if not table:
            raise ValueError("TEG calibration table is empty")
        for (t0, p0), (t1, p1) in zip(table, table[1:]):
            if not t1 > t0:
                raise ValueError("TEG table must be strictly increasing in delta-T")
            if p1 < p0:
                raise ValueError("TEG table power must be non-decreasing")
        if table[0][0] <= 0 or table[0][1] < 0:
            raise ValueError("TEG table must start at a positive delta-T with non-negative power")
        if self.activation_threshold < 0:
            raise ValueError("activation threshold must be non-negative")
        _check_efficiency(self.conversion_efficiency)

    def raw_power(self, delta_t: float) -> float:
        dt = abs(delta_t)  # auto-polarity front end
        if dt < self.activation_threshold or dt == 0.0:
            return 0.0
        table = self.calibration_table
        t_first, p_first = table[0]
        if dt <= t_first:
            return p_first * dt / t_first
        for (t0, p0), (t1, p1) in zip(table, table[1:]):
            if dt <= t1:
                return p0 + (p1 - p0) * (dt - t0) / (t1 - t0)
        if len(table) == 1:
            return p_first * dt / t_first
        (t0, p0), (t1, p1) = table[-2], table[-1]
        return max(0.0, p1 + (p1 - p0) / (t1 - t0) * (dt - t1))


def teg_power(model: TegBankModel, delta_t: float) -> float:
    if not model.enabled:
        return 0.0
    return model.conversion_efficiency * model.raw_power(delta_t)


@dataclass(frozen=True)
class PiezoModel:
    """Resonant cantilever harvester.

    Peak power follows a power law in acceleration through two calibration
    points; away from resonance it is weighted by a Lorentzian of width
    ``f0 / Q``.
    """

    resonant_frequency: float = 36.5
    seismic_mass: float = 2.27  # grams
    quality_factor: float = 50.0
    amplitude_calibration: tuple[tuple[float, float], ...] = ((0.3, 0.319e-3), (0.5, 0.678e-3))
    conversion_efficiency: float = 1.0
    enabled: bool = False

    def __post_init__(self):
        if self.resonant_frequency <= 0 or self.quality_factor <= 0:
            raise ValueError("resonant frequency and quality factor must be positive")
        if len(self.amplitude_calibration) != 2:
            raise ValueError("piezo power-law fit needs exactly two calibration points")
        (a0, p0), (a1, p1) = self.amplitude_calibration
        if not (0 < a0 < a1 and 0 < p0 < p1):
            raise ValueError("piezo calibration must be strictly increasing in acceleration and power")
        _check_efficiency(self.conversion_efficiency)

    @property
    def exponent(self) -> float:
        (a0, p0), (a1, p1) = self.amplitude_calibration
        return math.log(p1 / p0) / math.log(a1 / a0)

    def peak_power(self, acceleration: float) -> float:
        if acceleration < 0:
            raise ValueError(f"acceleration must be non-negative, got {acceleration}")
        if acceleration == 0:
            return 0.0
        a0, p0 = self.amplitude_calibration[0]
        return p0 * (acceleration / a0) ** self.exponent

    def lorentzian(self, frequency: float) -> float:
        if frequency < 0:
            raise ValueError(f"frequency must be non-negative, got {frequency}")
        f0 = self.resonant_frequency
        detune = 2.0 * self.quality_factor * (frequency - f0) / f0
        return 1.0 / (1.0 + detune * detune)

    def raw_power(self, frequency: float, acceleration: float) -> float:
        return self.peak_power(acceleration) * self.lorentzian(frequency)


def piezo_power(model: PiezoModel, frequency: float, acceleration: float) -> float:
    if not model.enabled:
        return 0.0
    return model.conversion_efficiency * model.raw_power(frequency, acceleration)


@dataclass(frozen=True)
class RfHarvesterModel:
    """Far-field RF rectenna behind a free-space (Friis) link with isotropic antennas."""

    carrier_frequency: float = 915e6
    conversion_efficiency: float = 0.2554
    sensitivity_floor: float = 1e-6
    enabled: bool = True

    def __post_init__(self):
        if self.carrier_frequency <= 0:
            raise ValueError("carrier frequency must be positive")
        if self.sensitivity_floor < 0:
            raise ValueError("sensitivity floor must be non-negative")
        _check_efficiency(self.conversion_efficiency)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    def received_power(self, eirp: float, distance: float) -> float:
        if distance <= 0:
            raise ValueError(f"free-space model is singular at distance {distance}")
        if eirp < 0:
            raise ValueError(f"EIRP must be non-negative, got {eirp}")
        return eirp * (self.wavelength / (4.0 * math.pi * distance)) ** 2


def rf_power(model: RfHarvesterModel, eirp: float, distance: float) -> float:
    received = model.received_power(eirp, distance)
    if not model.enabled or received < model.sensitivity_floor:
        return 0.0
    return model.conversion_efficiency * received


def default_pv_indoor() -> PvPanelModel:
    return PvPanelModel("indoor", 200.0, OperatingPoint(3.0, 18.5e-6), 0.80)


def default_pv_outdoor() -> PvPanelModel:
    return PvPanelModel("outdoor", 50_000.0, OperatingPoint(5.0, 4.5e-3), 1.0)


def default_teg() -> TegBankModel:
    # 5 V @ 100 uA at the 6 C activation gradient; 0.562 mW at 15 C
    return TegBankModel(((6.0, 0.5e-3), (15.0, 0.562e-3)), activation_threshold=6.0, conversion_efficiency=0.90)


@dataclass(frozen=True)
class HarvesterSet:
    pv_indoor: PvPanelModel = field(default_factory=default_pv_indoor)
    pv_outdoor: PvPanelModel = field(default_factory=default_pv_outdoor)
    teg: TegBankModel = field(default_factory=default_teg)
    piezo: PiezoModel = field(default_factory=PiezoModel)
    rf: RfHarvesterModel = field(default_factory=RfHarvesterModel)

    def __post_init__(self):
        if self.pv_indoor.mode != "indoor" or self.pv_outdoor.mode != "outdoor":
            raise ValueError("pv_indoor/pv_outdoor models have mismatched modes")

    def disabled(self) -> HarvesterSet:
        """Copy with every source switched off."""
        return HarvesterSet(
            replace(self.pv_indoor, enabled=False),
            replace(self.pv_outdoor, enabled=False),
            replace(self.teg, enabled=False),
            replace(self.piezo, enabled=False),
            replace(self.rf, enabled=False),
        )


def harvest_breakdown(hs: HarvesterSet, sample: EnvSample, rf_distance: float | None = None) -> dict[str, float]:
    """Per-source cell-side power for one environment sample.

    Only the PV cell matching ``sample.light_regime`` contributes.
    ``rf_distance`` overrides the sample's distance (per-node placement).
    """
    indoor = sample.light_regime == "indoor"
    distance = sample.rf_distance if rf_distance is None else rf_distance
    rf = 0.0
    if sample.rf_eirp > 0:
        rf = rf_power(hs.rf, sample.rf_eirp, distance)
    return {
        "pv_indoor": pv_power(hs.pv_indoor, sample.illuminance) if indoor else 0.0,
        "pv_outdoor": 0.0 if indoor else pv_power(hs.pv_outdoor, sample.illuminance),
        "teg": teg_power(hs.teg, sample.teg_delta_t),
        "piezo": piezo_power(hs.piezo, sample.vibration_frequency, sample.vibration_acceleration),
        "rf": rf,
    }


def total_harvest_power(
    hs: HarvesterSet, sample: EnvSample, rf_distance: float | None = None
) -> tuple[float, dict[str, float]]:
    parts = harvest_breakdown(hs, sample, rf_distance)
    return math.fsum(parts.values()), parts
