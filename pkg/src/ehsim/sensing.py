"""Electrochemical gas channels: forward signal chain and its inverse.

Forward: ppm -> sensor current (span drift with temperature, optional
Gaussian noise) -> transimpedance voltage -> 10-bit SAR counts.
Inverse: counts -> ppm, times a quartic temperature correction factor fitted
against calibration-chamber data, then an optional cross-sensitivity
un-mixing across the six channels.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, FitError, InsufficientDataError

if TYPE_CHECKING:
    from .scenario import EnvSample

REFERENCE_TEMPERATURE_C = 25.0
POLY_DEGREE = 4


class GasSpecies(enum.Enum):
    CO = "CO"
    NO2 = "NO2"
    H2S = "H2S"
    NH3 = "NH3"
    NO = "NO"
    Cl2 = "Cl2"

    @property
    def column(self) -> str:
        return f"{self.value.lower()}_ppm"

    @classmethod
    def parse(cls, name: str) -> GasSpecies:
        for sp in cls:
            if sp.value.lower() == name.strip().lower():
                return sp
        raise ValueError(f"unknown gas species {name!r}")


SPECIES = tuple(GasSpecies)


@dataclass(frozen=True)
class DriftCurve:
    """Normalized sensitivity multiplier s(T) with s(25 C) = 1.

    Two linear span-drift branches (steeper when cold) joined by a parabola
    tangent to both at +/- ``blend_width`` around 25 C, then renormalized so
    the reference point is exactly 1.
    """

    cold_slope: float = 0.003  # per C below 25 C
    hot_slope: float = 0.0008  # per C above 25 C
    blend_width: float = 2.0

    def _kinked(self, x):
        a, b, w = self.cold_slope, self.hot_slope, self.blend_width
        x = np.asarray(x, dtype=float)
        left = 1.0 + a * x
        right = 1.0 - b * x
        if w <= 0:
            return np.where(x < 0, left, right)
        beta = (a - b) / 2.0
        gamma = -(a + b) / (4.0 * w)
        alpha = 1.0 - b * w - beta * w - gamma * w * w
        mid = alpha + beta * x + gamma * x * x
        return np.where(x <= -w, left, np.where(x >= w, right, mid))

    def __call__(self, temperature):
        ref = float(self._kinked(0.0))
        out = self._kinked(np.asarray(temperature, dtype=float) - REFERENCE_TEMPERATURE_C) / ref
        return float(out) if np.ndim(out) == 0 else out

    @classmethod
    def flat(cls) -> DriftCurve:
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class SensorSpec:
    species: GasSpecies
    sensitivity: float  # A per ppm at 25 C
    full_scale: float  # ppm
    accuracy: float  # fraction of full scale
    drift: DriftCurve = field(default_factory=DriftCurve)

    def __post_init__(self):
        if self.sensitivity <= 0 or self.full_scale <= 0:
            raise ValueError(f"{self.species.value}: sensitivity and full scale must be positive")
        if not 0 < self.accuracy < 1:
            raise ValueError(f"{self.species.value}: accuracy must lie in (0, 1)")

    @property
    def accuracy_band(self) -> float:
        """Accuracy in ppm."""
        return self.accuracy * self.full_scale

    @property
    def noise_sigma(self) -> float:
        """Measurement noise sigma in ppm; the accuracy band is read as 2 sigma."""
        return self.accuracy_band / 2.0


# (sensitivity nA/ppm, full scale ppm, accuracy %FS)
_DEFAULTS = {
    GasSpecies.CO: (70.0, 1000.0, 0.03),
    GasSpecies.NO2: (600.0, 20.0, 0.05),
    GasSpecies.H2S: (700.0, 100.0, 0.05),
    GasSpecies.NH3: (40.0, 100.0, 0.10),
    GasSpecies.NO: (400.0, 250.0, 0.05),
    GasSpecies.Cl2: (600.0, 20.0, 0.05),
}


def default_sensor_specs(drift: DriftCurve | None = None) -> dict[GasSpecies, SensorSpec]:
    drift = drift or DriftCurve()
    return {sp: SensorSpec(sp, nA * 1e-9, fs, acc, drift) for sp, (nA, fs, acc) in _DEFAULTS.items()}


@dataclass(frozen=True)
class AnalogFrontEnd:
    transimpedance_gain: float  # ohms
    output_offset: float = 0.0
    rail: float = 3.3

    def __post_init__(self):
        if self.transimpedance_gain <= 0 or self.rail <= 0:
            raise ValueError("transimpedance gain and rail must be positive")

    @classmethod
    def for_spec(cls, spec: SensorSpec, rail: float = 3.3, offset: float = 0.0) -> AnalogFrontEnd:
        """Gain that maps the full-scale current onto the rail."""
        return cls((rail - offset) / (spec.sensitivity * spec.full_scale), offset, rail)


@dataclass(frozen=True)
class AdcSpec:
    bits: int = 10
    reference: float = 3.3

    @property
    def levels(self) -> int:
        return 1 << self.bits

    @property
    def max_count(self) -> int:
        return self.levels - 1


@dataclass(frozen=True)
class CompensationPoly:
    """Multiplicative correction factor as a quartic in (T - 25 C)."""

    coefficients: tuple[float, ...] = (1.0, 0.0, 0.0, 0.0, 0.0)
    max_residual: float | None = None  # ppm, over the calibration grid
    species: GasSpecies | None = None

    def __post_init__(self):
        if len(self.coefficients) != POLY_DEGREE + 1:
            raise ValueError(f"compensation polynomial needs {POLY_DEGREE + 1} coefficients")

    def __call__(self, temperature: float) -> float:
        x = temperature - REFERENCE_TEMPERATURE_C
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def to_json(self) -> dict:
        return {
            "species": self.species.value if self.species else None,
            "reference_temperature_c": REFERENCE_TEMPERATURE_C,
            "coefficients": list(self.coefficients),
            "max_residual_ppm": self.max_residual,
        }

    @classmethod
    def from_json(cls, data: dict) -> CompensationPoly:
        species = GasSpecies.parse(data["species"]) if data.get("species") else None
        return cls(tuple(float(c) for c in data["coefficients"]), data.get("max_residual_ppm"), species)


IDENTITY_POLY = CompensationPoly()


def sensor_current(
    spec: SensorSpec, ppm: float, temperature: float, rng: np.random.Generator | None = None
) -> float:
    """Sensor output current; Gaussian noise of ``spec.noise_sigma`` ppm when ``rng`` is given."""
    if ppm < 0:
        raise ValueError(f"concentration must be non-negative, got {ppm}")
    level = ppm
    if rng is not None:
        level = ppm + rng.normal(0.0, spec.noise_sigma)
    return spec.sensitivity * spec.drift(temperature) * level


def afe_voltage(afe: AnalogFrontEnd, current: float) -> float:
    v = afe.transimpedance_gain * current + afe.output_offset
    return min(max(v, 0.0), afe.rail)


def adc_sample(adc: AdcSpec, volts: float) -> int:
    v = min(max(volts, 0.0), adc.reference)
    return min(int(math.floor(v / adc.reference * adc.levels)), adc.max_count)


def counts_to_ppm(
    spec: SensorSpec,
    afe: AnalogFrontEnd,
    adc: AdcSpec,
    counts: int,
    temperature: float,
    poly: CompensationPoly = IDENTITY_POLY,
) -> float:
    """Invert the chain at mid-code, apply the correction factor, clamp to [0, FS].

    Code 0 reads as exactly 0 ppm rather than half an LSB.
    """
    if isinstance(counts, bool) or int(counts) != counts or not 0 <= counts <= adc.max_count:
        raise ValueError(f"ADC counts must be an integer in [0, {adc.max_count}], got {counts}")
    if counts == 0:
        return 0.0
    volts = (counts + 0.5) * adc.reference / adc.levels
    current = max(volts - afe.output_offset, 0.0) / afe.transimpedance_gain
    raw = current / spec.sensitivity
    return float(min(max(raw * poly(temperature), 0.0), spec.full_scale))


def forward_counts(
    spec: SensorSpec,
    afe: AnalogFrontEnd,
    adc: AdcSpec,
    ppm: float,
    temperature: float,
    rng: np.random.Generator | None = None,
) -> int:
    return adc_sample(adc, afe_voltage(afe, sensor_current(spec, ppm, temperature, rng)))


@dataclass(frozen=True)
class CalibrationPoint:
    temperature_c: float
    species: GasSpecies
    true_ppm: float
    raw_ppm: float


def calibration_grid(
    spec: SensorSpec,
    temperatures: Iterable[float],
    levels: Sequence[float] = (0.2, 0.5, 0.8),
    afe: AnalogFrontEnd | None = None,
    adc: AdcSpec | None = None,
) -> list[CalibrationPoint]:
    """Noise-free chamber sweep: ``levels`` are fractions of full scale, raw read with no correction."""
    afe = afe or AnalogFrontEnd.for_spec(spec)
    adc = adc or AdcSpec()
    grid = []
    for t in temperatures:
        for frac in levels:
            true = frac * spec.full_scale
            counts = forward_counts(spec, afe, adc, true, t)
            grid.append(CalibrationPoint(float(t), spec.species, true, counts_to_ppm(spec, afe, adc, counts, t)))
    return grid


def fit_compensation(spec: SensorSpec, grid: Sequence[CalibrationPoint]) -> CompensationPoly:
    """Least-squares quartic for the correction factor true/raw against (T - 25 C)."""
    rows = [p for p in grid if p.species == spec.species and p.raw_ppm > 0]
    temps = {p.temperature_c for p in rows}
    if len(temps) < POLY_DEGREE + 1:
        raise InsufficientDataError(
            f"{spec.species.value}: need at least {POLY_DEGREE + 1} distinct temperatures, got {len(temps)}"
        )
    x = np.array([p.temperature_c for p in rows]) - REFERENCE_TEMPERATURE_C
    y = np.array([p.true_ppm / p.raw_ppm for p in rows])
    design = np.vander(x, POLY_DEGREE + 1, increasing=True)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < POLY_DEGREE + 1:
        raise FitError(f"{spec.species.value}: singular calibration design (rank {rank})")
    poly = CompensationPoly(tuple(float(c) for c in coef), species=spec.species)
    residual = max(abs(p.raw_ppm * poly(p.temperature_c) - p.true_ppm) for p in rows)
    return CompensationPoly(poly.coefficients, residual, spec.species)


GRID_COLUMNS = ("temperature_c", "species", "true_ppm", "raw_ppm")


def write_calibration_grid(path: str | Path, grid: Iterable[CalibrationPoint]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(GRID_COLUMNS)
        for p in grid:
            w.writerow([repr(float(p.temperature_c)), p.species.value, repr(float(p.true_ppm)), repr(float(p.raw_ppm))])


def read_calibration_grid(path: str | Path) -> list[CalibrationPoint]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in GRID_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"calibration grid missing columns: {', '.join(missing)}")
        out = []
        for i, row in enumerate(reader, start=2):
            try:
                out.append(
                    CalibrationPoint(
                        float(row["temperature_c"]),
                        GasSpecies.parse(row["species"]),
                        float(row["true_ppm"]),
                        float(row["raw_ppm"]),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"calibration grid row {i}: {exc}") from None
        return out


class CrossSensitivityMatrix:
    """Mixing ``reading = M @ true`` across channels in ``SPECIES`` order."""

    def __init__(self, matrix=None):
        m = np.eye(len(SPECIES)) if matrix is None else np.array(matrix, dtype=float)
        if m.shape != (len(SPECIES), len(SPECIES)):
            raise ConfigurationError(f"cross-sensitivity matrix must be 6x6, got {m.shape}")
        if not np.allclose(np.diag(m), 1.0, rtol=0, atol=1e-12):
            raise ConfigurationError("cross-sensitivity matrix must have a unit diagonal")
        self.condition_number = float(np.linalg.cond(m))
        if not np.isfinite(self.condition_number) or self.condition_number > 1e12:
            raise ConfigurationError(f"cross-sensitivity matrix is singular (cond={self.condition_number:.3g})")
        self.matrix = m
        self._inverse = np.linalg.inv(m)

    @classmethod
    def with_entries(cls, entries: dict[tuple[GasSpecies, GasSpecies], float]) -> CrossSensitivityMatrix:
        m = np.eye(len(SPECIES))
        for (row, col), v in entries.items():
            m[SPECIES.index(row), SPECIES.index(col)] = v
        return cls(m)

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(len(SPECIES))))

    def mix(self, true_ppm: Sequence[float]) -> np.ndarray:
        return self.matrix @ np.asarray(true_ppm, dtype=float)


def apply_cross_correction(matrix: CrossSensitivityMatrix, readings: Sequence[float]) -> np.ndarray:
    out = matrix._inverse @ np.asarray(readings, dtype=float)
    return np.maximum(out, 0.0)


def read_environment(
    sample: EnvSample,
    rng: np.random.Generator | None = None,
    sigma_t: float = 0.3,
    sigma_rh: float = 2.0,
) -> tuple[float, float]:
    """Temperature / humidity sensor reading; noise-free when ``rng`` is None."""
    t, rh = sample.ambient_temperature, sample.relative_humidity
    if rng is not None:
        t += rng.normal(0.0, sigma_t)
        rh += rng.normal(0.0, sigma_rh)
    return t, min(max(rh, 0.0), 100.0)


@dataclass
class SensingFrontEnd:
    """All six channels plus fitted compensation, as mounted on one node."""

    specs: dict[GasSpecies, SensorSpec] = field(default_factory=default_sensor_specs)
    adc: AdcSpec = field(default_factory=AdcSpec)
    rail: float = 3.3
    cross: CrossSensitivityMatrix = field(default_factory=CrossSensitivityMatrix)
    noise: bool = True
    sigma_t: float = 0.3
    sigma_rh: float = 2.0
    polys: dict[GasSpecies, CompensationPoly] | None = None

    def __post_init__(self):
        if set(self.specs) != set(SPECIES):
            raise ConfigurationError("sensing front end needs a spec for each of the six species")
        self.afes = {sp: AnalogFrontEnd.for_spec(s, self.rail) for sp, s in self.specs.items()}
        if self.polys is None:
            temps = np.arange(-10.0, 50.0 + 1e-9, 5.0)
            self.polys = {
                sp: fit_compensation(s, calibration_grid(s, temps, afe=self.afes[sp], adc=self.adc))
                for sp, s in self.specs.items()
            }

    def measure(
        self, sample: EnvSample, sensing_rng: np.random.Generator | None, env_rng: np.random.Generator | None
    ) -> tuple[list[float], float, float]:
        """Sample all channels; returns (ppm per species, temperature, RH)."""
        if not self.noise:
            sensing_rng = env_rng = None
        temp, rh = read_environment(sample, env_rng, self.sigma_t, self.sigma_rh)
        true = [sample.gas[sp] for sp in SPECIES]
        mixed = true if self.cross.is_identity else np.maximum(self.cross.mix(true), 0.0)
        readings = []
        for sp, ppm in zip(SPECIES, mixed):
            spec, afe = self.specs[sp], self.afes[sp]
            counts = forward_counts(spec, afe, self.adc, float(ppm), sample.ambient_temperature, sensing_rng)
            readings.append(counts_to_ppm(spec, afe, self.adc, counts, temp, self.polys[sp]))
        if not self.cross.is_identity:
            readings = [
                min(float(v), self.specs[sp].full_scale)
                for sp, v in zip(SPECIES, apply_cross_correction(self.cross, readings))
            ]
        return readings, temp, rh
