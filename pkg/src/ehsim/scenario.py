"""Environment traces: CSV ingestion, validation and canonical generators.

A trace is a list of step-held samples: sample ``i`` applies on
``[t_i, t_{i+1})`` and the last one up to ``trace.end``.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .errors import TraceParseError
from .rng import stream
from .sensing import SPECIES, GasSpecies

TRACE_COLUMNS = (
    "timestamp_s",
    "lux",
    "light_regime",
    "ambient_c",
    "rh_pct",
    "teg_dt_c",
    "vib_hz",
    "vib_g",
    "rf_eirp_w",
    "rf_dist_m",
    "co_ppm",
    "no2_ppm",
    "h2s_ppm",
    "nh3_ppm",
    "no_ppm",
    "cl2_ppm",
)
OPTIONAL_COLUMNS = ("lat", "lon")
LIGHT_REGIMES = ("indoor", "outdoor")
_NON_NEGATIVE = ("lux", "rh_pct", "vib_hz", "vib_g", "rf_eirp_w", "rf_dist_m") + tuple(sp.column for sp in SPECIES)


@dataclass(frozen=True)
class EnvSample:
    timestamp: float
    illuminance: float = 0.0
    light_regime: str = "indoor"
    ambient_temperature: float = 25.0
    relative_humidity: float = 50.0
    teg_delta_t: float = 0.0
    vibration_frequency: float = 0.0
    vibration_acceleration: float = 0.0
    rf_eirp: float = 0.0
    rf_distance: float = 1.0
    gas: dict[GasSpecies, float] = field(default_factory=lambda: {sp: 0.0 for sp in SPECIES})
    lat: float | None = None
    lon: float | None = None

    def __post_init__(self):
        problems = sample_problems(self)
        if problems:
            column, message = problems[0]
            raise ValueError(f"{column}: {message}")

    def as_row(self) -> dict[str, object]:
        row: dict[str, object] = {
            "timestamp_s": self.timestamp,
            "lux": self.illuminance,
            "light_regime": self.light_regime,
            "ambient_c": self.ambient_temperature,
            "rh_pct": self.relative_humidity,
            "teg_dt_c": self.teg_delta_t,
            "vib_hz": self.vibration_frequency,
            "vib_g": self.vibration_acceleration,
            "rf_eirp_w": self.rf_eirp,
            "rf_dist_m": self.rf_distance,
        }
        for sp in SPECIES:
            row[sp.column] = self.gas[sp]
        return row


def sample_problems(s: EnvSample) -> list[tuple[str, str]]:
    """(column, message) for every invariant the sample violates."""
    if set(s.gas) != set(SPECIES):
        return [("gas", "sample must carry all six species")]
    out = []
    values = s.as_row()
    for col in ("timestamp_s",) + _NON_NEGATIVE + ("ambient_c", "teg_dt_c"):
        if not math.isfinite(values[col]):
            out.append((col, "value is not finite"))
    for col in _NON_NEGATIVE:
        if values[col] < 0:
            out.append((col, f"negative value {values[col]}"))
    if s.relative_humidity > 100:
        out.append(("rh_pct", f"relative humidity {s.relative_humidity} exceeds 100"))
    if s.light_regime not in LIGHT_REGIMES:
        out.append(("light_regime", f"must be one of {LIGHT_REGIMES}, got {s.light_regime!r}"))
    if s.rf_eirp > 0 and not s.rf_distance > 0:
        out.append(("rf_dist_m", "distance must be positive when rf_eirp_w > 0"))
    return out


class EnvTrace:
    """Immutable, strictly time-ordered, step-interpolated sequence of samples."""

    def __init__(self, samples: Iterable[EnvSample], end: float | None = None):
        self.samples = tuple(samples)
        if not self.samples:
            raise ValueError("trace must contain at least one sample")
        self.times = tuple(s.timestamp for s in self.samples)
        for i in range(1, len(self.times)):
            if not self.times[i] > self.times[i - 1]:
                raise ValueError(f"non-monotone timestamp at row {i + 1}")
        if end is None:
            last_width = self.times[-1] - self.times[-2] if len(self.times) > 1 else 60.0
            end = self.times[-1] + last_width
        if not end > self.times[-1]:
            raise ValueError("trace end must follow the last sample")
        self.end = float(end)

    @property
    def start(self) -> float:
        return self.times[0]

    @property
    def span(self) -> float:
        return self.end - self.start

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i: int) -> EnvSample:
        return self.samples[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, EnvTrace) and self.samples == other.samples and self.end == other.end

    def index_at(self, t: float) -> int:
        """Index of the sample holding at time ``t`` (clamped to the first/last sample)."""
        return max(bisect.bisect_right(self.times, t) - 1, 0)

    def sample_at(self, t: float) -> EnvSample:
        return self.samples[self.index_at(t)]

    def series(self, column: str) -> np.ndarray:
        return np.array([s.as_row()[column] for s in self.samples], dtype=float)

    def integrate(self, fn: Callable[[EnvSample], float]) -> float:
        """Integral over the trace of a step-held function of the sample."""
        bounds = self.times[1:] + (self.end,)
        return math.fsum(fn(s) * (b - s.timestamp) for s, b in zip(self.samples, bounds))


def _fmt(v) -> str:
    return v if isinstance(v, str) else repr(float(v))


def write_trace(trace: EnvTrace, path: str | Path | None = None) -> str:
    """Serialize as CSV (exact float round-trip). Returns the text; writes it when ``path`` is given."""
    with_geo = any(s.lat is not None or s.lon is not None for s in trace)
    columns = TRACE_COLUMNS + (OPTIONAL_COLUMNS if with_geo else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for s in trace:
        row = [_fmt(v) for v in s.as_row().values()]
        if with_geo:
            row += ["" if s.lat is None else repr(s.lat), "" if s.lon is None else repr(s.lon)]
        w.writerow(row)
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def parse_trace(source: str | Path | io.TextIOBase) -> EnvTrace:
    """Parse a trace CSV from a path, an open file, or CSV text."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise TraceParseError("empty trace file") from None
    missing = [c for c in TRACE_COLUMNS if c not in header]
    if missing:
        raise TraceParseError(f"missing column {missing[0]!r}")
    if tuple(header[: len(TRACE_COLUMNS)]) != TRACE_COLUMNS:
        raise TraceParseError("trace columns out of order; expected " + ",".join(TRACE_COLUMNS))
    pos = {c: i for i, c in enumerate(header)}

    samples = []
    prev_t = None
    for rownum, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(TRACE_COLUMNS):
            raise TraceParseError(f"row {rownum}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")

        def num(col, rownum=rownum, row=row):
            try:
                return float(row[pos[col]])
            except ValueError:
                raise TraceParseError(f"non-numeric value {row[pos[col]]!r} at row {rownum}, column {col!r}") from None

        t = num("timestamp_s")
        if prev_t is not None and not t > prev_t:
            raise TraceParseError(f"non-monotone timestamp at row {rownum}")
        prev_t = t
        geo = {}
        for col in OPTIONAL_COLUMNS:
            if col in pos and row[pos[col]].strip():
                geo[col] = num(col)
        values = {c: num(c) for c in TRACE_COLUMNS if c != "light_regime"}
        for col in _NON_NEGATIVE:
            if values[col] < 0:
                raise TraceParseError(f"negative value at row {rownum}, column {col!r}")
        try:
            samples.append(
                EnvSample(
                    timestamp=t,
                    illuminance=values["lux"],
                    light_regime=row[pos["light_regime"]].strip(),
                    ambient_temperature=values["ambient_c"],
                    relative_humidity=values["rh_pct"],
                    teg_delta_t=values["teg_dt_c"],
                    vibration_frequency=values["vib_hz"],
                    vibration_acceleration=values["vib_g"],
                    rf_eirp=values["rf_eirp_w"],
                    rf_distance=values["rf_dist_m"],
                    gas={sp: values[sp.column] for sp in SPECIES},
                    **geo,
                )
            )
        except ValueError as exc:
            raise TraceParseError(f"row {rownum}, column {exc}") from None
    if not samples:
        raise TraceParseError("trace has no data rows")
    return EnvTrace(samples)


# ---------------------------------------------------------------------------
# canonical generators

OFFICE_GAS = {
    GasSpecies.CO: 0.5,
    GasSpecies.NO2: 0.02,
    GasSpecies.H2S: 0.0,
    GasSpecies.NH3: 0.5,
    GasSpecies.NO: 0.02,
    GasSpecies.Cl2: 0.0,
}


def generate_office_window_day(
    seed: int = 0,
    resolution: float = 60.0,
    outdoor_slots: int = 15,
    indoor_lux: float = 200.0,
    indoor_hours: float = 8.0,
    office_start_h: float = 8.0,
    outdoor_lux: float = 50_000.0,
    outdoor_minutes: float = 15.0,
    sun_window_h: tuple[float, float] = (5.0, 19.0),
    teg_delta_t: float = 6.0,
    teg_window_h: tuple[float, float] = (19.0, 5.0),
    rf_eirp: float = 3.0,
    rf_distance: float = 5.0,
) -> EnvTrace:
    """Window-mounted node over one 24 h day, noise-free.

    Direct sun totals ``outdoor_minutes`` at ``outdoor_lux``, split into
    ``outdoor_slots`` equal slots spaced evenly over ``sun_window_h``; a
    single slot is placed contiguously at the middle of the window. Indoor
    light covers the first ``indoor_hours`` of non-sun time from
    ``office_start_h``. The TEG gradient holds over ``teg_window_h`` (may
    wrap midnight). ``seed`` is accepted for interface symmetry; the
    schedule is deterministic.
    """
    del seed
    n = int(round(86400.0 / resolution))
    if abs(n * resolution - 86400.0) > 1e-9:
        raise ValueError("resolution must divide one day")
    slot = outdoor_minutes * 60.0 / outdoor_slots
    if outdoor_slots < 1 or abs(slot / resolution - round(slot / resolution)) > 1e-9:
        raise ValueError("each sun slot must be a whole number of trace steps")
    slot_steps = int(round(slot / resolution))
    sun_start, sun_end = (h * 3600.0 for h in sun_window_h)
    window = sun_end - sun_start
    if outdoor_slots == 1:
        starts = [sun_start + (window - slot) / 2.0]
    else:
        starts = [sun_start + k * window / outdoor_slots for k in range(outdoor_slots)]
    sun = set()
    for s0 in starts:
        first = int(round(s0 / resolution))
        sun.update(range(first, first + slot_steps))

    indoor = set()
    need = int(round(indoor_hours * 3600.0 / resolution))
    i = int(round(office_start_h * 3600.0 / resolution))
    while len(indoor) < need:
        if i % n not in sun:
            indoor.add(i % n)
        i += 1

    t0, t1 = (h * 3600.0 for h in teg_window_h)

    def teg_on(t):
        return t0 <= t < t1 if t0 <= t1 else (t >= t0 or t < t1)

    samples = []
    for k in range(n):
        t = k * resolution
        if k in sun:
            lux, regime = outdoor_lux, "outdoor"
        else:
            lux, regime = (indoor_lux if k in indoor else 0.0), "indoor"
        samples.append(
            EnvSample(
                timestamp=t,
                illuminance=lux,
                light_regime=regime,
                ambient_temperature=24.0,
                relative_humidity=45.0,
                teg_delta_t=teg_delta_t if teg_on(t) else 0.0,
                rf_eirp=rf_eirp,
                rf_distance=rf_distance,
                gas=dict(OFFICE_GAS),
            )
        )
    return EnvTrace(samples, end=86400.0)


def _ar1(rng: np.random.Generator, n: int, phi: float) -> np.ndarray:
    z = np.empty(n)
    z[0] = rng.standard_normal()
    scale = math.sqrt(1.0 - phi * phi)
    for i in range(1, n):
        z[i] = phi * z[i - 1] + scale * rng.standard_normal()
    return z


def _match_peak_to_mean(x: np.ndarray, peak: float, mean: float) -> np.ndarray:
    """Power-transform then scale a positive series so max == peak and mean == mean.

    max(x^g)/mean(x^g) grows monotonically with g, so bisection on g fixes the ratio.
    """
    target = peak / mean
    u = x / x.max()

    def ratio(g):
        return 1.0 / np.mean(u**g)

    lo, hi = 1e-3, 1.0
    while ratio(hi) < target:
        hi *= 2.0
        if hi > 1e4:
            raise ValueError("series cannot reach the requested peak/mean ratio")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ratio(mid) < target:
            lo = mid
        else:
            hi = mid
    y = u ** (0.5 * (lo + hi))
    return y * (mean / y.mean())


def generate_doha_traffic(
    seed: int = 0,
    hours: float = 14.0,
    start_hour: float = 6.0,
    resolution: float = 60.0,
    co_peak: float = 30.0,
    co_mean: float = 10.0,
    temperature_peak: float = 40.0,
) -> EnvTrace:
    """Dashboard-mounted node in urban traffic over one late-summer day.

    CO is a two-rush-hour diurnal profile modulated by a log-normal AR(1)
    process, then power-transformed so its max and mean hit ``co_peak`` and
    ``co_mean`` exactly for every seed. Temperature peaks mid-afternoon;
    humidity runs above 90 % in the cool early morning.
    """
    rng = stream(seed, 0, "scenario")
    n = int(round(hours * 3600.0 / resolution))
    t = np.arange(n) * resolution
    h = start_hour + t / 3600.0

    rush = 2.0 + 14.0 * np.exp(-(((h - 7.75) / 1.0) ** 2)) + 12.0 * np.exp(-(((h - 17.5) / 1.2) ** 2))
    midday = 4.0 * np.exp(-(((h - 13.0) / 1.5) ** 2))
    co = _match_peak_to_mean((rush + midday) * np.exp(0.35 * _ar1(rng, n, 0.95)), co_peak, co_mean)

    temp_noise = np.clip(0.3 * _ar1(rng, n, 0.9), -1.0, 1.0)
    temperature = 31.0 + (temperature_peak - 31.0) * np.exp(-(((h - 14.0) / 3.5) ** 2)) + temp_noise
    rh = np.clip(96.0 - 5.0 * (temperature - 31.0) + 1.5 * _ar1(rng, n, 0.9), 0.0, 100.0)
    lux = np.clip(18_000.0 * np.sin(np.pi * (h - 5.5) / 13.0), 0.0, None)

    samples = []
    for i in range(n):
        c = float(co[i])
        samples.append(
            EnvSample(
                timestamp=float(t[i]),
                illuminance=float(lux[i]),
                light_regime="outdoor",
                ambient_temperature=float(temperature[i]),
                relative_humidity=float(rh[i]),
                vibration_frequency=30.0,
                vibration_acceleration=0.05,
                gas={
                    GasSpecies.CO: c,
                    GasSpecies.NO2: 0.005 * c,
                    GasSpecies.H2S: 0.01,
                    GasSpecies.NH3: 0.3,
                    GasSpecies.NO: 0.01 * c,
                    GasSpecies.Cl2: 0.0,
                },
            )
        )
    return EnvTrace(samples, end=float(n * resolution))


def generate_dark_cold(seed: int = 0, resolution: float = 60.0) -> EnvTrace:
    """24 h with no light, gradient, RF or vibration."""
    del seed
    n = int(round(86400.0 / resolution))
    return EnvTrace(
        [EnvSample(timestamp=k * resolution, ambient_temperature=5.0, relative_humidity=60.0) for k in range(n)],
        end=86400.0,
    )


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    duration: float
    generator: Callable[..., EnvTrace]
    seed: int = 0
    params: dict = field(default_factory=dict)
    link_noise: float = 1.0  # interference multiplier applied to the link model

    def generate(self, seed: int | None = None) -> EnvTrace:
        return self.generator(self.seed if seed is None else seed, **self.params)


SCENARIOS = {
    "office-window-day": ScenarioSpec("office-window-day", 86400.0, generate_office_window_day),
    "doha-traffic": ScenarioSpec("doha-traffic", 14 * 3600.0, generate_doha_traffic, link_noise=4.0),
    "dark-cold": ScenarioSpec("dark-cold", 86400.0, generate_dark_cold),
}


def generate(name: str, seed: int = 0) -> EnvTrace:
    try:
        spec = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None
    return spec.generate(seed)
