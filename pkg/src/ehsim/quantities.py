"""Physical quantities in base SI units.

Everything inside the package is plain ``float`` in J, W, A, V, s, lux, ppm,
g-units and degrees Celsius. Prefixed values (``"115uA"``, ``"3.7 V"``) are
converted once, at the parsing boundary, by :func:`parse_quantity`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

SECONDS_PER_DAY = 86400.0
STANDARD_GRAVITY = 9.80665  # m/s^2 per g
SPEED_OF_LIGHT = 299_792_458.0

PREFIXES = {"": 1.0, "u": 1e-6, "µ": 1e-6, "μ": 1e-6, "m": 1e-3, "k": 1e3}
UNITS = {"V", "A", "W", "J", "s", "Hz", "lux", "lx"}

_QUANTITY_RE = re.compile(r"^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*([uµμmk]?)(\w*)\s*$")


@dataclass(frozen=True)
class OperatingPoint:
    """A DC operating point, e.g. ``OperatingPoint(3.7, 25e-3)`` for 25 mA @ 3.7 V."""

    voltage: float
    current: float

    def __post_init__(self):
        if not (self.voltage >= 0 and self.current >= 0):
            raise ValueError(f"operating point must be non-negative, got {self.voltage} V, {self.current} A")

    @property
    def power(self) -> float:
        return electric_power(self)


def electric_power(point: OperatingPoint) -> float:
    """Power drawn or delivered at ``point`` in watts."""
    return point.voltage * point.current


def energy_of(power: float, duration: float) -> float:
    """Energy in joules of a constant ``power`` held for ``duration`` seconds."""
    if duration < 0 or math.isnan(duration):
        raise ValueError(f"duration must be non-negative, got {duration}")
    return power * duration


def parse_quantity(text: str, unit: str | None = None) -> float:
    """Parse ``"115uA"`` / ``"3.7 V"`` / ``"50 klux"`` into a base-SI float.

    ``unit`` optionally pins the expected unit symbol; a mismatch raises
    ``ValueError``. A bare number is returned unchanged.
    """
    m = _QUANTITY_RE.match(text)
    if m is None:
        raise ValueError(f"cannot parse quantity {text!r}")
    number, prefix, symbol = m.groups()
    # "m" alone is ambiguous with metres; only treat it as a prefix when a unit follows
    if symbol == "" and prefix:
        symbol, prefix = prefix, ""
    if symbol and symbol not in UNITS and symbol != "m":
        raise ValueError(f"unknown unit {symbol!r} in {text!r}")
    if unit is not None and symbol and symbol != unit:
        raise ValueError(f"expected unit {unit!r}, got {symbol!r} in {text!r}")
    return float(number) * PREFIXES[prefix]


def format_quantity(value: float, unit: str) -> str:
    """Render ``value`` with the largest supported prefix that keeps it >= 1."""
    mag = abs(value)
    for prefix, scale in (("k", 1e3), ("", 1.0), ("m", 1e-3), ("u", 1e-6)):
        if mag >= scale:
            return f"{value / scale:g} {prefix}{unit}"
    return f"{value / 1e-6:g} u{unit}"
