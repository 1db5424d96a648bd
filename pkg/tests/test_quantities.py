import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ehsim.quantities import OperatingPoint, electric_power, energy_of, format_quantity, parse_quantity

finite = st.floats(min_value=0, max_value=1e6, allow_nan=False)


def test_transmit_point_power():
    assert electric_power(OperatingPoint(3.7, 25e-3)) == pytest.approx(92.5e-3, rel=1e-12)


def test_warmup_point_power():
    # oracle: 3.7 * 115e-6 by hand
    assert OperatingPoint(3.7, 115e-6).power == pytest.approx(425.5e-6, rel=1e-12)


def test_zero_current_is_zero_power():
    assert electric_power(OperatingPoint(12.0, 0.0)) == 0.0


def test_negative_operating_point_rejected():
    with pytest.raises(ValueError):
        OperatingPoint(-1.0, 1e-3)
    with pytest.raises(ValueError):
        OperatingPoint(3.0, -1e-3)


def test_transmit_energy_per_day():
    assert energy_of(92.5e-3, 4 * 96) == pytest.approx(35.520, abs=5e-4)


def test_warmup_energy_per_day():
    assert energy_of(425.5e-6, 5760) == pytest.approx(2.45088, rel=1e-12)


def test_zero_duration():
    assert energy_of(5.0, 0.0) == 0.0


def test_negative_duration_raises():
    with pytest.raises(ValueError):
        energy_of(1.0, -1.0)


@given(finite, finite, finite)
def test_energy_bilinear(p, t1, t2):
    assert energy_of(2 * p, t1) == 2 * energy_of(p, t1)
    assert math.isclose(energy_of(p, t1 + t2), energy_of(p, t1) + energy_of(p, t2), rel_tol=1e-12, abs_tol=1e-300)


@pytest.mark.parametrize(
    "text,value",
    [("115uA", 115e-6), ("115 µA", 115e-6), ("3.7 V", 3.7), ("25mA", 25e-3), ("50 klux", 5e4), ("4 s", 4.0), ("5 m", 5.0), ("0.5", 0.5)],
)
def test_parse_quantity(text, value):
    assert parse_quantity(text) == pytest.approx(value, rel=1e-15)


def test_parse_quantity_unit_check():
    assert parse_quantity("3 W", unit="W") == 3.0
    with pytest.raises(ValueError):
        parse_quantity("3 V", unit="W")
    with pytest.raises(ValueError):
        parse_quantity("three volts")
    with pytest.raises(ValueError):
        parse_quantity("3 parsecs")


@given(st.integers(min_value=1, max_value=999), st.sampled_from(["u", "m", "", "k"]), st.sampled_from(["A", "V", "W"]))
def test_prefix_round_trip(n, prefix, unit):
    scale = {"u": 1e-6, "m": 1e-3, "": 1.0, "k": 1e3}[prefix]
    value = parse_quantity(f"{n}{prefix}{unit}")
    assert value == n * scale
    assert parse_quantity(format_quantity(value, unit)) == pytest.approx(value, rel=1e-12)
