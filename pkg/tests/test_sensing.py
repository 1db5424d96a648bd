import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ehsim.errors import ConfigurationError, FitError, InsufficientDataError
from ehsim.rng import stream
from ehsim.scenario import EnvSample
from ehsim.sensing import (
    IDENTITY_POLY,
    SPECIES,
    AdcSpec,
    AnalogFrontEnd,
    CalibrationPoint,
    CompensationPoly,
    CrossSensitivityMatrix,
    DriftCurve,
    GasSpecies,
    SensingFrontEnd,
    adc_sample,
    afe_voltage,
    apply_cross_correction,
    calibration_grid,
    counts_to_ppm,
    default_sensor_specs,
    fit_compensation,
    forward_counts,
    read_calibration_grid,
    read_environment,
    sensor_current,
    write_calibration_grid,
)

SPECS = default_sensor_specs()
ADC = AdcSpec()
CO = SPECS[GasSpecies.CO]
CO_AFE = AnalogFrontEnd.for_spec(CO)
GRID_TEMPS = np.arange(-10.0, 50.1, 5.0)


def test_six_species_in_order():
    assert [s.value for s in SPECIES] == ["CO", "NO2", "H2S", "NH3", "NO", "Cl2"]
    assert GasSpecies.parse("cl2") is GasSpecies.Cl2
    with pytest.raises(ValueError):
        GasSpecies.parse("O3")


def test_sensor_current_examples():
    assert sensor_current(CO, 200, 25.0) == pytest.approx(14e-6, rel=1e-12)
    assert sensor_current(SPECS[GasSpecies.NH3], 100, 25.0) == pytest.approx(4e-6, rel=1e-12)
    for spec in SPECS.values():
        assert sensor_current(spec, 0.0, -7.0) == 0.0
    with pytest.raises(ValueError):
        sensor_current(CO, -1.0, 25.0)


def test_co_front_end():
    assert CO_AFE.transimpedance_gain == pytest.approx(3.3 / (70e-9 * 1000), rel=1e-12)
    assert CO_AFE.transimpedance_gain == pytest.approx(47.14e3, abs=5)
    assert afe_voltage(CO_AFE, 14e-6) == pytest.approx(0.660, rel=1e-12)
    assert afe_voltage(CO_AFE, 0.0) == 0.0
    assert afe_voltage(CO_AFE, 1e-3) == 3.3


def test_adc_examples():
    assert adc_sample(ADC, 3.3) == 1023
    assert adc_sample(ADC, 0.0) == 0
    assert adc_sample(ADC, 0.660) == 204
    assert adc_sample(ADC, 5.0) == 1023
    assert adc_sample(ADC, -1.0) == 0


def test_counts_to_ppm_examples():
    counts = forward_counts(CO, CO_AFE, ADC, 200.0, 25.0)
    assert counts == 204
    assert counts_to_ppm(CO, CO_AFE, ADC, counts, 25.0) == pytest.approx(200.0, abs=0.49)
    assert counts_to_ppm(CO, CO_AFE, ADC, 0, 25.0) == 0.0
    for bad in (-1, 1024, 3.5):
        with pytest.raises(ValueError):
            counts_to_ppm(CO, CO_AFE, ADC, bad, 25.0)


def test_co_compensated_at_40c():
    poly = fit_compensation(CO, calibration_grid(CO, GRID_TEMPS))
    counts = forward_counts(CO, CO_AFE, ADC, 200.0, 40.0)
    assert abs(counts_to_ppm(CO, CO_AFE, ADC, counts, 40.0, poly) - 200.0) <= 0.03 * 1000


@pytest.mark.parametrize("species", SPECIES)
def test_round_trip_one_lsb(species):
    spec = SPECS[species]
    afe = AnalogFrontEnd.for_spec(spec)
    lsb = spec.full_scale / 1024
    for ppm in np.linspace(0, spec.full_scale * 0.999, 97):
        got = counts_to_ppm(spec, afe, ADC, forward_counts(spec, afe, ADC, ppm, 25.0), 25.0)
        assert abs(got - ppm) <= lsb


@given(st.sampled_from(SPECIES), st.floats(-10, 50), st.floats(0, 1), st.floats(0, 1))
def test_counts_monotone_in_ppm(species, t, a, b):
    spec = SPECS[species]
    afe = AnalogFrontEnd.for_spec(spec)
    lo, hi = sorted((a * spec.full_scale, b * spec.full_scale))
    assert forward_counts(spec, afe, ADC, lo, t) <= forward_counts(spec, afe, ADC, hi, t)


def test_drift_curve_against_oracle():
    d = DriftCurve()
    assert d(25.0) == 1.0
    for t in np.linspace(-10, 50, 121):
        assert d(float(t)) == pytest.approx(oracles.drift_oracle(float(t)), rel=1e-12)
        assert d(float(t)) > 0
    # C1 at the blend edges
    for edge in (23.0, 27.0):
        h = 1e-6
        left = (d(edge) - d(edge - h)) / h
        right = (d(edge + h) - d(edge)) / h
        assert left == pytest.approx(right, abs=1e-5)


@pytest.mark.parametrize("species", SPECIES)
def test_fit_matches_independent_least_squares(species):
    spec = SPECS[species]
    grid = calibration_grid(spec, GRID_TEMPS)
    poly = fit_compensation(spec, grid)
    xs = [p.temperature_c - 25.0 for p in grid]
    ys = [p.true_ppm / p.raw_ppm for p in grid]
    ref = oracles.quartic_least_squares(xs, ys)
    for got, want in zip(poly.coefficients, ref):
        assert got == pytest.approx(want, rel=1e-6, abs=1e-12)
    ref_resid = max(abs(p.raw_ppm * np.polyval(ref[::-1], p.temperature_c - 25) - p.true_ppm) for p in grid)
    assert poly.max_residual == pytest.approx(ref_resid, rel=1e-6, abs=1e-9)
    assert poly.max_residual <= spec.accuracy_band


@pytest.mark.parametrize("species", SPECIES)
def test_compensation_efficacy(species):
    spec = SPECS[species]
    afe = AnalogFrontEnd.for_spec(spec)
    poly = fit_compensation(spec, calibration_grid(spec, GRID_TEMPS))
    ref = 0.2 * spec.full_scale
    worst = max(
        abs(counts_to_ppm(spec, afe, ADC, forward_counts(spec, afe, ADC, ref, t), t, poly) - ref)
        for t in np.linspace(-10, 50, 241)
    )
    assert worst <= spec.accuracy_band


def test_no_drift_fit_is_identity():
    flat = default_sensor_specs(DriftCurve.flat())[GasSpecies.CO]
    grid = [CalibrationPoint(t, GasSpecies.CO, 300.0, 300.0) for t in GRID_TEMPS]
    poly = fit_compensation(flat, grid)
    assert poly.coefficients == pytest.approx((1, 0, 0, 0, 0), abs=1e-12)


def test_five_temperatures_interpolate_exactly():
    grid = [p for p in calibration_grid(CO, [-10, 5, 20, 35, 50], levels=(0.5,))]
    poly = fit_compensation(CO, grid)
    assert len(poly.coefficients) == 5
    assert poly.max_residual == pytest.approx(0.0, abs=1e-9)


def test_fit_errors():
    with pytest.raises(InsufficientDataError):
        fit_compensation(CO, calibration_grid(CO, [0, 10, 20, 30]))
    pts = [CalibrationPoint(float(t), GasSpecies.CO, 100.0, 100.0) for t in (0, 10, 20, 30, 40)]
    # five distinct temperatures so close together the quartic design is numerically rank-deficient
    degenerate = [CalibrationPoint(25.0 + k * 1e-9, GasSpecies.CO, 100.0, 100.0) for k in range(5)]
    assert len({p.temperature_c for p in degenerate}) == 5
    fit_compensation(CO, pts)
    with pytest.raises(FitError):
        fit_compensation(CO, degenerate)


def test_poly_json_round_trip_and_reference_value():
    poly = CompensationPoly((1.5, 0.1, 0.2, 0.3, 0.4), 0.25, GasSpecies.NO)
    assert poly(25.0) == 1.5
    again = CompensationPoly.from_json(json.loads(json.dumps(poly.to_json())))
    assert again == poly


def test_grid_csv_round_trip(tmp_path):
    grid = calibration_grid(CO, GRID_TEMPS)
    path = tmp_path / "grid.csv"
    write_calibration_grid(path, grid)
    assert read_calibration_grid(path) == grid


def test_cross_identity_and_zero():
    m = CrossSensitivityMatrix()
    v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    assert apply_cross_correction(m, v).tolist() == v
    assert apply_cross_correction(m, [0.0] * 6).tolist() == [0.0] * 6


def test_cross_round_trip_example():
    m = CrossSensitivityMatrix.with_entries({(GasSpecies.CO, GasSpecies.H2S): 0.05})
    true = np.zeros(6)
    true[0], true[2] = 100.0, 20.0
    back = apply_cross_correction(m, m.mix(true))
    assert np.max(np.abs(back - true)) <= 1e-9


@given(st.lists(st.floats(-0.2, 0.2), min_size=30, max_size=30), st.lists(st.floats(0, 500), min_size=6, max_size=6))
def test_cross_round_trip_property(offdiag, true):
    m = np.eye(6)
    m[~np.eye(6, dtype=bool)] = offdiag
    try:
        cs = CrossSensitivityMatrix(m)
    except ConfigurationError:
        return
    mixed = cs.mix(true)
    back = cs._inverse @ mixed
    assert np.allclose(back, true, rtol=1e-9, atol=1e-9 * max(1.0, max(true)) * cs.condition_number)


def test_cross_validation():
    with pytest.raises(ConfigurationError):
        CrossSensitivityMatrix(np.ones((6, 6)))
    with pytest.raises(ConfigurationError):
        CrossSensitivityMatrix(np.eye(5))
    with pytest.raises(ConfigurationError):
        CrossSensitivityMatrix(2 * np.eye(6))


def test_read_environment():
    s = EnvSample(0.0, ambient_temperature=40.0, relative_humidity=92.0)
    assert read_environment(s, None) == (40.0, 92.0)
    wet = EnvSample(0.0, relative_humidity=99.5)

    class Plus2:
        def normal(self, mu, sigma):
            return 2.0 if sigma == 2.0 else 0.0

    assert read_environment(wet, Plus2())[1] == 100.0
    a = [read_environment(s, stream(7, 0, "environment")) for _ in range(3)]
    b = [read_environment(s, stream(7, 0, "environment")) for _ in range(3)]
    assert a == b


@settings(max_examples=5, deadline=None)
@given(st.sampled_from(SPECIES))
def test_noise_sigma_matches_configuration(species):
    spec = SPECS[species]
    rng = stream(11, 0, "sensing")
    ppm = 0.5 * spec.full_scale
    draws = np.array([sensor_current(spec, ppm, 25.0, rng) for _ in range(20000)])
    sigma_ppm = draws.std(ddof=1) / spec.sensitivity
    assert sigma_ppm == pytest.approx(spec.accuracy * spec.full_scale / 2, rel=0.05)


def test_front_end_measure_noise_free():
    fe = SensingFrontEnd(noise=False)
    gas = {sp: 0.2 * SPECS[sp].full_scale for sp in SPECIES}
    ppm, t, rh = fe.measure(EnvSample(0.0, ambient_temperature=25.0, relative_humidity=40.0, gas=gas), None, None)
    assert (t, rh) == (25.0, 40.0)
    for sp, v in zip(SPECIES, ppm):
        assert abs(v - gas[sp]) <= SPECS[sp].full_scale / 1024 + 1e-3 * SPECS[sp].full_scale
        assert 0 <= v <= SPECS[sp].full_scale
    assert IDENTITY_POLY(40.0) == 1.0
