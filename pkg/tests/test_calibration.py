import numpy as np
import pytest

from sorosense.sensing.calibration import (
    CalibrationCurve,
    CircuitParams,
    fit_calibration,
    frequency_from_inductance,
    inductance_from_frequency,
    inductance_from_length,
    length_from_inductance,
    load_calibration_samples,
)
from sorosense.utils.errors import CalibrationError, ConfigurationError, DomainError


def test_published_curve_is_monotone():
    assert CalibrationCurve.measured().is_monotone


def test_simulation_curve_spans_spring_envelope():
    curve = CalibrationCurve.simulation_default()
    assert curve.length_range == pytest.approx((60.0, 270.0))
    assert curve.is_monotone


def test_inverse_calibration():
    curve = CalibrationCurve.simulation_default()
    lengths = np.array([60.0, 100.0, 149.8, 220.0, 270.0])
    inductance = inductance_from_length(lengths, curve)
    assert np.all((inductance >= curve.i_min) & (inductance <= curve.i_max))
    np.testing.assert_allclose(curve(inductance), lengths, atol=1e-6)
    assert isinstance(inductance_from_length(150.0, curve), float)


def test_inverse_outside_range():
    with pytest.raises(DomainError):
        inductance_from_length(300.0, CalibrationCurve.simulation_default())


def test_non_monotone_curve_cannot_be_inverted():
    curve = CalibrationCurve(0.0, 1.0, -0.01, 0.0, 0.0)
    assert not curve.is_monotone
    with pytest.raises(ConfigurationError):
        inductance_from_length(10.0, curve)


def test_extrapolation_flag():
    _, flags = length_from_inductance([5.0, 50.0, 160.0], CalibrationCurve.measured())
    assert flags.tolist() == [True, False, True]


def test_frequency_and_inductance_are_inverse():
    circuit = CircuitParams()
    inductance = np.array([10e-6, 80e-6, 150e-6])
    recovered, below = inductance_from_frequency(frequency_from_inductance(inductance, circuit), circuit)
    np.testing.assert_allclose(recovered, inductance, rtol=1e-9)
    assert not below.any()


def test_high_frequency_flags_non_positive_inductance():
    circuit = CircuitParams()
    _, below = inductance_from_frequency(frequency_from_inductance(0.0, circuit) * 1.01, circuit)
    assert below


def test_non_positive_frequency():
    with pytest.raises(DomainError):
        inductance_from_frequency(0.0)


def test_fit_recovers_curve():
    truth = CalibrationCurve.measured()
    inductance = np.linspace(10.0, 150.0, 30)
    curve, rms = fit_calibration(inductance, truth(inductance))
    assert rms < 1e-6
    grid = np.linspace(10.0, 150.0, 200)
    np.testing.assert_allclose(curve(grid), truth(grid), atol=1e-6)
    assert (curve.i_min, curve.i_max) == (10.0, 150.0)


def test_fit_needs_five_samples():
    with pytest.raises(CalibrationError):
        fit_calibration([10.0, 20.0, 30.0, 40.0], [1.0, 2.0, 3.0, 4.0])


def test_fit_rejects_degenerate_design():
    with pytest.raises(CalibrationError):
        fit_calibration([10.0] * 3 + [20.0] * 3, [1.0, 1.0, 1.0, 2.0, 2.0, 2.0])


def test_curve_file(tmp_path):
    curve = CalibrationCurve.simulation_default()
    path = tmp_path / "curve.json"
    curve.save(path, residual_rms=0.1)
    assert CalibrationCurve.load(path) == curve

    path.write_text('{"a": 1.0}', encoding="utf-8")
    with pytest.raises(CalibrationError):
        CalibrationCurve.load(path)


def test_sample_file_errors_report_line(tmp_path):
    path = tmp_path / "samples.csv"
    path.write_text("inductance,length_mm\n10,60\nabc,70\n", encoding="utf-8")
    with pytest.raises(CalibrationError, match="строка 3"):
        load_calibration_samples(path)

    path.write_text("I,L\n10,60\n", encoding="utf-8")
    with pytest.raises(CalibrationError):
        load_calibration_samples(path)
