import dataclasses
import math

import numpy as np
import pytest

from sorosense.plant.manipulator import GapModel, LoadSpec
from sorosense.sensing.sensors import SENSOR_DIM, SensorNoise, SensorSuite, SensorVector, read_sensors
from sorosense.utils.errors import DomainError

SPRING_SIGMA = 0.2
IMU_SIGMA = 0.3
STEP = 0.4


def test_noiseless_read_matches_geometry(plant, quiet_suite):
    state, _ = plant.forward([20.0, -10.0, 5.0, -30.0, 15.0, 0.0])
    reading = quiet_suite.read(state)
    assert reading.values.shape == (SENSOR_DIM,)
    np.testing.assert_allclose(reading.spring, quiet_suite.geometric_springs(state), atol=1e-6)
    assert reading.in_envelope()


def test_imu_reports_pad_orientation(plant, quiet_suite):
    state, pose = plant.forward([20.0, -10.0, 5.0, -30.0, 15.0, 0.0])
    imu = quiet_suite.read(state).imu
    # обе IMU одной площадки показывают одну ориентацию
    np.testing.assert_allclose(imu[0:3], imu[3:6], atol=1e-8)
    np.testing.assert_allclose(imu[6:9], imu[9:12], atol=1e-8)
    np.testing.assert_allclose(imu[6:9], pose.as_array()[3:], atol=1e-8)


def test_noise_statistics(plant):
    """СКО пружин с учётом квантования sqrt(σ² + Δ²/12), СКО IMU σ"""
    state = plant.initial_state()
    clean = SensorSuite(noise=SensorNoise.noiseless()).read(state).values
    suite = SensorSuite(noise=SensorNoise(SPRING_SIGMA, IMU_SIGMA, STEP, seed=11))
    readings = np.vstack([suite.read(state).values for _ in range(500)])

    expected_spring = max(SPRING_SIGMA, math.sqrt(SPRING_SIGMA ** 2 + STEP ** 2 / 12.0))
    spring_std = readings[:, :12].std(axis=0).mean()
    imu_std = readings[:, 12:].std(axis=0).mean()
    assert abs(spring_std - expected_spring) / expected_spring < 0.15
    assert abs(imu_std - IMU_SIGMA) / IMU_SIGMA < 0.15
    np.testing.assert_allclose(readings[:, :12].mean(axis=0), clean[:12], atol=0.05)


def test_quantized_springs(plant):
    suite = SensorSuite(noise=SensorNoise(SPRING_SIGMA, IMU_SIGMA, STEP, seed=2))
    springs = suite.read(plant.initial_state()).spring
    np.testing.assert_allclose(springs / STEP, np.round(springs / STEP), atol=1e-9)


def test_same_seed_same_stream(plant):
    state = plant.initial_state()
    noise = SensorNoise(seed=5)
    first = SensorSuite(noise=noise).read(state).values
    second = SensorSuite(noise=noise).read(state).values
    np.testing.assert_array_equal(first, second)
    np.testing.assert_array_equal(read_sensors(state, noise=noise).values, first)


def test_gap_distorts_readings(plant, quiet_suite):
    state = plant.initial_state()
    gap = GapModel.from_seed(7)
    clean = quiet_suite.read(state).values
    distorted = quiet_suite.read(state, gap=gap).values
    assert np.max(np.abs(distorted[:12] - clean[:12])) > 0.1
    assert np.max(np.abs(distorted[12:] - clean[12:])) > 0.1


def test_out_of_range_lengths_saturate(quiet_suite):
    lengths = np.array([50.0, 280.0] + [150.0] * 10)
    springs = quiet_suite._read_springs(lengths, SensorNoise.noiseless(), None)
    assert springs[0] == pytest.approx(60.0, abs=1e-6)
    assert springs[1] == pytest.approx(270.0, abs=1e-6)


def test_sensor_vector_shape():
    with pytest.raises(DomainError):
        SensorVector(np.zeros(10))
    with pytest.raises(DomainError):
        SensorNoise(spring_sigma=-1.0)


def test_explicit_none_gap_disables_suite_gap(plant):
    state, _ = plant.forward([20.0, -10.0, 5.0, -30.0, 15.0, 0.0])
    gapped = SensorSuite(noise=SensorNoise.noiseless(), gap=GapModel.from_seed(7))
    clean = SensorSuite(noise=SensorNoise.noiseless())
    np.testing.assert_array_equal(gapped.read(state, gap=None).values, clean.read(state).values)
    assert not np.array_equal(gapped.read(state).values, clean.read(state).values)


def test_noiseless_reading_ignores_declared_load(plant, quiet_suite):
    """Показания зависят только от кадров площадок, а не от записанной в состоянии нагрузки"""
    state, _ = plant.forward([10.0, 30.0, -20.0, 0.0, 25.0, -5.0])
    heavy = dataclasses.replace(state, load=LoadSpec(payload_g=500.0))
    np.testing.assert_array_equal(quiet_suite.read(heavy).values, quiet_suite.read(state).values)
