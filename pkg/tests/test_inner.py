import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sorosense.control.inner import (
    ADRCState,
    InnerConfig,
    adrc_track,
    broyden_update,
    estimate_jacobian,
    inner_step,
)
from sorosense.plant.manipulator import ChamberModel
from sorosense.utils.errors import DomainError

A = np.random.default_rng(0).normal(size=(24, 6))


def test_central_differences_are_exact_for_linear_map():
    jacobian = estimate_jacobian(lambda q: A @ q, np.zeros(6))
    np.testing.assert_allclose(jacobian, A, atol=1e-12)


def test_jacobian_at_pressure_limit():
    q = np.array([40.0, -40.0, 0.0, 0.0, 0.0, 0.0])
    jacobian = estimate_jacobian(lambda q: A @ q, q, step=1.0, chamber=ChamberModel())
    np.testing.assert_allclose(jacobian, A, atol=1e-12)


def test_broyden_secant_condition():
    rng = np.random.default_rng(1)
    jacobian = rng.normal(size=(24, 6))
    dq, ds = rng.normal(size=6) * 2.0, rng.normal(size=24)
    updated = broyden_update(jacobian, dq, ds, threshold=0.5)
    np.testing.assert_allclose(updated @ dq, ds, atol=1e-10)


def test_broyden_skips_small_steps():
    jacobian = np.ones((24, 6))
    small = np.full(6, 0.1)
    assert broyden_update(jacobian, small, np.ones(24), threshold=0.5) is jacobian


def test_damped_step():
    jacobian = np.eye(6)
    q_ref, saturated = inner_step(np.full(6, 2.0), np.zeros(6), np.zeros(6), jacobian, mu=1.0)
    np.testing.assert_allclose(q_ref, 1.0)
    assert not saturated.any()


def test_damped_step_clamps_to_chamber_range():
    q_ref, saturated = inner_step(np.full(6, 200.0), np.zeros(6), np.full(6, 30.0), np.eye(6), mu=0.01)
    np.testing.assert_allclose(q_ref, 40.0)
    assert saturated.all()


def test_adrc_tracks_reference(plant):
    cfg = InnerConfig()
    state = plant.initial_state()
    adrc = ADRCState.at_rest(state.pressures, cfg.input_gain(plant.dynamics.time_constant))
    reference = np.array([20.0, -15.0, 5.0, 0.0, 30.0, -25.0])
    result = adrc_track(reference, plant, state, adrc, cfg, duration=2.0)
    assert not result.diverged
    np.testing.assert_allclose(result.state.pressures, reference, atol=0.5)
    np.testing.assert_allclose(result.adrc.z1, result.state.pressures, atol=0.5)
    assert len(result.times) == 200
    assert np.all(np.diff(result.times) > 0)


def test_adrc_rejects_constant_disturbance(plant):
    """Постоянное возмущение компенсируется оценкой z2"""
    cfg = InnerConfig()
    state = plant.initial_state()
    adrc = ADRCState.at_rest(state.pressures, cfg.input_gain(plant.dynamics.time_constant))
    reference = np.full(6, 10.0)
    result = adrc_track(reference, plant, state, adrc, cfg, duration=3.0, disturbance=10.0)
    np.testing.assert_allclose(result.state.pressures, reference, atol=0.5)


def test_adrc_with_tracking_differentiator(plant):
    cfg = InnerConfig(td_rate=10.0)
    state = plant.initial_state()
    adrc = ADRCState.at_rest(state.pressures, cfg.input_gain(plant.dynamics.time_constant))
    result = adrc_track(np.full(6, 20.0), plant, state, adrc, cfg, duration=3.0)
    np.testing.assert_allclose(result.state.pressures, 20.0, atol=0.5)
    assert result.adrc.r1 is not None


def test_adrc_step_must_not_exceed_plant_step(plant):
    cfg = InnerConfig(dt=0.05, control_period=0.2)
    state = plant.initial_state()
    with pytest.raises(DomainError):
        adrc_track(np.zeros(6), plant, state, ADRCState.at_rest(state.pressures, 1.0), cfg)


def test_inner_config_validation():
    with pytest.raises(DomainError):
        InnerConfig(mu=0.0)
    with pytest.raises(DomainError):
        InnerConfig(control_period=0.001)


def test_adrc_step_settles_within_two_percent(plant):
    """Скачок 0 → 40 кПа: команда упирается в предел, давление входит в полосу 2% не позже 1.5 с"""
    cfg = InnerConfig()
    state = plant.initial_state()
    adrc = ADRCState.at_rest(state.pressures, cfg.input_gain(plant.dynamics.time_constant))
    result = adrc_track(np.full(6, 40.0), plant, state, adrc, cfg, duration=3.0)

    times, pressures = np.array(result.times), np.array(result.pressures)
    outside = np.flatnonzero(np.any(np.abs(pressures - 40.0) > 0.02 * 40.0, axis=1))
    assert len(outside) and times[outside[-1]] < 1.5
    assert np.all(pressures <= 40.0)
    np.testing.assert_allclose(result.state.pressures, 40.0, atol=0.05)


def test_recorded_pressures_match_dense_integration(plant):
    """Повтор записанных команд через solve_ivp: dp/dt = (u - p)/τ + d с удержанием команды на шаге"""
    cfg = InnerConfig()
    tau, d = plant.dynamics.time_constant, 5.0
    state = plant.initial_state()
    adrc = ADRCState.at_rest(state.pressures, cfg.input_gain(tau))
    reference = np.array([10.0, -15.0, 5.0, 0.0, 20.0, -20.0])
    result = adrc_track(reference, plant, state, adrc, cfg, duration=1.0, disturbance=d)

    p, t = state.pressures.copy(), state.time
    for t_next, u, recorded in zip(result.times, result.commands, result.pressures):
        solution = solve_ivp(lambda _, x: (u - x) / tau + d, (t, t_next), p, rtol=1e-10, atol=1e-12)
        p, t = solution.y[:, -1], t_next
        np.testing.assert_allclose(recorded, p, atol=1e-6)
