import numpy as np
import pytest
from scipy.integrate import solve_ivp

from sorosense.plant.manipulator import (
    ActuationVector,
    ChamberModel,
    GapModel,
    LoadSpec,
    PneumaticDynamics,
    SoftManipulator,
)
from sorosense.utils.errors import DomainError

BENT = [40.0, -40.0, -40.0, 0.0, 0.0, 0.0]


def test_rest_pose_hangs_straight_down(plant):
    state, pose = plant.forward(np.zeros(6))
    assert state.converged
    np.testing.assert_allclose(state.lengths, 145.0)
    np.testing.assert_allclose(pose.as_array(), [0.0, 0.0, 310.0, 0.0, 0.0, 0.0], atol=1e-9)


def test_pressure_range_maps_to_length_range():
    chamber = ChamberModel()
    np.testing.assert_allclose(chamber.rest_length([chamber.p_min, chamber.p_max]), [chamber.l_min, chamber.l_max])


def test_actuation_clamps_and_flags():
    act = ActuationVector.clamp([50.0, -50.0, 0.0, 10.0, 40.0, -40.0])
    np.testing.assert_allclose(act.pressures, [40.0, -40.0, 0.0, 10.0, 40.0, -40.0])
    assert act.saturated.tolist() == [True, True, False, False, False, False]
    assert act.any_saturated


def test_payload_deflects_bent_arm(plant):
    _, light = plant.forward(BENT, LoadSpec(payload_g=0.0))
    _, heavy = plant.forward(BENT, LoadSpec(payload_g=500.0))
    assert np.linalg.norm(heavy.translation - light.translation) > 0.1


def test_gap_shifts_pose(plant):
    gap = GapModel.from_seed(7)
    _, ideal = plant.forward(BENT)
    _, real = plant.real_forward(BENT, LoadSpec(), gap)
    assert np.linalg.norm(real.translation - ideal.translation) > 0.1
    _, null = plant.real_forward(BENT, LoadSpec(), GapModel.null())
    np.testing.assert_allclose(null.as_array(), ideal.as_array(), atol=1e-9)


def test_gap_is_reproducible():
    a, b = GapModel.from_seed(3), GapModel.from_seed(3)
    np.testing.assert_array_equal(a.spring_bias, b.spring_bias)
    np.testing.assert_array_equal(a.chamber_offset, b.chamber_offset)


def test_exact_step_matches_ode(plant):
    """Точный шаг совпадает с интегрированием dp/dt = (u - p)/τ"""
    tau = plant.dynamics.time_constant
    u = np.array([20.0, -10.0, 0.0, 5.0, 30.0, -35.0])
    state = plant.initial_state()
    for _ in range(50):
        state = plant.step_dynamics(state, u)

    reference = solve_ivp(lambda t, p: (u - p) / tau, (0.0, 0.5), np.zeros(6), rtol=1e-10, atol=1e-10)
    assert state.time == pytest.approx(0.5)
    np.testing.assert_allclose(state.pressures, reference.y[:, -1], atol=1e-6)


def test_euler_step_is_close_to_exact():
    exact = SoftManipulator(dynamics=PneumaticDynamics(integrator="exact"))
    euler = SoftManipulator(dynamics=PneumaticDynamics(integrator="euler"))
    u = np.full(6, 20.0)
    s_exact, s_euler = exact.initial_state(), euler.initial_state()
    for _ in range(30):
        s_exact, s_euler = exact.step_dynamics(s_exact, u), euler.step_dynamics(s_euler, u)
    np.testing.assert_allclose(s_euler.pressures, s_exact.pressures, atol=0.5)


def test_constant_disturbance_shifts_steady_pressure(plant):
    state = plant.initial_state()
    for _ in range(400):
        state = plant.step_dynamics(state, np.zeros(6), disturbance=10.0)
    np.testing.assert_allclose(state.pressures, plant.dynamics.time_constant * 10.0, atol=1e-3)


def test_invalid_models():
    with pytest.raises(DomainError):
        ChamberModel(l_min=200.0, l_max=100.0)
    with pytest.raises(DomainError):
        PneumaticDynamics(time_constant=0.01, dt=0.05)
    with pytest.raises(DomainError):
        LoadSpec(payload_g=-1.0)
    with pytest.raises(DomainError):
        SoftManipulator().step_dynamics(SoftManipulator().initial_state(), np.zeros(6), dt=0.0)


def test_first_order_step_response(plant):
    state = plant.initial_state()
    for _ in range(30):
        state = plant.step_dynamics(state, np.full(6, 40.0))
    expected = 40.0 * (1.0 - np.exp(-1.0))
    np.testing.assert_allclose(state.pressures, expected, rtol=0.005)


def test_command_equal_to_pressure_keeps_state(plant):
    state = plant.initial_state(q=np.full(6, 12.0))
    after = plant.step_dynamics(state, state.pressures)
    np.testing.assert_allclose(after.pressures, state.pressures)
    np.testing.assert_allclose(after.lengths, state.lengths)


def test_euler_integration_is_first_order():
    """Ошибка явного Эйлера уменьшается вдвое при уменьшении шага вдвое"""
    plant = SoftManipulator(dynamics=PneumaticDynamics(integrator="euler"))
    tau = plant.dynamics.time_constant
    u = np.full(6, 40.0)
    exact = 40.0 * (1.0 - np.exp(-0.3 / tau))
    errors = []
    for dt in (0.02, 0.01, 0.005):
        state = plant.initial_state()
        for _ in range(int(round(0.3 / dt))):
            state = plant.step_dynamics(state, u, dt)
        errors.append(abs(state.pressures[0] - exact))
    assert 1.7 < errors[0] / errors[1] < 2.3
    assert 1.7 < errors[1] / errors[2] < 2.3


def test_chamber_offsets_raise_straight_arm(plant):
    gap = GapModel(np.ones(12), np.zeros(12), np.zeros(12), np.full(6, 2.0))
    _, pose = plant.real_forward(np.zeros(6), LoadSpec(), gap)
    assert pose.z == pytest.approx(314.0)


def test_forward_is_pure(plant):
    first = plant.forward(BENT, LoadSpec(payload_g=200.0))[1]
    second = plant.forward(BENT, LoadSpec(payload_g=200.0))[1]
    assert first == second


def test_fixed_point_matches_damped_relaxation(plant):
    """Неподвижная точка длин совпадает с медленной релаксацией l ← l + 0.1·(F(l) - l)"""
    q = np.array([40.0, -40.0, 0.0, 0.0, 0.0, 0.0])
    load = LoadSpec(payload_g=200.0)
    lengths, converged = plant.pressures_to_lengths(q, load)
    assert converged

    base = plant.chamber.rest_length(q)
    relaxed = plant.chamber.clamp_length(base)
    for _ in range(5000):
        mapped = plant.chamber.clamp_length(base + plant._load_deflection(plant.frames_from_lengths(relaxed), load))
        step = 0.1 * (mapped - relaxed)
        relaxed = relaxed + step
        if np.max(np.abs(step)) < 1e-12:
            break
    np.testing.assert_allclose(lengths, relaxed, atol=1e-4)


def test_tip_displacement_grows_with_payload(plant):
    rng = np.random.default_rng(21)
    payloads = np.arange(0.0, 501.0, 50.0)
    for q in rng.uniform(-30.0, 30.0, (10, 6)):
        _, unloaded = plant.forward(q, LoadSpec(payload_g=0.0))
        displacement = []
        for payload in payloads:
            state, pose = plant.forward(q, LoadSpec(payload_g=payload))
            assert state.converged
            displacement.append(np.linalg.norm(pose.translation - unloaded.translation))
        assert np.all(np.diff(displacement) >= -1e-5), q
