"""
Замкнутый контур управления в пространстве сенсоров и следование по траектории
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from sorosense.control.inner import ADRCState, InnerConfig, adrc_track, broyden_update, estimate_jacobian, inner_step
from sorosense.control.solver import GDConfig, initial_guess, objective, sensor_bounds, solve_sensor_target
from sorosense.kinematics.geometry import Pose
from sorosense.plant.manipulator import LoadSpec, PlantState, SoftManipulator
from sorosense.proprioception.dataset import IMU_COLUMNS, PRESSURE_COLUMNS, SPRING_COLUMNS, Dataset
from sorosense.proprioception.predictor import PosePredictor
from sorosense.sensing.sensors import SensorNoise, SensorSuite
from sorosense.utils.errors import DomainError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    ["t", "outer_iter"]
    + PRESSURE_COLUMNS
    + SPRING_COLUMNS
    + IMU_COLUMNS
    + ["px", "py", "pz", "pyaw", "ppitch", "proll"]
    + ["tx", "ty", "tz", "tyaw", "tpitch", "troll"]
    + ["O_outer", "O_inner", "saturated"]
)


class ControlTrace:
    """Журнал шагов контура; время строго возрастает"""

    def __init__(self):
        self.rows: List[list] = []

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def times(self) -> np.ndarray:
        return np.array([row[0] for row in self.rows])

    def record(
        self,
        time: float,
        outer_iter: int,
        q: np.ndarray,
        s: np.ndarray,
        estimate: np.ndarray,
        truth: np.ndarray,
        o_outer: float,
        o_inner: float,
        saturated: bool,
    ) -> None:
        if self.rows and time <= self.rows[-1][0]:
            raise DomainError(f"Время журнала должно возрастать: {time} <= {self.rows[-1][0]}")
        self.rows.append(
            [time, outer_iter, *q, *s, *estimate, *truth, o_outer, o_inner, int(bool(saturated))]
        )

    def extend(self, other: "ControlTrace") -> None:
        for row in other.rows:
            if self.rows and row[0] <= self.rows[-1][0]:
                raise DomainError("Журналы пересекаются по времени")
            self.rows.append(row)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=TRACE_COLUMNS)

    def to_csv(self, path: Union[str, Path], header_comment: Optional[str] = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            if header_comment:
                f.write(f"# {header_comment}\n")
            self.to_frame().to_csv(f, index=False, float_format="%.10g")


@dataclass
class ControlResult:
    trace: ControlTrace
    state: PlantState
    s_final: np.ndarray
    jacobian: np.ndarray
    converged: bool
    outer_iterations: int
    solver_iterations: int = 0
    saturated: bool = False


@dataclass
class PathResult:
    trace: ControlTrace
    errors: np.ndarray
    positions: np.ndarray
    converged: List[bool] = field(default_factory=list)
    saturated: List[bool] = field(default_factory=list)
    state: Optional[PlantState] = None

    @property
    def mean_error(self) -> float:
        return float(np.mean(self.errors))

    @property
    def max_error(self) -> float:
        return float(np.max(self.errors))


class ClosedLoopController:
    """Двухконтурный регулятор: решатель сигналов сенсоров снаружи, якобиан и ADRC внутри"""

    def __init__(
        self,
        plant: SoftManipulator,
        predictor: PosePredictor,
        suite: SensorSuite,
        dataset: Dataset,
        gd: GDConfig = GDConfig(),
        inner: InnerConfig = InnerConfig(),
        max_outer: int = 10,
    ):
        if max_outer < 1:
            raise DomainError(f"Бюджет внешнего контура должен быть не меньше 1: {max_outer}")
        self.plant = plant
        self.predictor = predictor
        self.suite = suite
        self.dataset = dataset
        self.gd = gd
        self.inner = inner
        self.max_outer = max_outer
        self.bounds = sensor_bounds(dataset)
        self.logger = logging.getLogger(__name__)

    def clean_read(self, q: np.ndarray, load: LoadSpec) -> np.ndarray:
        """Показания без шума в статике при давлениях q"""
        state = self.plant.initial_state(load, q)
        return self.suite.read(state, SensorNoise.noiseless()).values

    def jacobian_at(self, state: PlantState) -> np.ndarray:
        return estimate_jacobian(
            lambda q: self.clean_read(q, state.load), state.pressures, self.inner.fd_step, self.plant.chamber
        )

    def _stalled(self, history: List[float]) -> bool:
        window = self.inner.stall_window
        if len(history) <= window:
            return False
        old, new = history[-window - 1], history[-1]
        return old <= 0 or (old - new) / old < self.inner.stall_improvement

    def run(
        self,
        p_ref: Pose,
        state: PlantState,
        s_start: Optional[np.ndarray] = None,
        jacobian: Optional[np.ndarray] = None,
        trace: Optional[ControlTrace] = None,
    ) -> ControlResult:
        """Довести эффектор до p_ref; s_start задаёт тёплый старт решателя"""
        trace = ControlTrace() if trace is None else trace
        target = p_ref.as_array()
        s_curr = self.suite.read(state).values
        o_outer = objective(target, s_curr, self.predictor, self.gd.w_ang)
        jacobian = self.jacobian_at(state) if jacobian is None else jacobian

        result = ControlResult(trace, state, s_curr, jacobian, o_outer <= self.gd.tolerance, 0)
        if result.converged:
            self.logger.info("Цель уже достигнута, контур не запускается")
            return result

        s0 = s_start if s_start is not None else initial_guess(target, self.dataset, self.gd.w_ang)[0]
        adrc = ADRCState.at_rest(state.pressures, self.inner.input_gain(self.plant.dynamics.time_constant))

        for outer in range(1, self.max_outer + 1):
            solved = solve_sensor_target(target, self.predictor, s0, self.gd, self.bounds)
            s_ref = solved.s
            result.outer_iterations = outer
            result.solver_iterations += solved.iterations

            history: List[float] = []
            for _ in range(self.inner.max_inner):
                q_before, s_before = state.pressures.copy(), s_curr
                q_ref, clamped = inner_step(s_ref, s_curr, q_before, jacobian, self.inner.mu, self.plant.chamber)
                tracked = adrc_track(q_ref, self.plant, state, adrc, self.inner)
                state, adrc = tracked.state, tracked.adrc
                saturated = bool(clamped.any())
                # итоговый флаг учитывает и упор команды ADRC в предел давления
                result.saturated |= saturated or bool(tracked.saturated.any())

                s_curr = self.suite.read(state).values
                jacobian = broyden_update(
                    jacobian, state.pressures - q_before, s_curr - s_before, self.inner.broyden_threshold
                )
                o_inner = float(np.sum((s_ref - s_curr) ** 2))
                o_outer = objective(target, s_curr, self.predictor, self.gd.w_ang)
                trace.record(
                    state.time, outer, state.pressures, s_curr,
                    self.predictor.predict(s_curr), self.plant.pose(state).as_array(),
                    o_outer, o_inner, saturated,
                )
                history.append(o_inner)

                if o_outer <= self.gd.tolerance:
                    self.logger.info(f"Цель достигнута: {outer} внешних итераций, O={o_outer:.4g}")
                    result.converged = True
                    break
                if tracked.diverged or self._stalled(history):
                    self.logger.debug(f"Внутренний контур остановился на внешней итерации {outer}")
                    break

            if result.converged:
                break
            # повторный вход во внешний контур из текущих показаний
            s0 = s_curr
        else:
            self.logger.warning(f"Цель не достигнута за {self.max_outer} внешних итераций, O={o_outer:.4g}")

        result.state, result.s_final, result.jacobian = state, s_curr, jacobian
        return result


def closed_loop(
    p_ref: Pose,
    plant: SoftManipulator,
    pred: PosePredictor,
    suite: SensorSuite,
    dataset: Dataset,
    gd: GDConfig = GDConfig(),
    inner: InnerConfig = InnerConfig(),
    state: Optional[PlantState] = None,
    load: LoadSpec = LoadSpec(),
    max_outer: int = 10,
) -> ControlResult:
    controller = ClosedLoopController(plant, pred, suite, dataset, gd, inner, max_outer)
    state = plant.initial_state(load) if state is None else state
    return controller.run(p_ref, state)


def follow_path(
    waypoints: Sequence[Pose],
    controller: ClosedLoopController,
    state: PlantState,
    loads: Optional[Sequence[LoadSpec]] = None,
) -> PathResult:
    """Последовательное управление по точкам; тёплый старт от сошедшихся сигналов предыдущей точки"""
    if len(waypoints) == 0:
        raise DomainError("Траектория должна содержать хотя бы одну точку")
    if loads is not None and len(loads) != len(waypoints):
        raise DomainError("Число нагрузок должно совпадать с числом точек")

    trace = ControlTrace()
    errors, positions, converged, saturated = [], [], [], []
    s_start, jacobian = None, None
    for k, waypoint in enumerate(waypoints):
        if loads is not None and loads[k] != state.load:
            state = replace(state, load=loads[k])
            jacobian = None
        result = controller.run(waypoint, state, s_start, jacobian, trace)
        state, s_start, jacobian = result.state, result.s_final, result.jacobian

        reached = controller.plant.pose(state).translation
        error = float(np.linalg.norm(reached - waypoint.translation))
        errors.append(error)
        positions.append(reached)
        converged.append(result.converged)
        saturated.append(result.saturated)
        if not result.converged:
            logger.warning(f"Точка {k}: цель не достигнута, ошибка {error:.2f} мм")

    path = PathResult(trace, np.array(errors), np.array(positions), converged, saturated, state)
    logger.info(f"Траектория: средняя ошибка {path.mean_error:.2f} мм, максимальная {path.max_error:.2f} мм")
    return path


def pick_and_place(
    home: Pose,
    pick: Pose,
    place: Pose,
    object_mass_g: float,
    controller: ClosedLoopController,
    state: PlantState,
) -> PathResult:
    """Дом → захват → перенос с грузом → дом; масса груза действует между захватом и отпусканием"""
    empty = state.load.with_payload(0.0)
    carrying = state.load.with_payload(object_mass_g)
    return follow_path([home, pick, place, home], controller, state, [empty, empty, carrying, empty])
