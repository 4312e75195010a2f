"""
Исследования: ширина сетей sim-to-real, глубина N_smap, скорость актуации
"""
import logging
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from sorosense.neuralnet.mlp import TrainConfig
from sorosense.plant.manipulator import N_CHAMBERS, LoadSpec, SoftManipulator
from sorosense.proprioception.dataset import Dataset
from sorosense.proprioception.predictor import (
    EvalReport,
    PosePredictor,
    evaluate,
    pose_errors,
    report_from_errors,
    train_s2r,
    train_smap,
)
from sorosense.sensing.sensors import SensorSuite
from sorosense.utils.errors import DomainError

logger = logging.getLogger(__name__)

DEPTH_LAYOUTS = ((240,), (120, 120), (80, 80, 80))


def s2r_width_study(
    dataset: Dataset,
    predictor: PosePredictor,
    widths: Iterable[int] = (5, 15, 45, 90),
    cfg: TrainConfig = TrainConfig(),
) -> Dict[int, EvalReport]:
    """Ошибка на отложенных реальных точках в зависимости от ширины скрытого слоя"""
    test = dataset.splits()[2]
    reports = {}
    for width in widths:
        corrected, _ = train_s2r(dataset, predictor, cfg, hidden=(width,))
        reports[int(width)] = evaluate(corrected, test)
        logger.info(f"Ширина {width}: {reports[int(width)].translation:.3f} мм")
    return reports


def depth_study(
    dataset: Dataset,
    layouts: Iterable[Tuple[int, ...]] = DEPTH_LAYOUTS,
    cfg: TrainConfig = TrainConfig(),
    min_samples: int = 1000,
) -> Dict[Tuple[int, ...], EvalReport]:
    """Одинаковое число нейронов, разное число скрытых слоёв"""
    test = dataset.splits()[2]
    reports = {}
    for layout in layouts:
        predictor, _ = train_smap(dataset, cfg, hidden=layout, min_samples=min_samples)
        reports[tuple(layout)] = evaluate(predictor, test)
        logger.info(f"Слои {layout}: {reports[tuple(layout)].translation:.3f} мм")
    return reports


def speed_robustness(
    pred: PosePredictor,
    plant: SoftManipulator,
    suite: SensorSuite,
    speeds: Sequence[float] = (20.0, 40.0, 80.0),
    n_moves: int = 10,
    sample_period: float = 0.1,
    seed: int = 0,
    load: LoadSpec = LoadSpec(),
) -> Dict[float, EvalReport]:
    """
    Показания во время линейного изменения давления со скоростью speed (кПа/с)

    Давление следует команде через запаздывание манипулятора; поза берётся из его состояния.
    """
    if any(speed <= 0 for speed in speeds):
        raise DomainError("Скорость изменения давления должна быть положительной")

    dt = plant.dynamics.dt
    every = max(1, int(round(sample_period / dt)))
    chamber = plant.chamber
    reports = {}
    for speed in speeds:
        rng = np.random.default_rng(seed)
        state = plant.initial_state(load)
        predicted, truth = [], []
        for _ in range(n_moves):
            start = state.pressures.copy()
            target = rng.uniform(chamber.p_min, chamber.p_max, N_CHAMBERS)
            duration = float(np.max(np.abs(target - start))) / speed
            n_steps = int(np.ceil(duration / dt)) + every
            for k in range(1, n_steps + 1):
                ramp = k * dt * speed
                command = start + np.clip(target - start, -ramp, ramp)
                state = plant.step_dynamics(state, command)
                if k % every == 0:
                    predicted.append(pred.predict(suite.read(state).values))
                    truth.append(plant.pose(state).as_array())

        distance, angles = pose_errors(np.array(predicted), np.array(truth))
        reports[float(speed)] = report_from_errors(distance, angles)
        logger.info(f"Скорость {speed} кПа/с: {reports[float(speed)].translation:.3f} мм")
    return reports
