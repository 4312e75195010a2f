"""
Внешний контур: градиентный поиск опорных сигналов сенсоров под целевую позу
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from sorosense.kinematics.geometry import Pose
from sorosense.plant.manipulator import ChamberModel
from sorosense.proprioception.dataset import Dataset
from sorosense.proprioception.predictor import wrap_degrees
from sorosense.utils.errors import DomainError

logger = logging.getLogger(__name__)

# шаг, меньше которого точка считается стационарной
MIN_STEP = 1e-14
MAX_EXPANSIONS = 1000


@dataclass(frozen=True)
class GDConfig:
    """Параметры решателя: допуск λ, бюджет итераций, коэффициент сжатия шага, начальный шаг, вес углов"""

    tolerance: float = 8.0
    i_max: int = 500
    tau: float = 0.2
    h0: float = 0.1
    w_ang: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise DomainError(f"Коэффициент сжатия должен быть в (0, 1): {self.tau}")
        if self.tolerance <= 0 or self.i_max < 1 or self.h0 <= 0:
            raise DomainError("λ > 0, i_max >= 1, h0 > 0")


@dataclass
class SolveResult:
    s: np.ndarray
    iterations: int
    converged: bool
    objectives: List[float] = field(default_factory=list)


def _weights(w_ang: float) -> np.ndarray:
    return np.array([1.0, 1.0, 1.0, w_ang ** 2, w_ang ** 2, w_ang ** 2])


def pose_residual(p_ref: np.ndarray, pose: np.ndarray) -> np.ndarray:
    """p_ref - pose с углами, приведёнными в (-180, 180]"""
    residual = np.asarray(p_ref, dtype=float) - np.asarray(pose, dtype=float)
    residual[..., 3:] = wrap_degrees(residual[..., 3:])
    return residual


def weighted_distance(p_ref, pose, w_ang: float = 1.0) -> float:
    residual = pose_residual(p_ref, pose)
    return float(np.sum(_weights(w_ang) * residual ** 2, axis=-1))


def _as_array(p) -> np.ndarray:
    return p.as_array() if isinstance(p, Pose) else np.asarray(p, dtype=float)


def objective(p_ref, s, pred, w_ang: float = 1.0) -> float:
    """O = ||p_ref - f_smap(s)||², углы масштабированы весом w_ang"""
    return weighted_distance(_as_array(p_ref), pred.predict(_as_array(s)), w_ang)


def _scale(pred, dim: int) -> np.ndarray:
    scale = getattr(pred, "sensor_scale", None)
    return np.ones(dim) if scale is None else np.asarray(scale, dtype=float)


def solve_sensor_target(
    p_ref,
    pred,
    s0,
    cfg: GDConfig = GDConfig(),
    bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> SolveResult:
    """
    Градиентный спуск по сигналам сенсоров

    Шаги выполняются в нормализованных единицах сенсоров. Шаг сжимается в tau раз,
    пока цель не уменьшится, затем тот же шаг повторяется, пока цель убывает.
    Градиент внутри итерации не пересчитывается.
    """
    p_ref = _as_array(p_ref)
    s = np.array(_as_array(s0), dtype=float)
    scale = _scale(pred, s.size)
    weights = _weights(cfg.w_ang)

    def evaluate(candidate: np.ndarray) -> float:
        return weighted_distance(p_ref, pred.predict(candidate), cfg.w_ang)

    def clip(candidate: np.ndarray) -> np.ndarray:
        return candidate if bounds is None else np.clip(candidate, bounds[0], bounds[1])

    current = evaluate(s)
    result = SolveResult(s, 0, current <= cfg.tolerance, [current])
    if result.converged:
        return result

    for i in range(1, cfg.i_max + 1):
        residual = pose_residual(p_ref, pred.predict(s))
        # dO/ds = -2·(W·r)ᵀ·∂f/∂s, перенесённый в нормализованные единицы
        direction = scale * pred.input_gradient(s, -2.0 * weights * residual) * scale

        h = cfg.h0
        candidate = clip(s - h * direction)
        value = evaluate(candidate)
        while value >= current:
            h *= cfg.tau
            if h < MIN_STEP:
                logger.info(f"Стационарная точка на итерации {i}, O={current:.4g}")
                result.s, result.iterations = s, i
                return result
            candidate = clip(s - h * direction)
            value = evaluate(candidate)
        s, current = candidate, value

        for _ in range(MAX_EXPANSIONS):
            candidate = clip(s - h * direction)
            value = evaluate(candidate)
            if value >= current:
                break
            s, current = candidate, value

        result.objectives.append(current)
        if current <= cfg.tolerance:
            result.s, result.iterations, result.converged = s, i, True
            logger.debug(f"Решатель сошёлся за {i} итераций, O={current:.4g}")
            return result

    logger.warning(f"Решатель не сошёлся за {cfg.i_max} итераций, O={current:.4g}")
    result.s, result.iterations = s, cfg.i_max
    return result


def interior_mask(q: np.ndarray, chamber: ChamberModel = ChamberModel(), margin: float = 0.9) -> np.ndarray:
    """Точки, у которых все давления лежат во внутренних margin диапазона"""
    center = 0.5 * (chamber.p_max + chamber.p_min)
    half = 0.5 * (chamber.p_max - chamber.p_min) * margin
    return np.all(np.abs(np.atleast_2d(q) - center) <= half, axis=1)


def initial_guess(
    p_ref,
    dataset: Dataset,
    w_ang: float = 1.0,
    chamber: ChamberModel = ChamberModel(),
    margin: float = 0.9,
) -> Tuple[np.ndarray, int]:
    """Сигналы ближайшей по позе точки датасета без насыщения камер; возвращает (s0, индекс)"""
    if len(dataset) == 0:
        raise DomainError("Датасет для начального приближения пуст")

    distance = np.sum(_weights(w_ang) * pose_residual(_as_array(p_ref), dataset.poses) ** 2, axis=1)
    interior = interior_mask(dataset.q, chamber, margin)
    if not interior.any():
        logger.warning("Нет точек без насыщения камер, начальное приближение может быть насыщенным")
        index = int(np.argmin(distance))
    else:
        candidates = np.flatnonzero(interior)
        index = int(candidates[np.argmin(distance[candidates])])
    return dataset.sensors[index].copy(), index


def sensor_bounds(dataset: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Огибающая сигналов сенсоров по датасету: решатель не выходит за наблюдавшиеся значения"""
    if len(dataset) == 0:
        raise DomainError("Датасет для границ сенсоров пуст")
    return dataset.sensors.min(axis=0), dataset.sensors.max(axis=0)


def iterations_used(result: SolveResult, cfg: GDConfig) -> int:
    """Итерации до сходимости; несошедшийся запуск считается за весь бюджет i_max"""
    return result.iterations if result.converged else cfg.i_max


def warm_start_study(
    p_ref,
    pred,
    dataset: Dataset,
    s_rest: np.ndarray,
    cfg: GDConfig = GDConfig(),
    chamber: ChamberModel = ChamberModel(),
    bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[int, int]:
    """Итерации решателя из покоя и из начального приближения по датасету, оба в огибающей датасета"""
    bounds = sensor_bounds(dataset) if bounds is None else bounds
    cold = solve_sensor_target(p_ref, pred, s_rest, cfg, bounds)
    s0, _ = initial_guess(p_ref, dataset, cfg.w_ang, chamber)
    warm = solve_sensor_target(p_ref, pred, s0, cfg, bounds)
    if not cold.converged or not warm.converged:
        logger.warning(f"Не сошлось: холодный старт {cold.converged}, тёплый {warm.converged}")
    cold_iterations, warm_iterations = iterations_used(cold, cfg), iterations_used(warm, cfg)
    logger.info(f"Холодный старт: {cold_iterations} итераций, тёплый: {warm_iterations}")
    return cold_iterations, warm_iterations
