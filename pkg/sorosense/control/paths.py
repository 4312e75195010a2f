"""
Траектории: синтез достижимых точек (окружность, восьмёрка) и файлы точек
"""
import logging
import math
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import least_squares

from sorosense.kinematics.geometry import Pose
from sorosense.plant.manipulator import N_CHAMBERS, LoadSpec, SoftManipulator
from sorosense.utils.errors import DatasetError, DomainError

logger = logging.getLogger(__name__)

WAYPOINT_COLUMNS = ["x", "y", "z", "yaw", "pitch", "roll"]
PATH_KINDS = ("circle", "eight")


def planar_points(kind: str, n: int = 60, radius: float = 80.0, z: float = 290.0) -> np.ndarray:
    """Точки (n, 3) в горизонтальной плоскости z: окружность или восьмёрка Жероно"""
    if kind not in PATH_KINDS:
        raise DomainError(f"Неизвестный тип траектории: {kind}")
    if n < 1 or radius <= 0:
        raise DomainError("n >= 1 и radius > 0")

    theta = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    if kind == "circle":
        x, y = radius * np.cos(theta), radius * np.sin(theta)
    else:
        x, y = radius * np.sin(theta), radius * np.sin(theta) * np.cos(theta)
    return np.column_stack([x, y, np.full(n, z)])


def reachable_path(
    kind: str,
    plant: SoftManipulator,
    n: int = 60,
    radius: float = 80.0,
    z: float = 290.0,
    load: LoadSpec = LoadSpec(),
    regularization: float = 1e-3,
) -> Tuple[List[Pose], np.ndarray]:
    """
    Достижимые точки траектории на идеальной модели

    Для каждой плоской точки давления подбираются методом наименьших квадратов
    с малой регуляризацией; ориентация точки берётся у модели. Возвращает позы и давления.
    """
    chamber = plant.chamber
    q = np.zeros(N_CHAMBERS)
    poses, pressures = [], []
    for point in planar_points(kind, n, radius, z):

        def residual(candidate: np.ndarray, target=point) -> np.ndarray:
            _, pose = plant.forward(candidate, load)
            return np.concatenate([pose.translation - target, regularization * candidate])

        fit = least_squares(residual, q, bounds=(chamber.p_min, chamber.p_max), diff_step=1e-4)
        q = fit.x
        _, pose = plant.forward(q, load)
        miss = float(np.linalg.norm(pose.translation - point))
        if miss > 1.0:
            logger.warning(f"Точка {np.round(point, 1).tolist()} недостижима, промах {miss:.2f} мм")
        poses.append(pose)
        pressures.append(q.copy())
    return poses, np.array(pressures)


def save_waypoints(poses: List[Pose], path: Union[str, Path]) -> None:
    frame = pd.DataFrame([p.as_array() for p in poses], columns=WAYPOINT_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.10g")


def load_waypoints(path: Union[str, Path]) -> List[Pose]:
    frame = pd.read_csv(path, comment="#", dtype=str)
    if list(frame.columns) != WAYPOINT_COLUMNS:
        raise DatasetError(f"{path}: ожидается заголовок {','.join(WAYPOINT_COLUMNS)}")
    values = frame.apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1).to_numpy()
    if bad.any():
        raise DatasetError(f"{path}: строка {int(np.flatnonzero(bad)[0]) + 2} не разбирается")
    if values.empty:
        raise DatasetError(f"{path}: нет ни одной точки")
    return [Pose.from_array(row) for row in values.to_numpy(float)]
