"""
Датасеты (давления, сенсоры, поза): генерация на идеальном и возмущённом манипуляторе, разбиение, CSV
"""
import itertools
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd

from sorosense.kinematics.geometry import Pose
from sorosense.plant.manipulator import N_CHAMBERS, GapModel, LoadSpec, SoftManipulator
from sorosense.sensing.sensors import SENSOR_DIM, SensorNoise, SensorSuite, SensorVector
from sorosense.utils.errors import DatasetError, DomainError

logger = logging.getLogger(__name__)

PRESSURE_COLUMNS = [f"q{i}" for i in range(1, N_CHAMBERS + 1)]
SPRING_COLUMNS = [f"sp{i}" for i in range(1, 13)]
IMU_COLUMNS = [f"imu{i}" for i in range(1, 13)]
POSE_COLUMNS = ["x", "y", "z", "yaw", "pitch", "roll"]
CSV_COLUMNS = ["load_g"] + PRESSURE_COLUMNS + SPRING_COLUMNS + IMU_COLUMNS + POSE_COLUMNS

SPLIT_RATIOS = (0.7, 0.2, 0.1)
PROVENANCES = ("sim", "virtual-real")

# предел повторных попыток на одну точку датасета
MAX_RESAMPLES = 100


@dataclass(frozen=True, eq=False)
class Sample:
    q: np.ndarray
    s: SensorVector
    pose: Pose
    load_g: float


@dataclass(eq=False)
class Dataset:
    """Набор точек в виде массивов; разбиение 0.7/0.2/0.1 определяется seed"""

    load_g: np.ndarray
    q: np.ndarray
    sensors: np.ndarray
    poses: np.ndarray
    provenance: str = "sim"
    seed: int = 0

    def __post_init__(self):
        n = len(self.load_g)
        if self.q.shape != (n, N_CHAMBERS) or self.sensors.shape != (n, SENSOR_DIM) or self.poses.shape != (n, 6):
            raise DatasetError(
                f"Несогласованные размеры датасета: {self.q.shape}, {self.sensors.shape}, {self.poses.shape}"
            )
        if self.provenance not in PROVENANCES:
            raise DatasetError(f"Неизвестное происхождение датасета: {self.provenance}")

    def __len__(self) -> int:
        return len(self.load_g)

    @classmethod
    def from_samples(cls, samples: Iterable[Sample], provenance: str = "sim", seed: int = 0) -> "Dataset":
        samples = list(samples)
        if not samples:
            raise DatasetError("Пустой датасет")
        return cls(
            load_g=np.array([s.load_g for s in samples], dtype=float),
            q=np.vstack([s.q for s in samples]),
            sensors=np.vstack([s.s.values for s in samples]),
            poses=np.vstack([s.pose.as_array() for s in samples]),
            provenance=provenance,
            seed=seed,
        )

    def sample(self, i: int) -> Sample:
        return Sample(self.q[i], SensorVector(self.sensors[i]), Pose.from_array(self.poses[i]), float(self.load_g[i]))

    def subset(self, index: np.ndarray) -> "Dataset":
        return Dataset(
            self.load_g[index], self.q[index], self.sensors[index], self.poses[index], self.provenance, self.seed
        )

    def split_indices(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Индексы train/val/test: размеры val и test округляются вниз, остаток уходит в train"""
        n = len(self)
        order = np.random.default_rng(self.seed).permutation(n)
        n_val = math.floor(SPLIT_RATIOS[1] * n)
        n_test = math.floor(SPLIT_RATIOS[2] * n)
        n_train = n - n_val - n_test
        return order[:n_train], order[n_train:n_train + n_val], order[n_train + n_val:]

    def splits(self) -> Tuple["Dataset", "Dataset", "Dataset"]:
        return tuple(self.subset(idx) for idx in self.split_indices())

    @property
    def workspace_extent(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.poses[:, :3].min(axis=0), self.poses[:, :3].max(axis=0)

    @property
    def workspace_diagonal(self) -> float:
        lo, hi = self.workspace_extent
        return float(np.linalg.norm(hi - lo))

    def to_frame(self) -> pd.DataFrame:
        data = np.column_stack([self.load_g, self.q, self.sensors, self.poses])
        return pd.DataFrame(data, columns=CSV_COLUMNS)

    def to_csv(self, path: Union[str, Path], header_comment: Optional[str] = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as f:
            if header_comment:
                f.write(f"# {header_comment}\n")
            f.write(f"# provenance={self.provenance} split_seed={self.seed}\n")
            self.to_frame().to_csv(f, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "Dataset":
        provenance, seed, skipped = "sim", 0, 0
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                skipped += 1
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    if key == "provenance":
                        provenance = value
                    elif key == "split_seed":
                        seed = int(value)

        frame = pd.read_csv(path, skiprows=skipped, dtype=str)
        if list(frame.columns) != CSV_COLUMNS:
            raise DatasetError(f"{path}: неожиданный заголовок, ожидается {','.join(CSV_COLUMNS)}")
        if frame.empty:
            raise DatasetError(f"{path}: датасет пуст")

        values = frame.apply(pd.to_numeric, errors="coerce")
        bad = values.isna().any(axis=1).to_numpy()
        if bad.any():
            line = int(np.flatnonzero(bad)[0]) + skipped + 2
            raise DatasetError(f"{path}: строка {line} не разбирается")

        data = values.to_numpy(float)
        return cls(
            load_g=data[:, 0],
            q=data[:, 1:7],
            sensors=data[:, 7:7 + SENSOR_DIM],
            poses=data[:, 7 + SENSOR_DIM:],
            provenance=provenance,
            seed=seed,
        )


def _collect(
    plant: SoftManipulator,
    suite: SensorSuite,
    pressures: Iterable[np.ndarray],
    load: LoadSpec,
    gap: Optional[GapModel],
    redraw: Optional[Callable[[], np.ndarray]] = None,
    noise: Optional[SensorNoise] = None,
    progress: Optional[Callable[[], None]] = None,
) -> Tuple[list, int]:
    """Точки датасета для последовательности давлений; несошедшиеся точки перевыбираются через redraw"""
    samples, resampled = [], 0
    for q in pressures:
        for _ in range(MAX_RESAMPLES):
            if gap is None:
                state, pose = plant.forward(q, load)
            else:
                state, pose = plant.real_forward(q, load, gap)
            if state.converged or redraw is None:
                break
            resampled += 1
            q = redraw()
        else:
            raise DatasetError(f"Манипулятор не сходится после {MAX_RESAMPLES} попыток")

        if not state.converged:
            logger.warning(f"Точка сетки q={np.round(q, 3).tolist()} не сошлась, сохранена как есть")
        samples.append(Sample(state.pressures.copy(), suite.read(state, noise, gap), pose, load.payload_g))
        if progress is not None:
            progress()
    return samples, resampled


def gen_sim_dataset(
    plant: SoftManipulator,
    suite: SensorSuite,
    n: int = 20000,
    seed: int = 0,
    load: LoadSpec = LoadSpec(),
    grid_levels: int = 0,
    progress: Optional[Callable[[], None]] = None,
) -> Dataset:
    """Равномерные давления, идеальная модель, сенсоры без шума.
    grid_levels > 0 дописывает после n случайных точек сетку pressure_grid(grid_levels)"""
    if n < 1:
        raise DomainError(f"Размер датасета должен быть положительным: {n}")
    if suite.gap is not None:
        raise DomainError("Датасет симуляции читается без модели разрыва")
    if grid_levels < 0:
        raise DomainError(f"Число уровней сетки не может быть отрицательным: {grid_levels}")

    rng = np.random.default_rng(seed)
    chamber = plant.chamber

    def draw() -> np.ndarray:
        return rng.uniform(chamber.p_min, chamber.p_max, N_CHAMBERS)

    samples, resampled = _collect(
        plant, suite, (draw() for _ in range(n)), load, None, draw, SensorNoise.noiseless(), progress
    )
    if grid_levels:
        # углы и грани куба давлений, куда случайные точки почти не попадают
        grid = pressure_grid(grid_levels, chamber.p_min, chamber.p_max)
        corners, _ = _collect(plant, suite, grid, load, None, None, SensorNoise.noiseless(), progress)
        samples.extend(corners)
    logger.info(f"Датасет sim: {len(samples)} точек, перевыборок {resampled}")
    return Dataset.from_samples(samples, "sim", seed)


def pressure_grid(levels: int, p_min: float = -40.0, p_max: float = 40.0) -> np.ndarray:
    """Полный факторный план levels^6; при levels=1 единственная точка - нулевые давления"""
    if levels < 1:
        raise DomainError(f"Число уровней должно быть не меньше 1: {levels}")
    values = np.linspace(p_min, p_max, levels) if levels > 1 else np.array([0.0])
    return np.array(list(itertools.product(values, repeat=N_CHAMBERS)))


def gen_real_dataset(
    plant: SoftManipulator,
    gap: GapModel,
    suite: SensorSuite,
    levels: int = 3,
    seed: int = 0,
    load: LoadSpec = LoadSpec(),
    progress: Optional[Callable[[], None]] = None,
) -> Dataset:
    """Сетка давлений на возмущённой модели, сенсоры с разрывом и шумом"""
    grid = pressure_grid(levels, plant.chamber.p_min, plant.chamber.p_max)
    samples, _ = _collect(plant, suite, grid, load, gap, progress=progress)
    logger.info(f"Датасет virtual-real: {len(samples)} точек ({levels} уровней)")
    return Dataset.from_samples(samples, "virtual-real", seed)


def gen_load_dataset(
    plant: SoftManipulator,
    gap: GapModel,
    suite: SensorSuite,
    payload_g: float,
    n: int = 200,
    seed: int = 0,
    progress: Optional[Callable[[], None]] = None,
) -> Dataset:
    """Случайные давления на возмущённой модели под заданной полезной нагрузкой"""
    rng = np.random.default_rng(seed)
    chamber = plant.chamber

    def draw() -> np.ndarray:
        return rng.uniform(chamber.p_min, chamber.p_max, N_CHAMBERS)

    load = LoadSpec().with_payload(payload_g)
    samples, resampled = _collect(plant, suite, (draw() for _ in range(n)), load, gap, draw, progress=progress)
    logger.info(f"Датасет с нагрузкой {payload_g} г: {n} точек, перевыборок {resampled}")
    return Dataset.from_samples(samples, "virtual-real", seed)
