"""
Оценка позы по сенсорам: сеть N_smap и поправочные сети sim-to-real в пространстве поз
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from sorosense.kinematics.geometry import Pose
from sorosense.neuralnet.mlp import MLP, TrainConfig, TrainHistory, train
from sorosense.plant.manipulator import GapModel, SoftManipulator
from sorosense.proprioception.dataset import Dataset, gen_load_dataset
from sorosense.sensing.sensors import SENSOR_DIM, SensorSuite, SensorVector
from sorosense.utils.errors import DatasetError, DomainError

logger = logging.getLogger(__name__)

CHANNELS = {
    "fused": np.arange(SENSOR_DIM),
    "spring-only": np.arange(12),
    "imu-only": np.arange(12, SENSOR_DIM),
}
SMAP_HIDDEN = (120, 120)
S2R_HIDDEN = (45,)
MIN_SIM_SAMPLES = 1000


def wrap_degrees(angles: np.ndarray) -> np.ndarray:
    """Разность углов в (-180, 180]"""
    return 180.0 - np.mod(180.0 - np.asarray(angles, dtype=float), 360.0)


@dataclass
class PosePredictor:
    """Композиция pose = p + [N_s2r_T(p_T); N_s2r_R(p_R)], p = N_smap(s), либо N_smap(s).
    Поправочные сети выдают приращение: необученная поправка тождественна"""

    smap: MLP
    s2r_t: Optional[MLP] = None
    s2r_r: Optional[MLP] = None
    s2r_enabled: bool = False
    channels: str = "fused"

    def __post_init__(self):
        if self.channels not in CHANNELS:
            raise DomainError(f"Неизвестный набор каналов: {self.channels}")
        if self.smap.input_dim != len(self.selection) or self.smap.output_dim != 6:
            raise DomainError(f"Архитектура N_smap {self.smap.sizes} не подходит каналам {self.channels}")
        if self.s2r_enabled and (self.s2r_t is None or self.s2r_r is None):
            raise DomainError("Поправка sim-to-real включена, но сети не заданы")

    @property
    def selection(self) -> np.ndarray:
        return CHANNELS[self.channels]

    @property
    def sensor_scale(self) -> np.ndarray:
        """Масштаб нормализации входа по всем 24 каналам (1 для невыбранных)"""
        scale = np.ones(SENSOR_DIM)
        scale[self.selection] = self.smap.normalizer_in.std
        return scale

    def raw(self, sensors) -> np.ndarray:
        sensors = np.asarray(sensors, dtype=float)
        return self.smap.forward(sensors[..., self.selection])

    def predict(self, sensors) -> np.ndarray:
        """Позы (n, 6) или (6,) по сырым показаниям 24 каналов"""
        pose = self.raw(sensors)
        if not self.s2r_enabled:
            return pose
        correction = np.concatenate([self.s2r_t.forward(pose[..., :3]), self.s2r_r.forward(pose[..., 3:])], axis=-1)
        return pose + correction

    def predict_pose(self, s: SensorVector) -> Pose:
        return Pose.from_array(self.predict(s.values))

    def input_gradient(self, sensors, residual) -> np.ndarray:
        """Градиент residualᵀ·pose(s) по всем 24 каналам (невыбранные каналы дают ноль)"""
        sensors = np.asarray(sensors, dtype=float)
        residual = np.asarray(residual, dtype=float)
        selected = sensors[..., self.selection]
        if self.s2r_enabled:
            pose = self.smap.forward(selected)
            residual = residual + np.concatenate([
                self.s2r_t.input_gradient(pose[..., :3], residual[..., :3]),
                self.s2r_r.input_gradient(pose[..., 3:], residual[..., 3:]),
            ], axis=-1)
        grad = np.zeros(sensors.shape)
        grad[..., self.selection] = self.smap.input_gradient(selected, residual)
        return grad

    def save(self, directory: Union[str, Path]) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.smap.save(directory / f"smap_{self.channels}.json")
        if self.s2r_t is not None and self.s2r_r is not None:
            self.s2r_t.save(directory / "s2r_t.json")
            self.s2r_r.save(directory / "s2r_r.json")

    @classmethod
    def load(cls, directory: Union[str, Path], channels: str = "fused", s2r: bool = True) -> "PosePredictor":
        directory = Path(directory)
        smap = MLP.load(directory / f"smap_{channels}.json")
        t_path, r_path = directory / "s2r_t.json", directory / "s2r_r.json"
        if s2r and t_path.exists() and r_path.exists():
            return cls(smap, MLP.load(t_path), MLP.load(r_path), True, channels)
        return cls(smap, channels=channels)


def predict_pose(pred: PosePredictor, s: SensorVector) -> Pose:
    return pred.predict_pose(s)


@dataclass
class EvalReport:
    """Средняя евклидова ошибка положения (мм) и средние абсолютные ошибки углов (град)"""

    translation: float
    yaw: float
    pitch: float
    roll: float
    n: int
    per_load: Dict[float, "EvalReport"] = field(default_factory=dict)

    def as_row(self) -> Dict[str, float]:
        return {
            "n": self.n,
            "translation_mm": self.translation,
            "yaw_deg": self.yaw,
            "pitch_deg": self.pitch,
            "roll_deg": self.roll,
        }


def pose_errors(predicted: np.ndarray, truth: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Поточечные ошибки: расстояние (n,) и модули разностей углов (n, 3)"""
    predicted, truth = np.atleast_2d(predicted), np.atleast_2d(truth)
    distance = np.linalg.norm(predicted[:, :3] - truth[:, :3], axis=1)
    angles = np.abs(wrap_degrees(predicted[:, 3:] - truth[:, 3:]))
    return distance, angles


def report_from_errors(distance: np.ndarray, angles: np.ndarray) -> EvalReport:
    yaw, pitch, roll = angles.mean(axis=0)
    return EvalReport(float(distance.mean()), float(yaw), float(pitch), float(roll), len(distance))


def evaluate(pred, dataset: Dataset) -> EvalReport:
    """Метрики на выборке; при нескольких нагрузках добавляется разбивка по нагрузкам"""
    if len(dataset) == 0:
        raise DatasetError("Пустая тестовая выборка")
    distance, angles = pose_errors(pred.predict(dataset.sensors), dataset.poses)
    report = report_from_errors(distance, angles)

    loads = np.unique(dataset.load_g)
    if len(loads) > 1:
        for load in loads:
            mask = dataset.load_g == load
            report.per_load[float(load)] = report_from_errors(distance[mask], angles[mask])
    return report


def train_smap(
    dataset: Dataset,
    cfg: TrainConfig = TrainConfig(),
    hidden: Sequence[int] = SMAP_HIDDEN,
    channels: str = "fused",
    min_samples: int = MIN_SIM_SAMPLES,
    on_epoch: Optional[Callable[[int, float, float], None]] = None,
) -> Tuple[PosePredictor, TrainHistory]:
    """Обучить N_smap (сенсоры → поза) на обучающей части с ранней остановкой по валидации"""
    if len(dataset) < min_samples:
        raise DatasetError(f"Для N_smap нужно минимум {min_samples} точек, получено {len(dataset)}")
    if channels not in CHANNELS:
        raise DomainError(f"Неизвестный набор каналов: {channels}")

    selection = CHANNELS[channels]
    train_set, val_set, _ = dataset.splits()
    net = MLP.create([len(selection), *hidden, 6], seed=cfg.seed)
    logger.info(f"Обучение N_smap {net.sizes} ({channels}) на {len(train_set)} точках")
    net, history = train(
        net,
        train_set.sensors[:, selection], train_set.poses,
        val_set.sensors[:, selection], val_set.poses,
        cfg,
        on_epoch,
    )
    return PosePredictor(net, channels=channels), history


def _pose_delta(truth: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    delta = truth - predicted
    delta[:, 3:] = wrap_degrees(delta[:, 3:])
    return delta


def train_s2r(
    dataset: Dataset,
    predictor: PosePredictor,
    cfg: TrainConfig = TrainConfig(),
    hidden: Sequence[int] = S2R_HIDDEN,
    on_epoch: Optional[Callable[[int, float, float], None]] = None,
) -> Tuple[PosePredictor, Tuple[TrainHistory, TrainHistory]]:
    """Поправочные сети учат приращение истинная − предсказанная N_smap поза на реальных данных"""
    train_set, val_set, _ = dataset.splits()
    if len(train_set) == 0 or len(val_set) == 0:
        raise DatasetError(f"Реальный датасет слишком мал для разбиения: {len(dataset)} точек")

    predicted_train, predicted_val = predictor.raw(train_set.sensors), predictor.raw(val_set.sensors)
    delta_train = _pose_delta(train_set.poses, predicted_train)
    delta_val = _pose_delta(val_set.poses, predicted_val)
    nets, histories = [], []
    for part in (slice(0, 3), slice(3, 6)):
        net = MLP.create([3, *hidden, 3], seed=cfg.seed)
        # нулевой выходной слой: до обучения поправка равна нулю
        net.weights[-1][:] = 0.0
        net, history = train(
            net,
            predicted_train[:, part], delta_train[:, part],
            predicted_val[:, part], delta_val[:, part],
            cfg,
            on_epoch,
        )
        nets.append(net)
        histories.append(history)

    logger.info(f"Сети sim-to-real обучены на {len(train_set)} реальных точках")
    combined = PosePredictor(predictor.smap, nets[0], nets[1], True, predictor.channels)
    return combined, tuple(histories)


def ablation(
    dataset: Dataset,
    mode: str,
    cfg: TrainConfig = TrainConfig(),
    hidden: Sequence[int] = SMAP_HIDDEN,
    min_samples: int = MIN_SIM_SAMPLES,
) -> EvalReport:
    """Сеть на подмножестве каналов с теми же скрытыми слоями; оценка на общей тестовой части"""
    predictor, _ = train_smap(dataset, cfg, hidden, mode, min_samples)
    report = evaluate(predictor, dataset.splits()[2])
    logger.info(f"Абляция {mode}: {report.translation:.3f} мм")
    return report


def load_robustness(
    pred: PosePredictor,
    plant: SoftManipulator,
    gap: GapModel,
    suite: SensorSuite,
    loads: Iterable[float],
    n_per_load: int = 200,
    seed: int = 0,
) -> Dict[float, EvalReport]:
    """Свежие тестовые точки на возмущённой модели для каждой нагрузки"""
    reports = {}
    for k, load in enumerate(loads):
        data = gen_load_dataset(plant, gap, suite, load, n_per_load, seed + k)
        reports[float(load)] = evaluate(pred, data)
        logger.info(f"Нагрузка {load} г: {reports[float(load)].translation:.3f} мм")
    return reports
