"""
Виртуальные сенсоры: 12 пружин и 4 IMU → вектор из 24 значений
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from sorosense.kinematics.geometry import (
    SegmentGeometry,
    euler_to_rotation,
    rot_z,
    spring_lengths,
    transform_to_euler,
)
from sorosense.plant.manipulator import GapModel, PlantState
from sorosense.sensing.calibration import (
    INDUCTANCE_UNIT,
    CalibrationCurve,
    CircuitParams,
    frequency_from_inductance,
    inductance_from_frequency,
    inductance_from_length,
    length_from_inductance,
)
from sorosense.utils.errors import DomainError

N_SPRINGS = 12
N_IMU_VALUES = 12
SENSOR_DIM = N_SPRINGS + N_IMU_VALUES
SPRING_ENVELOPE = (60.0, 260.0)

# gap по умолчанию: модель разрыва самого тракта
SUITE_GAP = object()

# Две IMU на площадке установлены перпендикулярно друг другу
IMU_MOUNTS = (np.eye(3), rot_z(np.pi / 2.0))


@dataclass(frozen=True)
class SensorNoise:
    """Шум сенсоров: СКО пружин (мм) и IMU (град), шаг квантования пружин (мм)"""

    spring_sigma: float = 0.2
    imu_sigma: float = 0.3
    quantization: float = 0.4
    seed: Optional[int] = None

    def __post_init__(self):
        if self.spring_sigma < 0 or self.imu_sigma < 0 or self.quantization < 0:
            raise DomainError("Параметры шума не могут быть отрицательными")

    @classmethod
    def noiseless(cls) -> "SensorNoise":
        return cls(0.0, 0.0, 0.0)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True, eq=False)
class SensorVector:
    """Показания: пружины 0-11 (мм), затем (yaw, pitch, roll) IMU средней A, B и концевой A, B"""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (SENSOR_DIM,):
            raise DomainError(f"Вектор сенсоров должен иметь {SENSOR_DIM} значений, получено {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def spring(self) -> np.ndarray:
        return self.values[:N_SPRINGS]

    @property
    def imu(self) -> np.ndarray:
        return self.values[N_SPRINGS:]

    def in_envelope(self) -> bool:
        lo, hi = SPRING_ENVELOPE
        return bool(np.all((self.spring >= lo) & (self.spring <= hi)))


class SensorSuite:
    """Тракт измерений: геометрия → индуктивность → частота → калибровка, кадры площадок → углы IMU"""

    def __init__(
        self,
        geometry: SegmentGeometry = SegmentGeometry(),
        curve: Optional[CalibrationCurve] = None,
        circuit: CircuitParams = CircuitParams(),
        noise: SensorNoise = SensorNoise(),
        gap: Optional[GapModel] = None,
    ):
        self.geometry = geometry
        self.curve = CalibrationCurve.simulation_default() if curve is None else curve
        self.circuit = circuit
        self.noise = noise
        self.gap = gap
        # у каждого экземпляра свой поток случайных чисел
        self.rng = noise.rng()
        self.logger = logging.getLogger(__name__)

    def geometric_springs(self, state: PlantState) -> np.ndarray:
        """Истинные длины 12 пружин (мм)"""
        base, mid, end = state.frames
        return np.concatenate([
            spring_lengths(self.geometry, base, mid),
            spring_lengths(self.geometry, mid, end),
        ])

    def _read_springs(self, true_lengths: np.ndarray, noise: SensorNoise, gap: Optional[GapModel]) -> np.ndarray:
        lo, hi = self.curve.length_range
        clipped = np.clip(true_lengths, lo, hi)
        if np.any(clipped != true_lengths):
            self.logger.debug("Длина пружины вне откалиброванного диапазона, показание насыщено")

        # сырой сигнал: индуктивность пружины → частота контура → обратно
        inductance = inductance_from_length(clipped, self.curve) * INDUCTANCE_UNIT
        frequency = frequency_from_inductance(inductance, self.circuit)
        measured, _ = inductance_from_frequency(frequency, self.circuit)
        measured = measured / INDUCTANCE_UNIT

        if gap is not None:
            measured = measured * gap.spring_gain
        lengths, _ = length_from_inductance(measured, self.curve)
        if gap is not None:
            lengths = lengths + gap.spring_bias

        if noise.spring_sigma > 0:
            lengths = lengths + self.rng.normal(0.0, noise.spring_sigma, N_SPRINGS)
        if noise.quantization > 0:
            lengths = np.round(lengths / noise.quantization) * noise.quantization
        return lengths

    def _read_imus(self, state: PlantState, noise: SensorNoise, gap: Optional[GapModel]) -> np.ndarray:
        angles = []
        for pad in state.frames[1:]:
            for mount in IMU_MOUNTS:
                raw = np.array(transform_to_euler(pad.rotation @ mount)[:3])
                k = len(angles)
                if gap is not None:
                    raw = raw + gap.imu_bias[k:k + 3]
                if noise.imu_sigma > 0:
                    raw = raw + self.rng.normal(0.0, noise.imu_sigma, 3)
                # пересчёт показания IMU в ориентацию площадки
                pad_rotation = euler_to_rotation(*raw) @ mount.T
                angles.extend(transform_to_euler(pad_rotation)[:3])
        return np.array(angles)

    def read(
        self,
        state: PlantState,
        noise: Optional[SensorNoise] = None,
        gap: Union[GapModel, None, object] = SUITE_GAP,
    ) -> SensorVector:
        """Одно считывание всех сенсоров; gap=None отключает разрыв тракта для этого считывания"""
        noise = self.noise if noise is None else noise
        gap = self.gap if gap is SUITE_GAP else gap
        springs = self._read_springs(self.geometric_springs(state), noise, gap)
        return SensorVector(np.concatenate([springs, self._read_imus(state, noise, gap)]))


def read_sensors(
    state: PlantState,
    geometry: SegmentGeometry = SegmentGeometry(),
    noise: SensorNoise = SensorNoise(),
    gap: Optional[GapModel] = None,
    curve: Optional[CalibrationCurve] = None,
) -> SensorVector:
    """Разовое считывание с собственным потоком шума из noise.seed"""
    return SensorSuite(geometry, curve, noise=noise, gap=gap).read(state)


def stack(vectors: Sequence[SensorVector]) -> np.ndarray:
    return np.vstack([v.values for v in vectors])
