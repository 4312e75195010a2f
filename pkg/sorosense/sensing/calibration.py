"""
Калибровка пружинного сенсора: частота LC-контура → индуктивность → длина пружины

Индуктивность в единицах кривой калибровки хранится в мкГн, в формуле контура - в Гн.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd
from numpy.polynomial import polynomial as P
from scipy.optimize import bisect

from sorosense.utils.errors import CalibrationError, ConfigurationError, DomainError

logger = logging.getLogger(__name__)

# Коэффициенты квартики, снятые на стенде для пружины (a..e)
MEASURED_COEFFICIENTS = (-12.89, 0.9553, -1.091e-2, 5.692e-5, -1.119e-7)

# Единица индуктивности кривой калибровки (мкГн)
INDUCTANCE_UNIT = 1e-6

CSV_COLUMNS = ["inductance", "length_mm"]


@dataclass(frozen=True)
class CircuitParams:
    """Параметры измерительного контура: ёмкость (Ф) и компенсирующая индуктивность (Гн)"""

    capacitance: float = 1e-9
    compensation: float = 10e-6

    def __post_init__(self):
        if self.capacitance <= 0:
            raise DomainError(f"Ёмкость должна быть положительной: {self.capacitance}")
        if self.compensation < 0:
            raise DomainError(f"Компенсирующая индуктивность не может быть отрицательной: {self.compensation}")


@dataclass(frozen=True)
class CalibrationCurve:
    """Квартика L(I) = a + b·I + c·I² + d·I³ + e·I⁴ на откалиброванном диапазоне [i_min, i_max]"""

    a: float
    b: float
    c: float
    d: float
    e: float
    i_min: float = 10.0
    i_max: float = 150.0

    @classmethod
    def measured(cls) -> "CalibrationCurve":
        """Стендовая кривая без изменений"""
        return cls(*MEASURED_COEFFICIENTS)

    @classmethod
    def simulation_default(cls) -> "CalibrationCurve":
        """Кривая виртуальных пружин: форма стендовой квартики, растянутая на 60..270 мм"""
        return cls.measured().rescaled(60.0, 270.0)

    @classmethod
    def from_coefficients(cls, coefficients, i_min: float = 10.0, i_max: float = 150.0) -> "CalibrationCurve":
        return cls(*[float(v) for v in coefficients], i_min=i_min, i_max=i_max)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e])

    def __call__(self, inductance):
        return P.polyval(inductance, self.coefficients)

    def rescaled(self, length_lo: float, length_hi: float) -> "CalibrationCurve":
        """Аффинно перенести выход кривой на [length_lo, length_hi] на том же диапазоне I"""
        lo, hi = self(self.i_min), self(self.i_max)
        scale = (length_hi - length_lo) / (hi - lo)
        coefficients = self.coefficients * scale
        coefficients[0] = length_lo + (self.a - lo) * scale
        return CalibrationCurve.from_coefficients(coefficients, self.i_min, self.i_max)

    @property
    def length_range(self) -> Tuple[float, float]:
        return float(self(self.i_min)), float(self(self.i_max))

    @cached_property
    def is_monotone(self) -> bool:
        """Строгая монотонность на откалиброванном диапазоне (1000 точек)"""
        grid = np.linspace(self.i_min, self.i_max, 1000)
        return bool(np.all(np.diff(self(grid)) > 0))

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: Union[str, Path], residual_rms: float = float("nan")) -> None:
        data = self.to_dict()
        data["residual_rms"] = residual_rms
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=4)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "CalibrationCurve":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            return cls(*(float(data[k]) for k in "abcde"), i_min=float(data["i_min"]), i_max=float(data["i_max"]))
        except (KeyError, TypeError, ValueError) as e:
            raise CalibrationError(f"Файл кривой {path} повреждён: {e}") from e


def inductance_from_frequency(frequency, circuit: CircuitParams = CircuitParams()):
    """Индуктивность пружины (Гн) по частоте контура; флаг, если результат ниже порога компенсации"""
    frequency = np.asarray(frequency, dtype=float)
    if np.any(frequency <= 0):
        raise DomainError("Частота должна быть положительной")
    inductance = 1.0 / (circuit.capacitance * (2.0 * math.pi * frequency) ** 2) - circuit.compensation
    return inductance, inductance <= 0


def frequency_from_inductance(inductance, circuit: CircuitParams = CircuitParams()):
    """Частота контура (Гц) для индуктивности пружины (Гн)"""
    total = np.asarray(inductance, dtype=float) + circuit.compensation
    if np.any(total <= 0):
        raise DomainError("Суммарная индуктивность контура должна быть положительной")
    return 1.0 / (2.0 * math.pi * np.sqrt(circuit.capacitance * total))


def length_from_inductance(inductance, curve: CalibrationCurve):
    """Длина пружины (мм) по индуктивности; флаг экстраполяции за пределами калибровки"""
    inductance = np.asarray(inductance, dtype=float)
    extrapolated = (inductance < curve.i_min) | (inductance > curve.i_max)
    return curve(inductance), extrapolated


def inductance_from_length(length, curve: CalibrationCurve, xtol: float = 1e-9):
    """Обратная калибровка: численное обращение монотонной квартики бисекцией"""
    if not curve.is_monotone:
        raise ConfigurationError("Кривая калибровки немонотонна на откалиброванном диапазоне")

    lo, hi = curve.length_range
    lengths = np.atleast_1d(np.asarray(length, dtype=float))
    if np.any(lengths < lo - 1e-9) or np.any(lengths > hi + 1e-9):
        raise DomainError(f"Длина вне откалиброванного диапазона [{lo:.3f}, {hi:.3f}] мм")

    result = np.empty_like(lengths)
    for k, target in enumerate(lengths):
        target = min(max(target, lo), hi)
        result[k] = bisect(lambda i: curve(i) - target, curve.i_min, curve.i_max, xtol=xtol)
    return result if np.ndim(length) else float(result[0])


def fit_calibration(inductance, length) -> Tuple[CalibrationCurve, float]:
    """МНК-квартика по парам (I, L); возвращает кривую и СКО остатков (мм)"""
    inductance = np.asarray(inductance, dtype=float)
    length = np.asarray(length, dtype=float)
    if inductance.size != length.size:
        raise CalibrationError("Число значений индуктивности и длины не совпадает")
    if inductance.size < 5:
        raise CalibrationError(f"Для квартики нужно минимум 5 точек, получено {inductance.size}")

    coefficients, (_, rank, _, _) = P.polyfit(inductance, length, 4, full=True)
    if rank < 5:
        raise CalibrationError(f"Вырожденная матрица плана (ранг {rank} < 5)")

    curve = CalibrationCurve.from_coefficients(coefficients, float(inductance.min()), float(inductance.max()))
    rms = float(np.sqrt(np.mean((curve(inductance) - length) ** 2)))
    logger.info(f"Калибровка по {inductance.size} точкам: СКО остатков {rms:.4f} мм")
    return curve, rms


def load_calibration_samples(path: Union[str, Path]) -> Tuple[np.ndarray, np.ndarray]:
    """Прочитать CSV `inductance,length_mm`; ошибки с номером строки файла"""
    frame = pd.read_csv(path, comment="#", dtype=str, skipinitialspace=True)
    if list(frame.columns) != CSV_COLUMNS:
        raise CalibrationError(f"{path}: ожидается заголовок {','.join(CSV_COLUMNS)}")

    values = frame.apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1)
    if bad.any():
        # +2: заголовок и нумерация с единицы
        line = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise CalibrationError(f"{path}: строка {line} не разбирается")
    return values["inductance"].to_numpy(float), values["length_mm"].to_numpy(float)
