"""
Геометрия постоянной кривизны (PCC) для одного сегмента и цепочка кадров двухсегментного манипулятора

Манипулятор подвешен к потолку: базовый кадр совпадает с центром потолочной площадки,
ось z направлена вниз вдоль гравитации. Внутри модуля углы хранятся в радианах,
наружу (Pose, датасеты, отчёты) отдаются в градусах.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from sorosense.utils.errors import DomainError

logger = logging.getLogger(__name__)

# Диапазон длин камер (мм)
CHAMBER_L_MIN = 70.0
CHAMBER_L_MAX = 220.0

# Ниже этой кривизны сегмент считается прямым
STRAIGHT_KAPPA = 1e-8

# Допуск (в градусах) для определения складывания рамок
GIMBAL_TOL_DEG = 1e-6

PROXIMAL = "proximal"
DISTAL = "distal"


def wrap_angle(angle: float) -> float:
    """Привести угол (рад) к интервалу (-pi, pi]"""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def rot_z(angle: float) -> np.ndarray:
    """Поворот вокруг z"""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(angle: float) -> np.ndarray:
    """Поворот вокруг y"""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class ArcParams:
    """Параметры дуги: кривизна (1/мм), угол плоскости изгиба (рад), длина дуги (мм)"""

    kappa: float
    phi: float
    arc_len: float

    def __post_init__(self):
        if not self.arc_len > 0:
            raise DomainError(f"Длина дуги должна быть положительной: {self.arc_len}")
        if self.kappa < 0:
            raise DomainError(f"Кривизна не может быть отрицательной: {self.kappa}")
        if not -math.pi < self.phi <= math.pi:
            raise DomainError(f"Угол phi вне (-pi, pi]: {self.phi}")

    @property
    def bend_angle(self) -> float:
        """Полный угол изгиба сегмента (рад)"""
        return self.kappa * self.arc_len


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Жёсткое преобразование: ортонормированная матрица поворота и перенос (мм)"""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def offset_z(cls, dz: float) -> "RigidTransform":
        """Чистый перенос вдоль локальной оси z"""
        return cls(np.eye(3), np.array([0.0, 0.0, dz]))

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Перевести точки (..., 3) из локального кадра в родительский"""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def orthonormality_error(self) -> float:
        """max(|RᵀR - I|, |det R - 1|)"""
        r = self.rotation
        return max(
            float(np.max(np.abs(r.T @ r - np.eye(3)))),
            abs(float(np.linalg.det(r)) - 1.0),
        )


@dataclass(frozen=True)
class Pose:
    """Поза концевого эффектора: x, y, z (мм); yaw, pitch, roll (град), ZYX внутренняя конвенция"""

    x: float
    y: float
    z: float
    yaw: float
    pitch: float
    roll: float
    gimbal_lock: bool = False

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Pose":
        v = [float(a) for a in values]
        if len(v) != 6:
            raise DomainError(f"Поза должна содержать 6 значений, получено {len(v)}")
        return cls(*v)

    @classmethod
    def from_transform(cls, transform: RigidTransform) -> "Pose":
        yaw, pitch, roll, locked = transform_to_euler(transform.rotation)
        x, y, z = transform.translation
        return cls(float(x), float(y), float(z), yaw, pitch, roll, locked)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.yaw, self.pitch, self.roll])

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def to_transform(self) -> RigidTransform:
        return RigidTransform(euler_to_rotation(self.yaw, self.pitch, self.roll), self.translation)


def _default_spring_mounts(mount_offset_deg: float) -> Tuple[Tuple[float, str], ...]:
    """Три 'X'-пары между камерами: пружина a идёт c-δ/2 → c+δ/2, пружина b наоборот"""
    half = math.radians(mount_offset_deg) / 2.0
    mounts = []
    for j in range(3):
        center = math.pi / 3.0 + j * 2.0 * math.pi / 3.0
        mounts += [(center - half, PROXIMAL), (center + half, DISTAL)]
        mounts += [(center + half, PROXIMAL), (center - half, DISTAL)]
    return tuple(mounts)


@dataclass(frozen=True)
class SegmentGeometry:
    """Геометрия сегмента: окружности крепления камер и пружин, толщина площадок"""

    chamber_radius: float = 60.0
    spring_radius: float = 55.0
    pad_half_thickness: float = 10.0
    mount_offset_deg: float = 40.0
    chamber_angles: Tuple[float, float, float] = (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
    spring_mounts: Optional[Tuple[Tuple[float, str], ...]] = field(default=None)

    def __post_init__(self):
        if self.chamber_radius <= 0 or self.spring_radius <= 0 or self.pad_half_thickness < 0:
            raise DomainError("Радиусы должны быть положительными, толщина площадки неотрицательной")

        angles = self.chamber_angles
        for i in range(3):
            gap = (angles[(i + 1) % 3] - angles[i]) % (2.0 * math.pi)
            if abs(gap - 2.0 * math.pi / 3.0) > 1e-9:
                raise DomainError(f"Камеры должны быть разнесены на 120°: {angles}")

        mounts = self.spring_mounts
        if mounts is None:
            mounts = _default_spring_mounts(self.mount_offset_deg)
            object.__setattr__(self, "spring_mounts", mounts)
        if len(mounts) != 12:
            raise DomainError(f"Нужно 12 точек крепления (6 пружин), получено {len(mounts)}")
        for k in range(6):
            (a_prox, pad_prox), (a_dist, pad_dist) = mounts[2 * k], mounts[2 * k + 1]
            if pad_prox != PROXIMAL or pad_dist != DISTAL:
                raise DomainError(f"Пружина {k}: ожидается пара (proximal, distal)")
            if abs(wrap_angle(a_prox - a_dist)) < 1e-12:
                logger.warning(f"Пружина {k} не скрещена: вырожденная геометрия без 'X'")

    @property
    def pad_offset(self) -> RigidTransform:
        return RigidTransform.offset_z(self.pad_half_thickness)

    def mount_points(self) -> Tuple[np.ndarray, np.ndarray]:
        """Точки крепления пружин: (6, 3) на проксимальной и (6, 3) на дистальной площадке"""
        mounts = self.spring_mounts
        h, r = self.pad_half_thickness, self.spring_radius
        prox = np.array([[r * math.cos(a), r * math.sin(a), h] for a, _ in mounts[0::2]])
        dist = np.array([[r * math.cos(a), r * math.sin(a), -h] for a, _ in mounts[1::2]])
        return prox, dist


def chamber_lengths_to_arc(
    l1: float,
    l2: float,
    l3: float,
    d_c: float,
    l_min: float = CHAMBER_L_MIN,
    l_max: float = CHAMBER_L_MAX,
) -> ArcParams:
    """Длины трёх камер → параметры дуги (замкнутая формула PCC)"""
    if d_c <= 0:
        raise DomainError(f"Радиус крепления камер должен быть положительным: {d_c}")
    for value in (l1, l2, l3):
        if not l_min - 1e-9 <= value <= l_max + 1e-9:
            raise DomainError(f"Длина камеры {value} мм вне [{l_min}, {l_max}]")

    total = l1 + l2 + l3
    spread = l1 * l1 + l2 * l2 + l3 * l3 - l1 * l2 - l2 * l3 - l1 * l3
    kappa = 2.0 * math.sqrt(max(spread, 0.0)) / (d_c * total)
    if kappa < 1e-12:
        return ArcParams(0.0, 0.0, total / 3.0)

    phi = wrap_angle(math.atan2(math.sqrt(3.0) * (l3 - l2), l2 + l3 - 2.0 * l1))
    return ArcParams(kappa, phi, total / 3.0)


def arc_to_transform(arc: ArcParams) -> RigidTransform:
    """Прямая кинематика дуги: T = Rz(phi)·[перенос, Ry(kappa·L)]·Rz(-phi)"""
    if arc.kappa < STRAIGHT_KAPPA:
        return RigidTransform(np.eye(3), np.array([0.0, 0.0, arc.arc_len]))

    theta = arc.kappa * arc.arc_len
    # 1 - cos(theta) через sin², без потери точности на малых углах
    local = np.array([
        2.0 * math.sin(theta / 2.0) ** 2 / arc.kappa,
        0.0,
        math.sin(theta) / arc.kappa,
    ])
    rz = rot_z(arc.phi)
    return RigidTransform(rz @ rot_y(theta) @ rz.T, rz @ local)


def euler_to_rotation(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Углы ZYX (град) → матрица поворота Rz(yaw)·Ry(pitch)·Rx(roll)"""
    return Rotation.from_euler("ZYX", [yaw, pitch, roll], degrees=True).as_matrix()


def transform_to_euler(rotation: np.ndarray) -> Tuple[float, float, float, bool]:
    """
    Матрица поворота → (yaw, pitch, roll) в градусах и флаг складывания рамок

    При |pitch| = 90° yaw и roll неразличимы: roll принимается равным 0.
    """
    r = np.asarray(rotation, dtype=float)
    pitch = math.degrees(math.asin(min(1.0, max(-1.0, -r[2, 0]))))
    if abs(abs(pitch) - 90.0) < GIMBAL_TOL_DEG:
        yaw = math.degrees(math.atan2(-r[0, 1], r[1, 1]))
        logger.debug("Складывание рамок: pitch=%.6f, roll принят равным 0", pitch)
        return yaw, math.copysign(90.0, pitch), 0.0, True

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yaw, pitch, roll = Rotation.from_matrix(r).as_euler("ZYX", degrees=True)
    return float(yaw), float(pitch), float(roll), False


def chain_frames(
    arc1: ArcParams, arc2: ArcParams, geometry: SegmentGeometry
) -> Tuple[RigidTransform, RigidTransform, RigidTransform]:
    """Кадры центров площадок: потолочной (база), средней и концевой"""
    base = RigidTransform.identity()
    pad = geometry.pad_offset
    mid_pad = base @ pad @ arc_to_transform(arc1) @ pad
    end_pad = mid_pad @ pad @ arc_to_transform(arc2) @ pad
    return base, mid_pad, end_pad


def spring_lengths(
    geometry: SegmentGeometry, proximal: RigidTransform, distal: RigidTransform
) -> np.ndarray:
    """Длины шести пружин сегмента (мм) между его проксимальной и дистальной площадками"""
    prox_local, dist_local = geometry.mount_points()
    return np.linalg.norm(distal.apply(dist_local) - proximal.apply(prox_local), axis=1)
