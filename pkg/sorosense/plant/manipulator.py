"""
Виртуальный двухсегментный пневматический манипулятор

Давления камер и нагрузка → длины камер → кадры площадок → поза концевого эффектора.
Идеальный ("sim") и возмущённый ("virtual-real") варианты различаются только GapModel.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from sorosense.kinematics.geometry import (
    Pose,
    RigidTransform,
    SegmentGeometry,
    chain_frames,
    chamber_lengths_to_arc,
)
from sorosense.utils.errors import DomainError

GRAVITY = 9.81  # м/с²
N_CHAMBERS = 6


@dataclass(frozen=True)
class ChamberModel:
    """Камера-сильфон: аффинная связь давление → длина и податливость под нагрузкой"""

    l_min: float = 70.0
    l_max: float = 220.0
    p_min: float = -40.0
    p_max: float = 40.0
    stiffness: float = 2.0  # Н/мм

    def __post_init__(self):
        if not self.l_min < self.l_max:
            raise DomainError(f"l_min должна быть меньше l_max: {self.l_min} >= {self.l_max}")
        if not self.p_min < self.p_max:
            raise DomainError(f"p_min должно быть меньше p_max: {self.p_min} >= {self.p_max}")
        if self.stiffness <= 0:
            raise DomainError(f"Жёсткость камеры должна быть положительной: {self.stiffness}")

    def rest_length(self, pressures: np.ndarray) -> np.ndarray:
        """Длина камеры без нагрузки (мм)"""
        slope = (self.l_max - self.l_min) / (self.p_max - self.p_min)
        return self.l_min + (np.asarray(pressures, dtype=float) - self.p_min) * slope

    def clamp_length(self, lengths: np.ndarray) -> np.ndarray:
        return np.clip(lengths, self.l_min, self.l_max)


@dataclass(frozen=True, eq=False)
class ActuationVector:
    """Шесть давлений камер (кПа) после ограничения и флаги насыщения"""

    pressures: np.ndarray
    saturated: np.ndarray

    @classmethod
    def clamp(cls, values: Sequence[float], chamber: ChamberModel = ChamberModel()) -> "ActuationVector":
        raw = np.asarray(values, dtype=float).reshape(N_CHAMBERS)
        clipped = np.clip(raw, chamber.p_min, chamber.p_max)
        return cls(clipped, clipped != raw)

    @property
    def any_saturated(self) -> bool:
        return bool(np.any(self.saturated))


@dataclass(frozen=True)
class LoadSpec:
    """Нагрузка: масса груза и дистальной конструкции (г), направление гравитации в базе"""

    payload_g: float = 0.0
    structure_g: float = 450.0
    gravity: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.payload_g < 0 or self.structure_g < 0:
            raise DomainError("Массы не могут быть отрицательными")
        if abs(np.linalg.norm(self.gravity) - 1.0) > 1e-9:
            raise DomainError(f"Направление гравитации должно быть единичным: {self.gravity}")

    @property
    def distal_mass_kg(self) -> float:
        return (self.payload_g + self.structure_g) / 1000.0

    def with_payload(self, payload_g: float) -> "LoadSpec":
        return replace(self, payload_g=float(payload_g))


@dataclass(frozen=True)
class PneumaticDynamics:
    """Запаздывание давления первого порядка"""

    time_constant: float = 0.3
    dt: float = 0.01
    integrator: str = "exact"  # exact | euler

    def __post_init__(self):
        if self.time_constant <= 0 or self.dt <= 0:
            raise DomainError("Постоянная времени и шаг должны быть положительными")
        if self.dt >= self.time_constant:
            raise DomainError(f"Шаг {self.dt} должен быть меньше постоянной времени {self.time_constant}")
        if self.integrator not in ("exact", "euler"):
            raise DomainError(f"Неизвестный интегратор: {self.integrator}")


@dataclass(frozen=True, eq=False)
class GapModel:
    """Разрыв sim-to-real: искажения пружин, дрейф IMU и смещения длин камер"""

    spring_gain: np.ndarray
    spring_bias: np.ndarray
    imu_bias: np.ndarray
    chamber_offset: np.ndarray
    seed: Optional[int] = None

    @classmethod
    def from_seed(cls, seed: int) -> "GapModel":
        rng = np.random.default_rng(seed)
        return cls(
            spring_gain=rng.uniform(0.98, 1.02, 12),
            spring_bias=rng.uniform(-1.5, 1.5, 12),
            imu_bias=rng.uniform(-1.0, 1.0, 12),
            chamber_offset=rng.uniform(-2.0, 2.0, N_CHAMBERS),
            seed=seed,
        )

    @classmethod
    def null(cls) -> "GapModel":
        return cls(np.ones(12), np.zeros(12), np.zeros(12), np.zeros(N_CHAMBERS))


@dataclass(frozen=True, eq=False)
class PlantState:
    """Состояние манипулятора: давления, длины камер, кадры площадок, нагрузка"""

    pressures: np.ndarray
    lengths: np.ndarray
    frames: Tuple[RigidTransform, RigidTransform, RigidTransform]
    load: LoadSpec
    time: float = 0.0
    converged: bool = True
    saturated: np.ndarray = field(default_factory=lambda: np.zeros(N_CHAMBERS, dtype=bool))


class SoftManipulator:
    """Квазистатическая модель манипулятора с пневматической динамикой давления"""

    def __init__(
        self,
        geometry: SegmentGeometry = SegmentGeometry(),
        chamber: ChamberModel = ChamberModel(),
        dynamics: PneumaticDynamics = PneumaticDynamics(),
        gap: Optional[GapModel] = None,
        max_iterations: int = 50,
        tolerance: float = 1e-6,
    ):
        self.geometry = geometry
        self.chamber = chamber
        self.dynamics = dynamics
        self.gap = gap
        self.max_iterations = max_iterations
        self.tolerance = tolerance
        self.logger = logging.getLogger(__name__)

    def frames_from_lengths(self, lengths: np.ndarray) -> Tuple[RigidTransform, RigidTransform, RigidTransform]:
        """Кадры площадок по шести длинам камер"""
        d_c = self.geometry.chamber_radius
        arc1 = chamber_lengths_to_arc(*lengths[:3], d_c, self.chamber.l_min, self.chamber.l_max)
        arc2 = chamber_lengths_to_arc(*lengths[3:], d_c, self.chamber.l_min, self.chamber.l_max)
        return chain_frames(arc1, arc2, self.geometry)

    def tool_transform(self, frames: Tuple[RigidTransform, RigidTransform, RigidTransform]) -> RigidTransform:
        """Кадр эффектора: от грани крепления камер потолочной площадки до грани концевой"""
        back = self.geometry.pad_offset.inverse()
        return back @ frames[2] @ back

    def tool_pose(self, frames: Tuple[RigidTransform, RigidTransform, RigidTransform]) -> Pose:
        return Pose.from_transform(self.tool_transform(frames))

    def _load_deflection(self, frames, load: LoadSpec) -> np.ndarray:
        """Удлинения камер от момента силы тяжести дистальной массы"""
        mass = load.distal_mass_kg
        if mass == 0.0:
            return np.zeros(N_CHAMBERS)

        force = mass * GRAVITY * np.asarray(load.gravity, dtype=float)
        tip = (frames[2] @ self.geometry.pad_offset.inverse()).translation
        angles = np.asarray(self.geometry.chamber_angles)
        arm = 1.5 * self.geometry.chamber_radius

        delta = np.empty(N_CHAMBERS)
        for seg, proximal in enumerate(frames[:2]):
            # момент, который должны уравновесить камеры сегмента
            torque = -np.cross(tip - proximal.translation, force)
            tx, ty, _ = proximal.rotation.T @ torque
            chamber_force = (ty * np.cos(angles) - tx * np.sin(angles)) / arm
            delta[3 * seg:3 * seg + 3] = chamber_force / self.chamber.stiffness
        return delta

    def pressures_to_lengths(
        self,
        q: Sequence[float],
        load: LoadSpec,
        offsets: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, bool]:
        """Неподвижная точка: длины камер при давлениях q под нагрузкой load"""
        act = ActuationVector.clamp(q, self.chamber)
        base = self.chamber.rest_length(act.pressures)
        if offsets is not None:
            base = base + offsets

        lengths = self.chamber.clamp_length(base)
        for _ in range(self.max_iterations):
            frames = self.frames_from_lengths(lengths)
            updated = self.chamber.clamp_length(base + self._load_deflection(frames, load))
            change = float(np.max(np.abs(updated - lengths)))
            lengths = updated
            if change < self.tolerance:
                return lengths, True

        self.logger.warning(
            f"Длины камер не сошлись за {self.max_iterations} итераций (q={act.pressures.tolist()})"
        )
        return lengths, False

    def _solve(self, q, load: LoadSpec, offsets, time: float = 0.0, saturated=None) -> Tuple[PlantState, Pose]:
        act = ActuationVector.clamp(q, self.chamber)
        lengths, converged = self.pressures_to_lengths(act.pressures, load, offsets)
        frames = self.frames_from_lengths(lengths)
        state = PlantState(
            pressures=act.pressures,
            lengths=lengths,
            frames=frames,
            load=load,
            time=time,
            converged=converged,
            saturated=act.saturated if saturated is None else saturated,
        )
        return state, self.tool_pose(frames)

    def forward(self, q: Sequence[float], load: LoadSpec = LoadSpec()) -> Tuple[PlantState, Pose]:
        """Идеальная модель: состояние и поза эффектора"""
        return self._solve(q, load, None)

    def real_forward(self, q: Sequence[float], load: LoadSpec, gap: GapModel) -> Tuple[PlantState, Pose]:
        """Возмущённая модель: длины камер получают смещения разрыва до расчёта позы"""
        return self._solve(q, load, gap.chamber_offset)

    def initial_state(self, load: LoadSpec = LoadSpec(), q: Optional[Sequence[float]] = None) -> PlantState:
        """Состояние покоя при заданных давлениях (по умолчанию нулевых)"""
        q = np.zeros(N_CHAMBERS) if q is None else q
        offsets = None if self.gap is None else self.gap.chamber_offset
        return self._solve(q, load, offsets)[0]

    def pose(self, state: PlantState) -> Pose:
        return self.tool_pose(state.frames)

    def step_dynamics(
        self,
        state: PlantState,
        u_cmd: Sequence[float],
        dt: Optional[float] = None,
        disturbance: float = 0.0,
    ) -> PlantState:
        """Один шаг запаздывания давления к команде u_cmd с последующим квазистатическим пересчётом"""
        dt = self.dynamics.dt if dt is None else dt
        if dt <= 0:
            raise DomainError(f"Шаг интегрирования должен быть положительным: {dt}")

        command = ActuationVector.clamp(u_cmd, self.chamber)
        tau = self.dynamics.time_constant
        # постоянное возмущение d (кПа/с) смещает установившееся давление на tau·d
        target = command.pressures + tau * disturbance
        if self.dynamics.integrator == "exact":
            pressures = target + (state.pressures - target) * math.exp(-dt / tau)
        else:
            pressures = state.pressures + dt * (target - state.pressures) / tau

        offsets = None if self.gap is None else self.gap.chamber_offset
        new_state, _ = self._solve(pressures, state.load, offsets, state.time + dt, command.saturated)
        return new_state
