"""
Внутренний контур: якобиан сенсоры/давления, демпфированный МНК-шаг и ADRC-слежение за давлением
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve

from sorosense.plant.manipulator import ChamberModel, PlantState, SoftManipulator
from sorosense.utils.errors import ControlError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InnerConfig:
    """Параметры внутреннего контура и ADRC"""

    mu: float = 1.0
    fd_step: float = 1.0  # кПа
    broyden_threshold: float = 0.5  # кПа
    stall_improvement: float = 1e-3
    stall_window: int = 5
    max_inner: int = 30
    omega_o: float = 20.0  # рад/с
    k_p: float = 5.0
    b0: Optional[float] = None  # по умолчанию 1/τ_p
    dt: float = 0.01
    control_period: float = 0.2
    td_rate: float = 0.0  # 0 - без дифференциатора-трекера

    def __post_init__(self):
        if self.mu <= 0 or self.omega_o <= 0 or self.dt <= 0:
            raise DomainError("mu, omega_o и dt должны быть положительными")
        if self.fd_step <= 0 or self.control_period < self.dt:
            raise DomainError("Шаг дифференцирования положителен, период управления не меньше dt")
        if self.stall_window < 1 or self.max_inner < 1 or self.td_rate < 0:
            raise DomainError("stall_window и max_inner >= 1, td_rate >= 0")

    def input_gain(self, time_constant: float) -> float:
        return 1.0 / time_constant if self.b0 is None else self.b0


def estimate_jacobian(
    read: Callable[[np.ndarray], np.ndarray],
    q: np.ndarray,
    step: float = 1.0,
    chamber: ChamberModel = ChamberModel(),
) -> np.ndarray:
    """Центральные разности ∂s/∂q по чтениям read(q) без шума"""
    q = np.asarray(q, dtype=float)
    base = np.asarray(read(q), dtype=float)
    jacobian = np.zeros((base.size, q.size))
    for j in range(q.size):
        plus, minus = q.copy(), q.copy()
        plus[j] = min(q[j] + step, chamber.p_max)
        minus[j] = max(q[j] - step, chamber.p_min)
        span = plus[j] - minus[j]
        if span <= 0:
            logger.debug(f"Камера {j}: вырожденный шаг разности, столбец пропущен")
            continue
        jacobian[:, j] = (np.asarray(read(plus)) - np.asarray(read(minus))) / span
    return jacobian


def broyden_update(jacobian: np.ndarray, dq: np.ndarray, ds: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Ранг-1 поправка J ← J + ((Δs - J·Δq)·Δqᵀ)/(Δqᵀ·Δq) при ||Δq|| > threshold"""
    dq, ds = np.asarray(dq, dtype=float), np.asarray(ds, dtype=float)
    norm2 = float(dq @ dq)
    if np.sqrt(norm2) <= threshold or not np.isfinite(norm2):
        return jacobian
    return jacobian + np.outer(ds - jacobian @ dq, dq) / norm2


def inner_step(
    s_ref: np.ndarray,
    s_curr: np.ndarray,
    q_curr: np.ndarray,
    jacobian: np.ndarray,
    mu: float = 1.0,
    chamber: ChamberModel = ChamberModel(),
) -> Tuple[np.ndarray, np.ndarray]:
    """Δq = (JᵀJ + μI)⁻¹·Jᵀ·(s_ref - s_curr); возвращает ограниченное q_ref и флаги насыщения"""
    jacobian = np.atleast_2d(np.asarray(jacobian, dtype=float))
    error = np.atleast_1d(np.asarray(s_ref, dtype=float) - np.asarray(s_curr, dtype=float))
    normal = jacobian.T @ jacobian + mu * np.eye(jacobian.shape[1])
    try:
        delta = solve(normal, jacobian.T @ error, assume_a="pos")
    except LinAlgError as e:
        raise ControlError(f"Не удалось решить нормальные уравнения: {e}") from e
    if not np.all(np.isfinite(delta)):
        raise ControlError("Приращение давлений не конечно")

    target = np.asarray(q_curr, dtype=float) + delta
    q_ref = np.clip(target, chamber.p_min, chamber.p_max)
    return q_ref, q_ref != target


@dataclass
class ADRCState:
    """Оценки ESO по камерам: давление z1 (кПа) и суммарное возмущение z2 (кПа/с)"""

    z1: np.ndarray
    z2: np.ndarray
    r1: Optional[np.ndarray] = None
    r2: Optional[np.ndarray] = None

    @classmethod
    def at_rest(cls, pressures: np.ndarray, b0: float) -> "ADRCState":
        """Наблюдатель в равновесии: возмущение компенсирует утечку давления -b0·p"""
        pressures = np.array(pressures, dtype=float)
        return cls(pressures.copy(), -b0 * pressures)


@dataclass
class TrackResult:
    state: PlantState
    adrc: ADRCState
    times: List[float] = field(default_factory=list)
    pressures: List[np.ndarray] = field(default_factory=list)
    commands: List[np.ndarray] = field(default_factory=list)
    saturated: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=bool))
    diverged: bool = False


def adrc_track(
    q_ref: np.ndarray,
    plant: SoftManipulator,
    state: PlantState,
    adrc: ADRCState,
    cfg: InnerConfig = InnerConfig(),
    duration: Optional[float] = None,
    disturbance: float = 0.0,
) -> TrackResult:
    """
    Слежение давлений за q_ref линейным ADRC на время duration

    ESO: e = p - z1; z1 += dt·(z2 + b0·u + β1·e); z2 += dt·β2·e, где β1 = 2ω_o, β2 = ω_o².
    Управление u = (k_p·(r - z1) - z2)/b0 ограничивается диапазоном давлений.
    """
    if cfg.dt > plant.dynamics.dt + 1e-12:
        raise DomainError(f"Шаг ADRC {cfg.dt} больше шага манипулятора {plant.dynamics.dt}")

    duration = cfg.control_period if duration is None else duration
    chamber = plant.chamber
    b0 = cfg.input_gain(plant.dynamics.time_constant)
    beta1, beta2 = 2.0 * cfg.omega_o, cfg.omega_o ** 2
    reference = np.clip(np.asarray(q_ref, dtype=float), chamber.p_min, chamber.p_max)

    z1, z2 = adrc.z1.copy(), adrc.z2.copy()
    r1 = state.pressures.copy() if adrc.r1 is None else adrc.r1.copy()
    r2 = np.zeros_like(r1) if adrc.r2 is None else adrc.r2.copy()

    result = TrackResult(state, adrc)
    growing, previous = 0, np.inf
    for _ in range(int(round(duration / cfg.dt))):
        if cfg.td_rate > 0:
            # переходный профиль второго порядка к опорному давлению
            r2 = r2 + cfg.dt * (-2.0 * cfg.td_rate * r2 - cfg.td_rate ** 2 * (r1 - reference))
            r1 = r1 + cfg.dt * r2
            r = r1
        else:
            r = reference

        p = state.pressures
        error = p - z1
        raw = (cfg.k_p * (r - z1) - z2) / b0
        u = np.clip(raw, chamber.p_min, chamber.p_max)
        result.saturated = result.saturated | (u != raw)

        z1 = z1 + cfg.dt * (z2 + b0 * u + beta1 * error)
        z2 = z2 + cfg.dt * beta2 * error
        state = plant.step_dynamics(state, u, cfg.dt, disturbance)

        result.times.append(state.time)
        result.pressures.append(state.pressures.copy())
        result.commands.append(u)

        gap = float(np.max(np.abs(z1 - state.pressures)))
        if not np.isfinite(gap):
            result.diverged = True
            break
        growing = growing + 1 if gap > previous and gap > 1e-6 else 0
        previous = gap
        if growing * cfg.dt >= 1.0:
            logger.warning("Наблюдатель ADRC расходится, слежение прервано")
            result.diverged = True
            break

    result.state = state
    result.adrc = ADRCState(z1, z2, r1 if cfg.td_rate > 0 else None, r2 if cfg.td_rate > 0 else None)
    if result.saturated.any():
        logger.debug(f"Насыщение команд ADRC: {np.flatnonzero(result.saturated).tolist()}")
    return result
