"""
Полносвязная сеть на numpy: прямой проход, обратное распространение, Adam, сериализация весов
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from sorosense.utils.errors import DomainError, IncompatibleWeightsError, TrainingError, WeightFileError

logger = logging.getLogger(__name__)

WEIGHTS_VERSION = 1
ACTIVATION = "tanh"


@dataclass
class Normalizer:
    """Z-нормализация признаков; статистики берутся только с обучающей выборки"""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "Normalizer":
        data = np.asarray(data, dtype=float)
        std = data.std(axis=0)
        # постоянный признак не масштабируется
        std = np.where(std < 1e-9, 1.0, std)
        return cls(data.mean(axis=0), std)

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(np.zeros(dim), np.ones(dim))

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return z * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


@dataclass(frozen=True)
class TrainConfig:
    """Параметры обучения"""

    learning_rate: float = 0.01
    batch_size: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 2000
    patience: int = 50
    seed: int = 0
    log_every: int = 50

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise DomainError(f"Скорость обучения должна быть положительной: {self.learning_rate}")
        if self.batch_size < 1:
            raise DomainError(f"Размер батча должен быть не меньше 1: {self.batch_size}")
        if self.max_epochs < 0 or self.patience < 1:
            raise DomainError("max_epochs >= 0 и patience >= 1")


@dataclass
class TrainHistory:
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


class MLP:
    """Сеть: скрытые слои tanh, линейный выход, нормализаторы входа и выхода"""

    def __init__(
        self,
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        normalizer_in: Optional[Normalizer] = None,
        normalizer_out: Optional[Normalizer] = None,
    ):
        if len(weights) == 0 or len(weights) != len(biases):
            raise DomainError("Нужен хотя бы один слой и по смещению на каждый слой")
        self.weights = [np.array(w, dtype=float) for w in weights]
        self.biases = [np.array(b, dtype=float) for b in biases]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise DomainError(f"Слой {k}: несогласованные размеры {w.shape} и {b.shape}")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise DomainError(f"Слой {k}: вход {w.shape[1]} не совпадает с выходом предыдущего слоя")
        self.normalizer_in = normalizer_in or Normalizer.identity(self.input_dim)
        self.normalizer_out = normalizer_out or Normalizer.identity(self.output_dim)

    @classmethod
    def create(cls, sizes: Sequence[int], seed: int = 0) -> "MLP":
        """Инициализация U(±sqrt(6/(fan_in+fan_out))), нулевые смещения"""
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise DomainError(f"Некорректная архитектура: {sizes}")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def sizes(self) -> List[int]:
        return [self.input_dim] + [w.shape[0] for w in self.weights]

    def copy(self) -> "MLP":
        return MLP(
            self.weights,
            self.biases,
            Normalizer(self.normalizer_in.mean.copy(), self.normalizer_in.std.copy()),
            Normalizer(self.normalizer_out.mean.copy(), self.normalizer_out.std.copy()),
        )

    def _check_input(self, x) -> Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.input_dim:
            raise DomainError(f"Ожидается вход размерности {self.input_dim}, получено {x.shape[1]}")
        return x, single

    def _activations(self, z: np.ndarray) -> List[np.ndarray]:
        """Выходы всех слоёв в нормализованном пространстве, начиная со входа"""
        outputs = [z]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = outputs[-1] @ w.T + b
            outputs.append(a if k == last else np.tanh(a))
        return outputs

    def forward(self, x) -> np.ndarray:
        x, single = self._check_input(x)
        y = self.normalizer_out.denormalize(self._activations(self.normalizer_in.normalize(x))[-1])
        return y[0] if single else y

    __call__ = forward

    def _backward(self, outputs: List[np.ndarray], grad: np.ndarray):
        """Обратный проход: градиенты по весам, смещениям и нормализованному входу"""
        grad_w, grad_b = [], []
        last = len(self.weights) - 1
        for k in range(last, -1, -1):
            if k != last:
                grad = grad * (1.0 - outputs[k + 1] ** 2)
            grad_w.append(grad.T @ outputs[k])
            grad_b.append(grad.sum(axis=0))
            grad = grad @ self.weights[k]
        return grad_w[::-1], grad_b[::-1], grad

    def input_gradient(self, x, residual) -> np.ndarray:
        """Градиент residualᵀ·f(x) по сырому входу x"""
        x, single = self._check_input(x)
        residual = np.atleast_2d(np.asarray(residual, dtype=float))
        if residual.shape[1] != self.output_dim:
            raise DomainError(f"Ожидается невязка размерности {self.output_dim}, получено {residual.shape[1]}")

        outputs = self._activations(self.normalizer_in.normalize(x))
        _, _, grad = self._backward(outputs, residual * self.normalizer_out.std)
        grad = grad / self.normalizer_in.std
        return grad[0] if single else grad

    def to_dict(self) -> dict:
        return {
            "version": WEIGHTS_VERSION,
            "activation": ACTIVATION,
            "layers": [
                {"rows": w.shape[0], "cols": w.shape[1], "weights": w.ravel().tolist(), "bias": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
            "normalizer_in": self.normalizer_in.to_dict(),
            "normalizer_out": self.normalizer_out.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MLP":
        if data.get("version") != WEIGHTS_VERSION:
            raise IncompatibleWeightsError(
                f"Версия файла весов {data.get('version')!r} не поддерживается (ожидается {WEIGHTS_VERSION})"
            )
        if data.get("activation") != ACTIVATION:
            raise IncompatibleWeightsError(f"Неподдерживаемая активация: {data.get('activation')!r}")
        try:
            weights, biases = [], []
            for layer in data["layers"]:
                weights.append(np.array(layer["weights"], dtype=float).reshape(layer["rows"], layer["cols"]))
                biases.append(np.array(layer["bias"], dtype=float))
            norm_in = Normalizer(np.array(data["normalizer_in"]["mean"]), np.array(data["normalizer_in"]["std"]))
            norm_out = Normalizer(np.array(data["normalizer_out"]["mean"]), np.array(data["normalizer_out"]["std"]))
            return cls(weights, biases, norm_in, norm_out)
        except (KeyError, TypeError, ValueError) as e:
            raise WeightFileError(f"Некорректная структура файла весов: {e}") from e

    def save(self, path: Union[str, Path]) -> None:
        # json пишет float кратчайшим точным представлением
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "MLP":
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise WeightFileError(f"{path}: ошибка разбора в строке {e.lineno}, столбце {e.colno}: {e.msg}") from e
        if not isinstance(data, dict):
            raise WeightFileError(f"{path}: ожидается JSON-объект")
        return cls.from_dict(data)


def _mse(net: MLP, z_in: np.ndarray, z_out: np.ndarray) -> float:
    return float(np.mean((net._activations(z_in)[-1] - z_out) ** 2))


def train(
    net: MLP,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    on_epoch: Optional[Callable[[int, float, float], None]] = None,
) -> Tuple[MLP, TrainHistory]:
    """Adam по MSE на нормализованных целях; возвращает снимок с лучшей валидацией.
    on_epoch(epoch, train_loss, val_loss) вызывается после каждой эпохи"""
    history = TrainHistory()
    if cfg.max_epochs == 0:
        return net, history

    x_train, y_train = np.asarray(x_train, float), np.asarray(y_train, float)
    x_val, y_val = np.asarray(x_val, float), np.asarray(y_val, float)
    if len(x_train) == 0 or len(x_val) == 0:
        raise DomainError("Обучающая и валидационная выборки не должны быть пустыми")
    if x_train.shape[1] != net.input_dim or y_train.shape[1] != net.output_dim:
        raise DomainError(f"Размерности выборки не совпадают с сетью {net.sizes}")
    if len(x_train) != len(y_train) or len(x_val) != len(y_val):
        raise DomainError("Число входов и целей не совпадает")

    net = net.copy()
    net.normalizer_in = Normalizer.fit(x_train)
    net.normalizer_out = Normalizer.fit(y_train)
    z_train, t_train = net.normalizer_in.normalize(x_train), net.normalizer_out.normalize(y_train)
    z_val, t_val = net.normalizer_in.normalize(x_val), net.normalizer_out.normalize(y_val)

    params = net.weights + net.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.seed)
    step = 0

    best, best_val, wait = net.copy(), math.inf, 0
    n = len(z_train)
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        for batch, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            outputs = net._activations(z_train[idx])
            error = outputs[-1] - t_train[idx]
            loss = float(np.mean(error ** 2))
            if not math.isfinite(loss):
                raise TrainingError("Функция потерь не конечна", epoch, batch)

            grad_w, grad_b, _ = net._backward(outputs, 2.0 * error / error.size)
            step += 1
            for p, g, m_k, v_k in zip(params, grad_w + grad_b, m, v):
                m_k *= cfg.beta1
                m_k += (1.0 - cfg.beta1) * g
                v_k *= cfg.beta2
                v_k += (1.0 - cfg.beta2) * g * g
                m_hat = m_k / (1.0 - cfg.beta1 ** step)
                v_hat = v_k / (1.0 - cfg.beta2 ** step)
                p -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)

        train_loss, val_loss = _mse(net, z_train, t_train), _mse(net, z_val, t_val)
        if not math.isfinite(val_loss):
            raise TrainingError("Потери на валидации не конечны", epoch)
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
        if on_epoch is not None:
            on_epoch(epoch, train_loss, val_loss)

        if cfg.log_every and epoch % cfg.log_every == 0:
            logger.info(f"Эпоха {epoch}: train={train_loss:.6g} val={val_loss:.6g}")

        if val_loss < best_val:
            best, best_val, wait = net.copy(), val_loss, 0
            history.best_epoch = epoch
        else:
            wait += 1
            if wait >= cfg.patience:
                history.stopped_early = True
                logger.info(f"Ранняя остановка на эпохе {epoch}, лучшая эпоха {history.best_epoch}")
                break

    return best, history
