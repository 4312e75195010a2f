"""
Модуль управления конфигурацией SoroSense
"""
import dataclasses
import hashlib
import json
import logging
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv

from sorosense import __version__
from sorosense.control.inner import InnerConfig
from sorosense.control.solver import GDConfig
from sorosense.neuralnet.mlp import TrainConfig
from sorosense.utils.errors import ConfigError, DomainError

ENV_OUT_DIR = "SOROSENSE_OUT_DIR"
ENV_SEED = "SOROSENSE_SEED"
ENV_LOG_LEVEL = "SOROSENSE_LOG_LEVEL"


@dataclass(frozen=True)
class PlantConfig:
    chamber_radius: float = 60.0
    spring_radius: float = 55.0
    pad_half_thickness: float = 10.0
    mount_offset_deg: float = 40.0
    l_min: float = 70.0
    l_max: float = 220.0
    p_min: float = -40.0
    p_max: float = 40.0
    stiffness: float = 2.0
    time_constant: float = 0.3
    dt: float = 0.01
    integrator: str = "exact"
    structure_g: float = 450.0
    payload_g: float = 0.0
    gap_seed: int = 7


@dataclass(frozen=True)
class SensingConfig:
    spring_sigma: float = 0.2
    imu_sigma: float = 0.3
    quantization: float = 0.4
    capacitance: float = 1e-9
    compensation: float = 10e-6
    calibration: Optional[str] = None


@dataclass(frozen=True)
class TrainingConfig:
    smap: TrainConfig = TrainConfig()
    s2r: TrainConfig = TrainConfig()
    smap_hidden: Tuple[int, ...] = (120, 120)
    s2r_hidden: Tuple[int, ...] = (45,)
    s2r_widths: Tuple[int, ...] = (5, 15, 45, 90)


@dataclass(frozen=True)
class DataConfig:
    sim_samples: int = 20000
    sim_grid_levels: int = 3
    real_levels: int = 3
    load_samples: int = 200
    loads: Tuple[float, ...] = (0.0, 35.0, 115.0, 270.0, 500.0)
    speeds: Tuple[float, ...] = (20.0, 40.0, 80.0)


@dataclass(frozen=True)
class ControlConfig:
    gd: GDConfig = GDConfig()
    inner: InnerConfig = InnerConfig()
    max_outer: int = 10
    path_points: int = 60
    path_radius: float = 80.0
    path_z: float = 290.0


@dataclass(frozen=True)
class PathsConfig:
    """Пути относительно out_dir, если не абсолютные"""

    out_dir: str = "runs"
    models_dir: str = "models"
    sim_dataset: str = "data/sim.csv"
    real_dataset: str = "data/real.csv"


@dataclass(frozen=True)
class RunConfig:
    plant: PlantConfig = PlantConfig()
    sensing: SensingConfig = SensingConfig()
    training: TrainingConfig = TrainingConfig()
    data: DataConfig = DataConfig()
    control: ControlConfig = ControlConfig()
    paths: PathsConfig = PathsConfig()
    seed: int = 0


def _build(cls, data: Dict[str, Any], prefix: str = ""):
    """Собрать дерево dataclass из словаря, отвергая неизвестные ключи"""
    if not isinstance(data, dict):
        raise ConfigError(f"Ожидается объект для '{prefix.rstrip('.') or 'корня'}'")

    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"Неизвестный ключ конфигурации: {prefix}{key}")
        kind = hints[key]
        if dataclasses.is_dataclass(kind):
            kwargs[key] = _build(kind, value, f"{prefix}{key}.")
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (DomainError, TypeError) as e:
        raise ConfigError(f"Некорректный блок '{prefix.rstrip('.') or 'корень'}': {e}") from e


def run_config_from_dict(data: Dict[str, Any]) -> RunConfig:
    return _build(RunConfig, data)


class Config:
    """Класс для управления конфигурацией запуска"""

    def __init__(
        self,
        config_file: Optional[Union[str, Path]] = None,
        out_dir: Optional[str] = None,
        seed: Optional[int] = None,
    ):
        self.config_file = Path(config_file) if config_file else None
        self.logger = logging.getLogger(__name__)

        # Загружаем переменные окружения
        env_file = (self.config_file.parent if self.config_file else Path.cwd()) / ".env"
        if env_file.exists():
            load_dotenv(env_file)

        self.run = self._load_config()
        self.run = self._apply_overrides(out_dir, seed)
        self._check_files()

    def _load_config(self) -> RunConfig:
        """Загрузить конфигурацию из файла"""
        if self.config_file is None:
            return RunConfig()
        if not self.config_file.exists():
            raise ConfigError(f"Файл конфигурации не найден: {self.config_file}")
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{self.config_file}: строка {e.lineno}, столбец {e.colno}: {e.msg}") from e
        return run_config_from_dict(data)

    def _apply_overrides(self, out_dir: Optional[str], seed: Optional[int]) -> RunConfig:
        """Флаги командной строки важнее окружения, окружение важнее файла"""
        run = self.run
        out_dir = out_dir or os.getenv(ENV_OUT_DIR)
        if out_dir:
            run = dataclasses.replace(run, paths=dataclasses.replace(run.paths, out_dir=out_dir))

        if seed is None and os.getenv(ENV_SEED):
            try:
                seed = int(os.getenv(ENV_SEED))
            except ValueError as e:
                raise ConfigError(f"{ENV_SEED} должна быть целым числом: {os.getenv(ENV_SEED)!r}") from e
        if seed is not None:
            run = dataclasses.replace(run, seed=int(seed))
        return run

    def _check_files(self):
        calibration = self.run.sensing.calibration
        if calibration and not self.resolve(calibration).exists():
            raise ConfigError(f"Файл кривой калибровки не найден: {calibration}")

    @property
    def out_dir(self) -> Path:
        return Path(self.run.paths.out_dir)

    @property
    def log_level(self) -> str:
        return os.getenv(ENV_LOG_LEVEL, "INFO").upper()

    def resolve(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        return path if path.is_absolute() else self.out_dir / path

    def get(self, key: str, default: Any = None) -> Any:
        """Получить значение по пути через точку, например 'control.gd.tau'"""
        node: Any = self.run
        for part in key.split("."):
            if not dataclasses.is_dataclass(node) or not hasattr(node, part):
                return default
            node = getattr(node, part)
        return node

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self.run)

    @property
    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def header_comment(self) -> str:
        return f"config={self.hash} seed={self.run.seed} version={__version__}"

    def save_config(self, path: Union[str, Path]):
        """Сохранить итоговую конфигурацию в файл"""
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=4, ensure_ascii=False)

    def ensure_directories(self) -> List[Path]:
        """Убедиться что все необходимые директории существуют"""
        paths = self.run.paths
        directories = [
            self.out_dir,
            self.out_dir / "logs",
            self.resolve(paths.models_dir),
            self.resolve(paths.sim_dataset).parent,
            self.resolve(paths.real_dataset).parent,
        ]
        for directory in directories:
            directory.mkdir(parents=True, exist_ok=True)
        return directories
