#!/usr/bin/env python3
"""
SoroSense - проприоцепция и управление мягким манипулятором
Главный файл приложения
"""
import dataclasses
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

import click
import numpy as np
import pandas as pd

from sorosense.control.loop import ClosedLoopController, follow_path, pick_and_place
from sorosense.control.paths import load_waypoints, reachable_path, save_waypoints
from sorosense.kinematics.geometry import Pose, SegmentGeometry
from sorosense.neuralnet.mlp import TrainConfig, TrainHistory
from sorosense.plant.manipulator import ChamberModel, GapModel, LoadSpec, PneumaticDynamics, SoftManipulator
from sorosense.proprioception.dataset import Dataset, gen_load_dataset, gen_real_dataset, gen_sim_dataset
from sorosense.proprioception.predictor import (
    CHANNELS,
    EvalReport,
    PosePredictor,
    ablation,
    evaluate,
    load_robustness,
    train_s2r,
    train_smap,
)
from sorosense.proprioception.studies import depth_study, s2r_width_study, speed_robustness
from sorosense.sensing.calibration import CalibrationCurve, CircuitParams, fit_calibration, load_calibration_samples
from sorosense.sensing.sensors import SensorNoise, SensorSuite
from sorosense.ui.cli_interface import CLIInterface
from sorosense.utils.config import Config
from sorosense.utils.errors import (
    CalibrationError,
    ConfigError,
    ConfigurationError,
    DatasetError,
    SoroSenseError,
    WeightFileError,
)
from sorosense.utils.report import emit_bars, emit_lines, emit_trajectory, write_table

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ACCEPTANCE = 2
EXIT_NOT_CONVERGED = 3
EXIT_IO = 4

METRIC_COLUMNS = ["translation_mm", "yaw_deg", "pitch_deg", "roll_deg"]


class AcceptanceFailure(SoroSenseError):
    """Свойство приёмки не выполнено"""


class NotConverged(SoroSenseError):
    """Контур управления не достиг цели"""


class SoroSense:
    """Основной класс приложения SoroSense"""

    def __init__(self, config: Config, ui: Optional[CLIInterface] = None):
        self.config = config
        self.run_config = config.run
        self.ui = ui or CLIInterface()

        # Настройка логирования
        self._setup_logging()

    def _setup_logging(self):
        """Настройка логирования"""
        self.config.ensure_directories()
        log_dir = self.config.out_dir / "logs"
        log_file = log_dir / f"sorosense_{datetime.now().strftime('%Y%m%d')}.log"

        logging.basicConfig(
            level=getattr(logging, self.config.log_level, logging.INFO),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            handlers=[
                logging.FileHandler(log_file, encoding='utf-8'),
                logging.StreamHandler()
            ],
            force=True,
        )

        self.logger = logging.getLogger(__name__)

    # --- сборка модели из конфигурации ---

    @property
    def header(self) -> str:
        return self.config.header_comment()

    def _geometry(self) -> SegmentGeometry:
        p = self.run_config.plant
        return SegmentGeometry(p.chamber_radius, p.spring_radius, p.pad_half_thickness, p.mount_offset_deg)

    def _chamber(self) -> ChamberModel:
        p = self.run_config.plant
        return ChamberModel(p.l_min, p.l_max, p.p_min, p.p_max, p.stiffness)

    def _gap(self) -> GapModel:
        return GapModel.from_seed(self.run_config.plant.gap_seed)

    def _plant(self, gap: Optional[GapModel] = None) -> SoftManipulator:
        p = self.run_config.plant
        dynamics = PneumaticDynamics(p.time_constant, p.dt, p.integrator)
        return SoftManipulator(self._geometry(), self._chamber(), dynamics, gap)

    def _load(self, payload_g: Optional[float] = None) -> LoadSpec:
        p = self.run_config.plant
        return LoadSpec(p.payload_g if payload_g is None else payload_g, p.structure_g)

    def _curve(self) -> CalibrationCurve:
        source = self.run_config.sensing.calibration
        return CalibrationCurve.load(self.config.resolve(source)) if source else CalibrationCurve.simulation_default()

    def _suite(self, gap: Optional[GapModel] = None, noiseless: bool = False) -> SensorSuite:
        s = self.run_config.sensing
        noise = SensorNoise.noiseless() if noiseless else SensorNoise(
            s.spring_sigma, s.imu_sigma, s.quantization, self.run_config.seed
        )
        return SensorSuite(self._geometry(), self._curve(), CircuitParams(s.capacitance, s.compensation), noise, gap)

    def _train_config(self, cfg: TrainConfig) -> TrainConfig:
        return dataclasses.replace(cfg, seed=self.run_config.seed)

    def _dataset(self, kind: str) -> Dataset:
        paths = self.run_config.paths
        path = self.config.resolve(paths.sim_dataset if kind == "sim" else paths.real_dataset)
        if not path.exists():
            raise DatasetError(f"Датасет не найден: {path} (сначала выполните gen-data --kind {kind})")
        return Dataset.from_csv(path)

    @property
    def models_dir(self) -> Path:
        return self.config.resolve(self.run_config.paths.models_dir)

    def _predictor(self, channels: str = "fused", s2r: bool = True) -> PosePredictor:
        if not (self.models_dir / f"smap_{channels}.json").exists():
            raise WeightFileError(f"Модель не найдена в {self.models_dir} (сначала выполните train --which smap)")
        return PosePredictor.load(self.models_dir, channels, s2r)

    def _report_path(self, name: str) -> Path:
        path = self.config.out_dir / "reports" / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    # --- команды ---

    def calibrate(self, input_csv: Path, output: Path) -> int:
        inductance, length = load_calibration_samples(input_csv)
        curve, rms = fit_calibration(inductance, length)
        curve.save(output, rms)

        frame = pd.DataFrame({
            "inductance": inductance,
            "length_mm": length,
            "fitted_mm": curve(inductance),
        })
        frame["residual_mm"] = frame["length_mm"] - frame["fitted_mm"]
        write_table(frame, self._report_path("calibration_residuals.csv"), self.header)

        self.ui.show_summary("Калибровка", {
            "точек": len(inductance),
            "коэффициенты": ", ".join(f"{c:.6g}" for c in curve.coefficients),
            "СКО остатков, мм": rms,
        })
        if not curve.is_monotone:
            self.ui.show_warning("Кривая немонотонна на диапазоне калибровки, обращение невозможно")
        self.ui.show_success(f"Кривая сохранена: {output}")
        return EXIT_OK

    def gen_data(self, kind: str, n: Optional[int] = None, levels: Optional[int] = None) -> int:
        data_cfg, seed = self.run_config.data, self.run_config.seed
        if kind == "sim":
            n = n or data_cfg.sim_samples
            levels = data_cfg.sim_grid_levels if levels is None else levels
            total = n + (levels ** 6 if levels else 0)
            with self.ui.progress("Генерация датасета sim", total) as advance:
                dataset = gen_sim_dataset(
                    self._plant(), self._suite(noiseless=True), n, seed, self._load(), levels, advance
                )
            path = self.config.resolve(self.run_config.paths.sim_dataset)
        else:
            gap = self._gap()
            levels = levels or data_cfg.real_levels
            with self.ui.progress("Генерация датасета virtual-real", levels ** 6) as advance:
                dataset = gen_real_dataset(
                    self._plant(gap), gap, self._suite(gap), levels, seed, self._load(), advance
                )
            path = self.config.resolve(self.run_config.paths.real_dataset)

        path.parent.mkdir(parents=True, exist_ok=True)
        dataset.to_csv(path, self.header)
        lo, hi = dataset.workspace_extent
        self.ui.show_summary(f"Датасет {dataset.provenance}", {
            "точек": len(dataset),
            "x, мм": f"[{lo[0]:.1f}, {hi[0]:.1f}]",
            "y, мм": f"[{lo[1]:.1f}, {hi[1]:.1f}]",
            "z, мм": f"[{lo[2]:.1f}, {hi[2]:.1f}]",
            "диагональ, мм": dataset.workspace_diagonal,
        })
        self.ui.show_success(f"Датасет записан: {path}")
        return EXIT_OK

    def _emit_history(self, history: TrainHistory, name: str):
        frame = pd.DataFrame({
            "epoch": np.arange(len(history.train_loss)),
            "train_loss": history.train_loss,
            "val_loss": history.val_loss,
        })
        emit_lines(frame, "epoch", ["train_loss", "val_loss"], self._report_path(name), name, True, self.header)

    def train(self, which: str) -> int:
        training = self.run_config.training
        self.models_dir.mkdir(parents=True, exist_ok=True)
        if which == "smap":
            cfg = self._train_config(training.smap)
            with self.ui.progress("Обучение N_smap", cfg.max_epochs) as advance:
                predictor, history = train_smap(
                    self._dataset("sim"), cfg, training.smap_hidden, on_epoch=lambda *_: advance()
                )
            predictor.save(self.models_dir)
            self._emit_history(history, "history_smap")
            self.ui.show_success(f"N_smap {predictor.smap.sizes} сохранена в {self.models_dir}")
        else:
            predictor = self._predictor(s2r=False)
            cfg = self._train_config(training.s2r)
            with self.ui.progress("Обучение N_s2r", 2 * cfg.max_epochs) as advance:
                corrected, (history_t, history_r) = train_s2r(
                    self._dataset("real"), predictor, cfg, training.s2r_hidden, lambda *_: advance()
                )
            corrected.save(self.models_dir)
            self._emit_history(history_t, "history_s2r_t")
            self._emit_history(history_r, "history_s2r_r")
            self.ui.show_success(
                f"N_s2r {corrected.s2r_t.sizes} и {corrected.s2r_r.sizes} сохранены в {self.models_dir}"
            )
        return EXIT_OK

    def _metrics_frame(self, label: str, reports: Dict[object, EvalReport]) -> pd.DataFrame:
        rows = [{label: key, **report.as_row()} for key, report in reports.items()]
        return pd.DataFrame(rows, columns=[label, "n", *METRIC_COLUMNS])

    def _emit_metrics(self, label: str, reports: Dict[object, EvalReport], name: str, title: str) -> pd.DataFrame:
        frame = self._metrics_frame(label, reports)
        emit_bars(frame, label, METRIC_COLUMNS, self._report_path(name), title, self.header)
        self.ui.show_table(title, frame)
        return frame

    def evaluate(self, mode: str) -> int:
        failures: List[str] = []
        training = self.run_config.training

        if mode == "standard":
            sim = self._dataset("sim")
            predictor = self._predictor()
            raw = PosePredictor(predictor.smap)
            reports = {"sim": evaluate(raw, sim.splits()[2])}
            limit = 0.01 * sim.workspace_diagonal
            if reports["sim"].translation > limit:
                failures.append(f"ошибка на sim {reports['sim'].translation:.3f} мм > 1% диагонали ({limit:.3f} мм)")

            real_path = self.config.resolve(self.run_config.paths.real_dataset)
            if not real_path.exists():
                self.ui.show_info(f"Датасет virtual-real не найден ({real_path}), оценка только на sim")
            else:
                real_test = self._dataset("real").splits()[2]
                reports["real-uncorrected"] = evaluate(raw, real_test)
                if predictor.s2r_enabled:
                    reports["real-corrected"] = evaluate(predictor, real_test)
                    ratio = reports["real-corrected"].translation / reports["real-uncorrected"].translation
                    if ratio > 0.5:
                        failures.append(f"поправка sim-to-real уменьшает ошибку лишь в {1 / ratio:.2f} раза")
            self._emit_metrics("variant", reports, "eval_standard", "Точность проприоцепции")

        elif mode == "ablation":
            sim = self._dataset("sim")
            cfg = self._train_config(training.smap)
            reports = {m: ablation(sim, m, cfg, training.smap_hidden) for m in CHANNELS}
            self._emit_metrics("mode", reports, "eval_ablation", "Сравнение модальностей")
            fused, spring, imu = reports["fused"], reports["spring-only"], reports["imu-only"]
            best_single = min(spring.translation, imu.translation)
            if fused.translation > 0.9 * best_single:
                failures.append("слияние не лучше одиночной модальности на 10%")
            wins = sum(getattr(imu, a) <= getattr(spring, a) for a in ("yaw", "pitch", "roll"))
            if wins < 2:
                failures.append(f"IMU лучше пружин только по {wins} углам из 3")

        elif mode == "loads":
            gap = self._gap()
            loads = self.run_config.data.loads
            reports = load_robustness(
                self._predictor(), self._plant(gap), gap, self._suite(gap), loads,
                self.run_config.data.load_samples, self.run_config.seed,
            )
            self._emit_metrics("load_g", reports, "eval_loads", "Ошибка при нагрузках")
            baseline = reports.get(0.0)
            if baseline is not None:
                for load, report in reports.items():
                    if report.translation > 1.5 * baseline.translation:
                        failures.append(f"нагрузка {load} г: ошибка {report.translation:.3f} мм > 1.5× базовой")

        elif mode == "s2r-width":
            reports = s2r_width_study(
                self._dataset("real"), self._predictor(s2r=False), training.s2r_widths,
                self._train_config(training.s2r),
            )
            self._emit_metrics("width", reports, "eval_s2r_width", "Ширина сетей sim-to-real")

        elif mode == "depth":
            reports = depth_study(self._dataset("sim"), cfg=self._train_config(training.smap))
            reports = {"+".join(map(str, k)): v for k, v in reports.items()}
            self._emit_metrics("layers", reports, "eval_depth", "Глубина N_smap")

        else:
            gap = self._gap()
            plant, suite, predictor = self._plant(gap), self._suite(gap), self._predictor()
            baseline = evaluate(
                predictor,
                gen_load_dataset(plant, gap, suite, 0.0, self.run_config.data.load_samples, self.run_config.seed),
            )
            reports = {"static": baseline}
            reports.update(speed_robustness(predictor, plant, suite, self.run_config.data.speeds,
                                            seed=self.run_config.seed, load=self._load()))
            self._emit_metrics("speed", reports, "eval_speed", "Ошибка при разных скоростях")
            for speed, report in reports.items():
                if report.translation > 1.5 * baseline.translation:
                    failures.append(f"скорость {speed}: ошибка {report.translation:.3f} мм > 1.5× статической")

        if failures:
            raise AcceptanceFailure("; ".join(failures))
        self.ui.show_success(f"Оценка {mode} завершена")
        return EXIT_OK

    def control(
        self,
        target: Optional[str] = None,
        path_file: Optional[Path] = None,
        shape: Optional[str] = None,
        task: Optional[str] = None,
        mass_g: float = 115.0,
    ) -> int:
        run = self.run_config
        gap = self._gap()
        plant = self._plant(gap)
        controller = ClosedLoopController(
            plant, self._predictor(), self._suite(gap), self._dataset("sim"),
            run.control.gd, run.control.inner, run.control.max_outer,
        )
        state = plant.initial_state(self._load())

        if task == "pick-place":
            candidates, _ = reachable_path("circle", self._plant(), 4, run.control.path_radius, run.control.path_z)
            home = plant.pose(state)
            waypoints = [home, candidates[0], candidates[2], home]
            result = pick_and_place(home, candidates[0], candidates[2], mass_g, controller, state)
        else:
            if target is not None:
                waypoints = [Pose.from_array([float(v) for v in target.split(",")])]
            elif path_file is not None:
                waypoints = load_waypoints(path_file)
            else:
                waypoints, _ = reachable_path(
                    shape, self._plant(), run.control.path_points, run.control.path_radius, run.control.path_z,
                    self._load(),
                )
                save_waypoints(waypoints, self._report_path(f"waypoints_{shape}.csv"))
            result = follow_path(waypoints, controller, state)

        result.trace.to_csv(self._report_path("trace.csv"), self.header)
        frame = pd.DataFrame({
            "waypoint": np.arange(len(waypoints)),
            "target_x": [w.x for w in waypoints],
            "target_y": [w.y for w in waypoints],
            "true_x": result.positions[:, 0],
            "true_y": result.positions[:, 1],
            "error_mm": result.errors,
            "converged": [int(c) for c in result.converged],
        })
        emit_trajectory(frame, self._report_path("trajectory"), "Траектория эффектора", self.header)

        self.ui.show_summary("Управление", {
            "точек": len(waypoints),
            "средняя ошибка, мм": result.mean_error,
            "максимальная ошибка, мм": result.max_error,
            "не сошлось": int(sum(not c for c in result.converged)),
        })
        if not all(result.converged):
            raise NotConverged(f"Не достигнуто точек: {sum(not c for c in result.converged)} из {len(waypoints)}")
        self.ui.show_success("Все точки достигнуты")
        return EXIT_OK

    def run(self, action, *args, **kwargs) -> int:
        """Выполнить команду, отобразив ошибку и вернув код завершения"""
        try:
            return action(*args, **kwargs)
        except AcceptanceFailure as e:
            self.ui.show_error(f"Приёмка не пройдена: {e}")
            self.logger.error(f"Приёмка не пройдена: {e}")
            return EXIT_ACCEPTANCE
        except NotConverged as e:
            self.ui.show_warning(str(e))
            self.logger.warning(str(e))
            return EXIT_NOT_CONVERGED
        except (ConfigError, ConfigurationError, CalibrationError, DatasetError, WeightFileError, OSError) as e:
            self.ui.show_error(f"Ошибка ввода-вывода или конфигурации: {e}")
            self.logger.exception("Ошибка ввода-вывода или конфигурации")
            return EXIT_IO
        except SoroSenseError as e:
            self.ui.show_error(f"Ошибка: {e}")
            self.logger.exception("Ошибка выполнения команды")
            return EXIT_FAILURE


def common_options(func):
    """Общие флаги всех команд"""
    func = click.option("--seed", type=int, default=None, help="Глобальный seed")(func)
    func = click.option("--out", "out_dir", type=str, default=None, help="Каталог результатов")(func)
    func = click.option(
        "--config", "config_file", type=click.Path(dir_okay=False), default=None, help="JSON конфигурации"
    )(func)
    return func


def _launch(ctx: click.Context, config_file, out_dir, seed, command: str, action: str, *args, **kwargs):
    """Собрать приложение и выполнить его метод action с кодом завершения"""
    ui = CLIInterface()
    try:
        config = Config(config_file, out_dir, seed)
        app = SoroSense(config, ui)
    except (ConfigError, OSError) as e:
        ui.show_error(f"Ошибка конфигурации: {e}")
        ctx.exit(EXIT_IO)
        return
    ui.print_banner(command)
    ctx.exit(app.run(getattr(app, action), *args, **kwargs))


@click.group()
def cli():
    """SoroSense: проприоцепция и управление мягким манипулятором"""


@cli.command()
@click.option("--input", "input_csv", type=click.Path(dir_okay=False), required=True, help="CSV inductance,length_mm")
@click.option("--output", type=click.Path(dir_okay=False), default="curve.json", help="Файл кривой")
@common_options
@click.pass_context
def calibrate(ctx, input_csv, output, config_file, out_dir, seed):
    """Подобрать квартику калибровки пружины"""
    _launch(ctx, config_file, out_dir, seed, "calibrate", "calibrate", Path(input_csv), Path(output))


@cli.command("gen-data")
@click.option("--kind", type=click.Choice(["sim", "real"]), required=True)
@click.option("--n", type=int, default=None, help="Размер датасета sim")
@click.option("--levels", type=int, default=None, help="Уровней давления на камеру: сетка real или добавочная сетка sim")
@common_options
@click.pass_context
def gen_data(ctx, kind, n, levels, config_file, out_dir, seed):
    """Сгенерировать датасет"""
    _launch(ctx, config_file, out_dir, seed, f"gen-data --kind {kind}", "gen_data", kind, n, levels)


@cli.command()
@click.option("--which", type=click.Choice(["smap", "s2r"]), required=True)
@common_options
@click.pass_context
def train(ctx, which, config_file, out_dir, seed):
    """Обучить сети"""
    _launch(ctx, config_file, out_dir, seed, f"train --which {which}", "train", which)


@cli.command("eval")
@click.option(
    "--mode",
    type=click.Choice(["standard", "ablation", "loads", "s2r-width", "depth", "speed"]),
    default="standard",
)
@common_options
@click.pass_context
def eval_command(ctx, mode, config_file, out_dir, seed):
    """Оценить точность и проверить свойства приёмки"""
    _launch(ctx, config_file, out_dir, seed, f"eval --mode {mode}", "evaluate", mode)


@cli.command()
@click.option("--target", type=str, default=None, help='Поза "x,y,z,yaw,pitch,roll"')
@click.option("--path", "path_file", type=click.Path(dir_okay=False), default=None, help="CSV точек траектории")
@click.option("--shape", type=click.Choice(["circle", "eight"]), default=None, help="Синтезировать траекторию")
@click.option("--task", type=click.Choice(["pick-place"]), default=None)
@click.option("--mass", "mass_g", type=float, default=115.0, help="Масса переносимого объекта, г")
@common_options
@click.pass_context
def control(ctx, target, path_file, shape, task, mass_g, config_file, out_dir, seed):
    """Управление эффектором: поза, траектория или перенос объекта"""
    chosen = [v for v in (target, path_file, shape, task) if v is not None]
    if len(chosen) != 1:
        raise click.UsageError("Укажите ровно одно из --target, --path, --shape, --task")
    if target is not None:
        try:
            values = [float(v) for v in target.split(",")]
        except ValueError:
            values = []
        if len(values) != 6:
            raise click.BadParameter("ожидается 6 чисел через запятую", param_hint="--target")
    _launch(
        ctx, config_file, out_dir, seed, "control", "control",
        target, Path(path_file) if path_file else None, shape, task, mass_g,
    )


def main():
    """Точка входа"""
    cli()


if __name__ == "__main__":
    main()
