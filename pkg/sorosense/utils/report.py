"""
Отчёты экспериментов: таблицы CSV и графики SVG на тех же данных
"""
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# фиксированная соль id элементов SVG: повторный запуск даёт тот же файл
plt.rcParams["svg.hashsalt"] = "sorosense"
plt.rcParams["figure.figsize"] = (6.4, 4.0)
plt.rcParams["font.size"] = 9


def write_table(frame: pd.DataFrame, path: Union[str, Path], header_comment: Optional[str] = None) -> Path:
    """CSV со строкой-комментарием происхождения в начале"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        if header_comment:
            f.write(f"# {header_comment}\n")
        frame.to_csv(f, index=False, float_format="%.10g")
    logger.info(f"Таблица записана: {path}")
    return path


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"График записан: {path}")
    return path


def emit_bars(
    frame: pd.DataFrame,
    label_column: str,
    value_columns: Sequence[str],
    stem: Union[str, Path],
    title: str = "",
    header_comment: Optional[str] = None,
) -> Path:
    """Сгруппированные столбцы: по группе на строку таблицы"""
    stem = Path(stem)
    write_table(frame, stem.with_suffix(".csv"), header_comment)

    fig, ax = plt.subplots()
    labels = frame[label_column].astype(str).tolist()
    width = 0.8 / max(len(value_columns), 1)
    for k, column in enumerate(value_columns):
        positions = [i + k * width for i in range(len(labels))]
        ax.bar(positions, frame[column].to_numpy(), width=width, label=column)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels)
    ax.set_title(title)
    ax.legend()
    return _save(fig, stem.with_suffix(".svg"))


def emit_lines(
    frame: pd.DataFrame,
    x_column: str,
    y_columns: Sequence[str],
    stem: Union[str, Path],
    title: str = "",
    logy: bool = False,
    header_comment: Optional[str] = None,
) -> Path:
    """Кривые y(x), например история обучения или значение цели"""
    stem = Path(stem)
    write_table(frame, stem.with_suffix(".csv"), header_comment)

    fig, ax = plt.subplots()
    for column in y_columns:
        ax.plot(frame[x_column].to_numpy(), frame[column].to_numpy(), label=column, linewidth=1.0)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x_column)
    ax.set_title(title)
    ax.legend()
    return _save(fig, stem.with_suffix(".svg"))


def emit_trajectory(
    frame: pd.DataFrame,
    stem: Union[str, Path],
    title: str = "",
    header_comment: Optional[str] = None,
) -> Path:
    """Целевая и фактическая траектории в плоскости XY (столбцы target_x/y, true_x/y)"""
    stem = Path(stem)
    write_table(frame, stem.with_suffix(".csv"), header_comment)

    fig, ax = plt.subplots()
    ax.plot(frame["target_x"], frame["target_y"], "k--", marker="o", markersize=2, linewidth=0.8, label="target")
    ax.plot(frame["true_x"], frame["true_y"], "r-", marker=".", markersize=2, linewidth=0.8, label="true")
    ax.set_aspect("equal")
    ax.set_xlabel("x, mm")
    ax.set_ylabel("y, mm")
    ax.set_title(title)
    ax.legend()
    return _save(fig, stem.with_suffix(".svg"))
