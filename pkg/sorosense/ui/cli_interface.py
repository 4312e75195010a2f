"""
Вывод результатов в консоль с использованием rich
"""
from contextlib import contextmanager
from typing import Dict, Iterator, Optional

import pandas as pd
from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn
from rich.table import Table

from sorosense import __version__


class CLIInterface:
    """Класс для отображения результатов команд"""

    def __init__(self, console: Optional[Console] = None):
        self.console = console or Console()

    def print_banner(self, command: str):
        """Показать заголовок команды"""
        self.console.print(
            Panel(
                f"[bold cyan]SoroSense v{__version__}[/]\n[dim]{command}[/]",
                border_style="cyan",
                box=box.ROUNDED,
            )
        )

    def show_summary(self, title: str, values: Dict[str, object]):
        """Показать пары ключ-значение"""
        table = Table(box=box.ROUNDED, border_style="green", show_header=False)
        for key, value in values.items():
            if isinstance(value, float):
                value = f"{value:.4g}"
            table.add_row(f"[bold cyan]{key}:[/]", str(value))
        self.console.print(Panel(table, title=f"[bold green]{title}[/]", border_style="green"))

    def show_table(self, title: str, frame: pd.DataFrame):
        """Показать таблицу метрик"""
        table = Table(
            title=f"[bold]{title}[/]",
            box=box.ROUNDED,
            border_style="cyan",
            show_header=True,
            header_style="bold cyan",
        )
        for column in frame.columns:
            table.add_column(str(column), justify="right")
        for row in frame.itertuples(index=False):
            table.add_row(*[f"{v:.4g}" if isinstance(v, float) else str(v) for v in row])
        self.console.print("\n", table)

    @contextmanager
    def progress(self, message: str, total: Optional[int] = None) -> Iterator:
        """Индикатор выполнения; отдаёт функцию продвижения на шаг"""
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            console=self.console,
            transient=True,
        ) as progress:
            task = progress.add_task(f"[cyan]{message}...", total=total)
            yield lambda advance=1: progress.advance(task, advance)

    def show_success(self, message: str):
        """Показать сообщение об успехе"""
        self.console.print(f"\n[bold green]✓ {message}[/]")

    def show_error(self, message: str):
        """Показать сообщение об ошибке"""
        self.console.print(f"\n[bold red]✗ {message}[/]")

    def show_warning(self, message: str):
        """Показать предупреждение"""
        self.console.print(f"\n[bold yellow]⚠ {message}[/]")

    def show_info(self, message: str):
        """Показать информационное сообщение"""
        self.console.print(f"\n[bold blue]ℹ {message}[/]")
