"""
Иерархия исключений SoroSense
"""


class SoroSenseError(Exception):
    """Базовая ошибка приложения"""


class DomainError(SoroSenseError, ValueError):
    """Аргумент вне допустимой области"""


class CalibrationError(SoroSenseError):
    """Ошибка калибровки пружинного сенсора"""


class ConfigurationError(SoroSenseError):
    """Некорректная конфигурация модели (например, немонотонная кривая)"""


class TrainingError(SoroSenseError):
    """Обучение прервано (NaN в функции потерь)"""

    def __init__(self, message: str, epoch: int = -1, batch: int = -1):
        super().__init__(f"{message} (эпоха {epoch}, батч {batch})")
        self.epoch = epoch
        self.batch = batch


class WeightFileError(SoroSenseError):
    """Файл весов повреждён или не читается"""


class IncompatibleWeightsError(WeightFileError):
    """Версия файла весов не поддерживается"""


class DatasetError(SoroSenseError):
    """Пустой, слишком маленький или повреждённый датасет"""


class ControlError(SoroSenseError):
    """Ошибка в контуре управления"""


class ConfigError(SoroSenseError):
    """Ошибка файла конфигурации запуска"""
