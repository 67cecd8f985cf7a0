"""
Иерархия ошибок пакета и коды выхода CLI
"""


class FlowDistillError(Exception):
    """Базовая ошибка: всё, что CLI умеет превратить в код выхода"""
    exit_code = 2


class UsageError(FlowDistillError):
    """Неверные аргументы командной строки"""
    exit_code = 1


class DataError(FlowDistillError):
    """Проблемы с входными данными (файлы, размеры, датасет)"""
    exit_code = 2


class FormatError(DataError):
    """Файл не того формата (например, неверная магия .flo)"""


class CorruptFileError(DataError):
    """Файл обрезан или повреждён"""


class DimensionError(DataError):
    """Несовпадение или недопустимые размеры"""


class UnsupportedImageError(DataError):
    """Неподдерживаемая глубина цвета или число каналов"""


class CheckpointError(DataError):
    """Повреждённый чекпоинт или несовместимая конфигурация сети"""


class TeacherError(DataError):
    """Учитель не смог выдать поток для пары"""


class MissingGoldError(DataError):
    """В датасете нет gold truth потоков"""


class SplitError(DataError):
    """Неверное разбиение train/val/test"""


class ConfigError(DataError):
    """Ошибка в файле конфигурации или флагах"""


class NumericError(FlowDistillError):
    """Обнаружены NaN/Inf"""
    exit_code = 3


class FlowValueError(NumericError):
    """Нечисловые или выходящие за диапазон значения в кадре/потоке"""
