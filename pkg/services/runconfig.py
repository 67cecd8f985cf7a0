"""
Файл конфигурации запуска (key = value) и его слияние с флагами командной строки
"""

import argparse
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

from dotenv import dotenv_values

from config import DEFAULT_SEED, FRAME_HEIGHT, FRAME_WIDTH, THREADS
from services.distill import FineTuneConfig
from services.errors import ConfigError, DataError
from services.studentnet import NetConfig

logger = logging.getLogger(__name__)

TRUE_VALUES = ("1", "true", "yes", "on")
FALSE_VALUES = ("0", "false", "no", "off")


@dataclass(frozen=True)
class RunConfig:
    # сеть
    input_channels: int = 2
    base_width: int = 16
    levels: int = 4
    seed: int = DEFAULT_SEED
    # обучение
    max_epochs: int = 100
    val_every: int = 5
    patience: int = 3
    min_rel_improvement: float = 1e-4
    batch_size: int = 8
    crop_height: int = 64
    crop_width: int = 64
    learning_rate: float = 1e-4
    loss_weights: Optional[tuple] = None
    photometric_augment: bool = False
    threads: int = THREADS
    # сцена и учитель
    regime: str = "rotation"
    illumination: Optional[str] = None
    frames: Optional[int] = None
    width: int = FRAME_WIDTH
    height: int = FRAME_HEIGHT
    teacher: str = "analytic"
    noise_sigma: float = 0.0
    # пути
    data: Optional[str] = None
    out: Optional[str] = None
    checkpoint: Optional[str] = None
    init_checkpoint: Optional[str] = None

    def net_config(self) -> NetConfig:
        return NetConfig(self.input_channels, self.base_width, self.levels, self.seed)

    def finetune_config(self, show_progress: bool = False) -> FineTuneConfig:
        return FineTuneConfig(
            max_epochs=self.max_epochs,
            val_every=self.val_every,
            patience=self.patience,
            min_rel_improvement=self.min_rel_improvement,
            batch_size=self.batch_size,
            crop_size=(self.crop_height, self.crop_width),
            seed=self.seed,
            learning_rate=self.learning_rate,
            loss_weights=self.loss_weights,
            photometric_augment=self.photometric_augment,
            threads=self.threads,
            show_progress=show_progress,
        )

    def as_dict(self) -> dict:
        data = asdict(self)
        if data["loss_weights"] is not None:
            data["loss_weights"] = list(data["loss_weights"])
        return data


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
INT_KEYS = {"input_channels", "base_width", "levels", "seed", "max_epochs", "val_every", "patience",
            "batch_size", "crop_height", "crop_width", "threads", "frames", "width", "height"}
FLOAT_KEYS = {"min_rel_improvement", "learning_rate", "noise_sigma"}
BOOL_KEYS = {"photometric_augment"}


def _coerce(key: str, raw) -> object:
    """Привести строковое значение к типу поля"""
    if raw is None or not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key in INT_KEYS:
            return int(text)
        if key in FLOAT_KEYS:
            return float(text)
        if key in BOOL_KEYS:
            lowered = text.lower()
            if lowered in TRUE_VALUES:
                return True
            if lowered in FALSE_VALUES:
                return False
            raise ValueError(text)
        if key == "loss_weights":
            return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as e:
        raise ConfigError(f"{key}: недопустимое значение {raw!r}") from e
    return text


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Mapping] = None) -> RunConfig:
    """
    Собрать RunConfig: значения по умолчанию < файл < флаги

    Args:
        path: файл key = value (формат .env)
        overrides: значения флагов; None означает "флаг не задан"

    Returns:
        RunConfig: проверенная конфигурация
    """
    values = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"{path}: файл конфигурации не найден")
        for key, raw in dotenv_values(path).items():
            name = normalize_key(key)
            if name not in FIELD_TYPES:
                raise ConfigError(f"{path}: неизвестный ключ {key!r}")
            if raw is None:
                raise ConfigError(f"{path}: у ключа {key!r} нет значения")
            values[name] = _coerce(name, raw)
        logger.debug("Конфигурация из %s: %s", path, sorted(values))

    for key, value in (overrides or {}).items():
        name = normalize_key(key)
        if name in FIELD_TYPES and value is not None:
            values[name] = _coerce(name, value)
    return RunConfig(**values)


def add_flags(parser: argparse.ArgumentParser, keys: Sequence[str]) -> None:
    """--kebab-case флаг для каждого ключа; значения приводятся в load_run_config"""
    for key in keys:
        if key not in FIELD_TYPES:
            raise ConfigError(f"нет такого ключа конфигурации: {key}")
        flag = "--" + key.replace("_", "-")
        if key in BOOL_KEYS:
            parser.add_argument(flag, dest=key, action="store_const", const="1", default=None)
        else:
            parser.add_argument(flag, dest=key, default=None, metavar=key.upper())


def require_dir(path: Optional[str], what: str) -> Path:
    if not path:
        raise ConfigError(f"не задан путь: {what}")
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"{what}: каталог {path} не найден")
    return path


def require_file(path: Optional[str], what: str) -> Path:
    if not path:
        raise ConfigError(f"не задан путь: {what}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{what}: файл {path} не найден")
    return path
