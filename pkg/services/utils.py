"""
Вспомогательные функции
"""

from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from services.errors import ConfigError, DataError


def default_out_dir(command: str, base: str = "runs") -> Path:
    """
    Каталог результатов по умолчанию

    Args:
        command: имя команды (eval, track, bench ...)
        base: корневой каталог

    Returns:
        Path: base/command_YYYYmmdd_HHMMSS
    """
    return Path(base) / f"{command}_{datetime.now().strftime('%Y%m%d_%H%M%S')}"


def reduction_percent(before: float, after: float) -> Optional[float]:
    """Снижение ошибки в процентах; None, если исходная ошибка нулевая"""
    if before <= 0:
        return None
    return 100.0 * (before - after) / before


def latency_stats(samples: Sequence[float]) -> dict:
    """
    Сводка замеров времени

    Returns:
        dict: mean, median, p95, min, max, runs (секунды)
    """
    if not len(samples):
        raise DataError("нет замеров времени")
    values = np.asarray(samples, dtype=np.float64)
    return {
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "p95": float(np.percentile(values, 95)),
        "min": float(values.min()),
        "max": float(values.max()),
        "runs": int(values.size),
    }


def ensure_output_dir(out: Path, inputs: Sequence[Path] = ()) -> Path:
    """Создать каталог результатов; он не может совпадать с входным датасетом или лежать внутри него"""
    out = Path(out)
    target = out.resolve()
    for source in inputs:
        if source is None:
            continue
        source = Path(source).resolve()
        if target == source or source in target.parents:
            raise ConfigError(f"каталог результатов {out} внутри входного датасета {source}")
    out.mkdir(parents=True, exist_ok=True)
    return out
