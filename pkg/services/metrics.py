"""
Метрики: EPE / EPE*, SSIM, многомасштабная L1-функция потерь и статистика для боксплотов
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.ndimage import gaussian_filter

from services.errors import DataError, DimensionError
from services.flowcore import FlowField, FramePair, ImageFrame, check_same_size, to_gray
from services.warp import backward_warp

logger = logging.getLogger(__name__)

SSIM_SIGMA = 1.5
SSIM_WINDOW = 11
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class BoxplotStats:
    """Медиана, квартили, усы (1.5 IQR, обрезанные по данным) и выбросы"""
    median: float
    lower_quartile: float
    upper_quartile: float
    whisker_low: float
    whisker_high: float
    outliers: list = field(default_factory=list)
    n: int = 0


@dataclass(frozen=True, eq=False)
class MultiScaleFlow:
    """Пирамида предсказаний от грубого к точному, каждый уровень вдвое меньше следующего"""
    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise DimensionError("пустая пирамида потоков")
        for coarse, fine in zip(levels, levels[1:]):
            if (fine.width, fine.height) != (2 * coarse.width, 2 * coarse.height):
                raise DimensionError(
                    f"пирамида не диадическая: {coarse.width}x{coarse.height} -> {fine.width}x{fine.height}"
                )
        object.__setattr__(self, "levels", levels)

    @property
    def finest(self) -> FlowField:
        return self.levels[-1]

    def __len__(self) -> int:
        return len(self.levels)


# --- EPE -----------------------------------------------------------------

def epe_map(pred: FlowField, ref: FlowField) -> np.ndarray:
    """Попиксельная евклидова норма разности потоков"""
    check_same_size(pred, ref, "epe")
    return np.hypot(pred.u - ref.u, pred.v - ref.v)


def epe_mean(pred: FlowField, ref: FlowField, margin: int = 0) -> float:
    """
    Средний EPE; это EPE*, если ref - gold truth учителя

    Args:
        pred: предсказанный поток
        ref: эталон (ground truth или gold truth)
        margin: сколько пикселей исключить у каждой границы
    """
    errors = epe_map(pred, ref)
    if margin:
        if 2 * margin >= min(errors.shape):
            raise DimensionError(f"отступ {margin} не оставляет пикселей")
        errors = errors[margin:-margin, margin:-margin]
    return float(np.mean(errors))


# --- SSIM ----------------------------------------------------------------

def _luma(frame: ImageFrame) -> np.ndarray:
    return to_gray(frame).data[:, :, 0]


def ssim(a: ImageFrame, b: ImageFrame) -> float:
    """
    Средний локальный SSIM: гауссово окно 11x11 (sigma 1.5), L = 1

    RGB переводится в яркость; усреднение только по полностью
    покрытым окном пикселям.
    """
    check_same_size(a, b, "ssim")
    if min(a.width, a.height) < SSIM_WINDOW:
        raise DimensionError(f"кадр {a.width}x{a.height} меньше окна {SSIM_WINDOW}")

    x = _luma(a)
    y = _luma(b)
    radius = SSIM_WINDOW // 2
    truncate = (radius - 0.5) / SSIM_SIGMA

    def window(z):
        return gaussian_filter(z, sigma=SSIM_SIGMA, truncate=truncate, mode="reflect")

    ux, uy = window(x), window(y)
    vx = window(x * x) - ux * ux
    vy = window(y * y) - uy * uy
    vxy = window(x * y) - ux * uy

    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    numerator = (2 * ux * uy + c1) * (2 * vxy + c2)
    denominator = (ux ** 2 + uy ** 2 + c1) * (vx + vy + c2)
    local = (numerator / denominator)[radius:-radius, radius:-radius]
    return float(np.clip(np.mean(local), -1.0, 1.0))


def reconstruction_ssim(pair: FramePair, flow: FlowField) -> float:
    """SSIM между первым кадром и вторым, обратно заваренным потоком"""
    return ssim(pair.first, backward_warp(pair.second, flow))


# --- функция потерь ------------------------------------------------------

def area_downsample(array: np.ndarray, factor: int) -> np.ndarray:
    """Усреднение блоков factor x factor по двум последним осям"""
    if factor == 1:
        return array
    *lead, height, width = array.shape
    blocks = array.reshape(*lead, height // factor, factor, width // factor, factor)
    return blocks.mean(axis=(-3, -1))


def gold_for_level(gold: np.ndarray, height: int, width: int) -> np.ndarray:
    """Gold (..., 2, H, W) на уровне (height, width): усреднение и деление смещений на масштаб"""
    full_height, full_width = gold.shape[-2:]
    factor = full_width // width
    if factor < 1 or factor & (factor - 1) or width * factor != full_width \
            or height * factor != full_height:
        raise DimensionError(
            f"уровень {width}x{height} не диадический относительно {full_width}x{full_height}"
        )
    return area_downsample(gold, factor) / factor


def l1_term(pred: np.ndarray, gold: np.ndarray) -> float:
    """Среднее по пикселям |du| + |dv|; ось компонент - третья с конца"""
    return float(np.mean(np.abs(pred - gold).sum(axis=-3)))


def default_loss_weights(n_scales: int) -> list[float]:
    return [1.0] * n_scales


def multiscale_l1_arrays(preds: Sequence[np.ndarray], gold: np.ndarray,
                         weights: Optional[Sequence[float]] = None) -> float:
    """То же, что multiscale_l1_loss, на массивах (2, h, w)"""
    weights = default_loss_weights(len(preds)) if weights is None else list(weights)
    if len(weights) != len(preds):
        raise DimensionError(f"весов {len(weights)}, а масштабов {len(preds)}")
    if preds[-1].shape[-2:] != gold.shape[-2:]:
        raise DimensionError("самый точный уровень не совпадает по размеру с gold")
    total = 0.0
    for weight, pred in zip(weights, preds):
        height, width = pred.shape[-2:]
        total += weight * l1_term(pred, gold_for_level(gold, height, width))
    return total


def multiscale_l1_loss(pred: MultiScaleFlow, gold: FlowField,
                       weights: Optional[Sequence[float]] = None) -> float:
    """
    Многомасштабная L1: sum_s w_s * mean |pred_s - down(gold, s)|_1

    Args:
        pred: пирамида предсказаний
        gold: gold truth на самом точном уровне
        weights: веса уровней (по умолчанию равные)

    Returns:
        float: неотрицательное значение потерь
    """
    preds = [np.stack([level.u, level.v]) for level in pred.levels]
    return multiscale_l1_arrays(preds, np.stack([gold.u, gold.v]), weights)


# --- боксплоты -----------------------------------------------------------

def boxplot_stats(samples: Sequence[float]) -> BoxplotStats:
    """
    Статистика боксплота

    Args:
        samples: значения (например EPE* по тестовым парам)

    Returns:
        BoxplotStats: квартили (середина соседних порядковых статистик),
        усы - крайние точки внутри квартиль +- 1.5 IQR
    """
    if len(samples) == 0:
        raise DataError("boxplot_stats: пустая выборка")
    ordered = sorted(float(s) for s in samples)
    q1, median, q3 = (float(q) for q in np.percentile(ordered, [25, 50, 75], method="midpoint"))
    iqr = q3 - q1
    low_fence = q1 - 1.5 * iqr
    high_fence = q3 + 1.5 * iqr
    inside = [s for s in ordered if low_fence <= s <= high_fence]
    # при малых выборках внутри ограды может не оказаться точек по одну сторону квартиля
    whisker_low = inside[0] if inside and inside[0] <= q1 else q1
    whisker_high = inside[-1] if inside and inside[-1] >= q3 else q3
    return BoxplotStats(
        median=median,
        lower_quartile=q1,
        upper_quartile=q3,
        whisker_low=whisker_low,
        whisker_high=whisker_high,
        outliers=[s for s in ordered if s < low_fence or s > high_fence],
        n=len(ordered),
    )


# --- экспорт -------------------------------------------------------------

def summary_dict(epe: Sequence[float], ssim_values: Sequence[float] = ()) -> dict:
    """Сводка по тестовому набору: среднее EPE*, поля боксплота, SSIM mean/min/max"""
    summary = {"mean_epe": float(np.mean(epe)), "boxplot": asdict(boxplot_stats(epe))}
    if len(ssim_values):
        summary["ssim"] = {
            "mean": float(np.mean(ssim_values)),
            "min": float(np.min(ssim_values)),
            "max": float(np.max(ssim_values)),
        }
    return summary


def write_summary_json(summary: Mapping, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def write_metrics_csv(rows: Sequence[Mapping], path: Union[str, Path]) -> None:
    """Одна строка на тестовую пару"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    columns = list(rows[0].keys()) if rows else ["pair_index", "epe", "ssim"]
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def boxplot_figure(groups: Mapping[str, Sequence[float]], path: Union[str, Path],
                   title: str = "EPE*", with_all: bool = True) -> None:
    """Боксплоты по наборам плюс общий ("all"), усы 1.5 IQR"""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    names = list(groups)
    data = [list(groups[name]) for name in names]
    if with_all and len(names) > 1:
        names = ["all"] + names
        data = [[v for values in data for v in values]] + data

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(1.6 + 1.2 * len(names), 4))
    ax.boxplot(data, whis=1.5)
    ax.set_xticks(range(1, len(names) + 1))
    ax.set_xticklabels(names)
    ax.set_ylabel(title)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
