"""
Дистилляция: gold truth от учителя, датасет пациента и дообучение студента
"""

import csv
import logging
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import cv2
import numpy as np
from dotenv import dotenv_values
from scipy.ndimage import gaussian_filter
from tqdm import tqdm

from services.errors import (
    ConfigError,
    DataError,
    DimensionError,
    MissingGoldError,
    SplitError,
    TeacherError,
)
from services.flowcore import (
    FlowField,
    FramePair,
    check_same_size,
    crop,
    crop_pair,
    crop_to_multiple,
    list_frames,
    read_flo,
    read_image,
    to_gray,
    write_flo,
    write_image,
)
from services.metrics import BoxplotStats, boxplot_stats, epe_mean, reconstruction_ssim
from services.studentnet import (
    StudentNet,
    backward_batch,
    batch_loss,
    init_optimizer,
    optimizer_step,
    pair_input,
    predict_flow,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.txt"
SPLIT_NAMES = ("train", "val", "test")


# --- датасет -------------------------------------------------------------

@dataclass(frozen=True)
class SplitRanges:
    """Полуоткрытые диапазоны индексов пар [start, stop)"""
    train: tuple = (0, 0)
    val: tuple = (0, 0)
    test: tuple = (0, 0)

    def __post_init__(self):
        previous_stop = 0
        for name in SPLIT_NAMES:
            start, stop = getattr(self, name)
            if start < 0 or stop < start:
                raise SplitError(f"диапазон {name} некорректен: [{start}, {stop})")
            if start < previous_stop:
                raise SplitError(f"диапазон {name} [{start}, {stop}) пересекается с предыдущим")
            previous_stop = stop
            object.__setattr__(self, name, (int(start), int(stop)))

    def indices(self, name: str) -> range:
        return range(*getattr(self, name))


@dataclass(frozen=True, eq=False)
class SequenceDataset:
    """
    Последовательность кадров одного пациента

    truth - точный поток, если он известен (синтетика); gold - разметка
    учителя, отсутствует до generate_gold.
    """
    frames: tuple
    gold: Optional[tuple] = None
    truth: Optional[tuple] = None
    split: Optional[SplitRanges] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) < 2:
            raise DataError(f"нужно минимум 2 кадра, получено {len(frames)}")
        for frame in frames[1:]:
            if frame.data.shape != frames[0].data.shape:
                raise DimensionError(f"кадры разного размера: {frames[0].data.shape} и {frame.data.shape}")
        object.__setattr__(self, "frames", frames)
        for name in ("gold", "truth"):
            flows = getattr(self, name)
            if flows is None:
                continue
            flows = tuple(flows)
            if len(flows) != len(frames) - 1:
                raise DimensionError(f"{name}: {len(flows)} потоков на {len(frames) - 1} пар")
            for flow in flows:
                check_same_size(frames[0], flow, name)
            object.__setattr__(self, name, flows)
        if self.split is not None and self.split.test[1] > len(frames) - 1:
            raise SplitError(f"разбиение выходит за {len(frames) - 1} пар")

    @property
    def n_pairs(self) -> int:
        return len(self.frames) - 1

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    def pair(self, index: int) -> FramePair:
        if not 0 <= index < self.n_pairs:
            raise DataError(f"пара {index} вне диапазона 0..{self.n_pairs - 1}")
        return FramePair(self.frames[index], self.frames[index + 1])

    @property
    def pairs(self) -> list[FramePair]:
        return [self.pair(i) for i in range(self.n_pairs)]

    def indices(self, name: str) -> range:
        if self.split is None:
            raise SplitError("датасет не разбит на train/val/test")
        return self.split.indices(name)

    def with_gold(self, gold: Sequence[FlowField], teacher: str = "") -> "SequenceDataset":
        provenance = dict(self.provenance)
        if teacher:
            provenance["teacher"] = teacher
        return replace(self, gold=tuple(gold), provenance=provenance)

    def with_split(self, split: SplitRanges) -> "SequenceDataset":
        return replace(self, split=split)


# --- учителя -------------------------------------------------------------

class TeacherOracle(ABC):
    """Учитель h: пара кадров -> gold truth поток"""
    name = "teacher"

    @abstractmethod
    def estimate(self, pair: FramePair, index: int) -> FlowField:
        ...


class AnalyticTeacher(TeacherOracle):
    """Точный поток генератора (идеальный учитель)"""
    name = "analytic"

    def __init__(self, truth: Sequence[FlowField]):
        self.truth = tuple(truth)

    @classmethod
    def from_dataset(cls, dataset: SequenceDataset) -> "AnalyticTeacher":
        if dataset.truth is None:
            raise TeacherError("в датасете нет точного потока для аналитического учителя")
        return cls(dataset.truth)

    def estimate(self, pair: FramePair, index: int) -> FlowField:
        if not 0 <= index < len(self.truth):
            raise TeacherError(f"пара {index}: нет точного потока")
        return self.truth[index]


class FileTeacher(TeacherOracle):
    """Заранее посчитанные .flo (например, прогон тяжёлой модели офлайн)"""
    name = "file"

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def estimate(self, pair: FramePair, index: int) -> FlowField:
        path = self.directory / f"{index:06d}.flo"
        if not path.exists():
            raise TeacherError(f"пара {index}: нет файла {path}")
        return read_flo(path)


class NoisyTeacher(TeacherOracle):
    """
    Неидеальный учитель: базовый поток + сглаженный гауссов шум

    После сглаживания шум перенормируется так, что его СКО равно sigma
    пикселей. Шум каждой пары зависит только от (seed, index).
    """
    name = "noisy"

    def __init__(self, base: TeacherOracle, sigma: float, smoothing: float = 2.0, seed: int = 0):
        if sigma < 0:
            raise ConfigError(f"sigma учителя должна быть >= 0, получено {sigma}")
        self.base = base
        self.sigma = float(sigma)
        self.smoothing = float(smoothing)
        self.seed = seed

    def estimate(self, pair: FramePair, index: int) -> FlowField:
        flow = self.base.estimate(pair, index)
        if self.sigma == 0:
            return flow
        rng = np.random.default_rng([self.seed, index])
        noise = rng.standard_normal((2, flow.height, flow.width))
        if self.smoothing > 0:
            noise = gaussian_filter(noise, sigma=(0, self.smoothing, self.smoothing), mode="reflect")
            noise *= np.sqrt(4 * np.pi) * self.smoothing
        return FlowField(flow.u + self.sigma * noise[0], flow.v + self.sigma * noise[1])


class OpenCVTeacher(TeacherOracle):
    """Классический плотный поток OpenCV (Farneback или DIS) для реальных кадров"""
    name = "opencv"

    def __init__(self, method: str = "dis"):
        if method not in ("dis", "farneback"):
            raise ConfigError(f"неизвестный метод OpenCV: {method}")
        self.method = method

    def estimate(self, pair: FramePair, index: int) -> FlowField:
        first = np.rint(to_gray(pair.first).data[:, :, 0] * 255).astype(np.uint8)
        second = np.rint(to_gray(pair.second).data[:, :, 0] * 255).astype(np.uint8)
        if self.method == "farneback":
            flow = cv2.calcOpticalFlowFarneback(first, second, None, 0.5, 4, 15, 3, 5, 1.2, 0)
        else:
            dis = cv2.DISOpticalFlow_create(cv2.DISOPTICAL_FLOW_PRESET_MEDIUM)
            flow = dis.calc(first, second, None)
        return FlowField.from_array(flow.astype(np.float64))


TEACHER_NAMES = ("analytic", "noisy", "gold", "opencv-dis", "opencv-farneback", "file:<каталог>")


def make_teacher(name: str, dataset: Optional[SequenceDataset] = None, sigma: float = 0.0,
                 seed: int = 0) -> TeacherOracle:
    """
    Учитель по имени

    analytic / noisy требуют точного потока в датасете, gold возвращает
    уже сохранённую разметку (учитель против самого себя), file:DIR читает
    готовые .flo.
    """
    if name in ("analytic", "noisy"):
        if dataset is None:
            raise ConfigError(f"учителю {name} нужен датасет с точным потоком")
        analytic = AnalyticTeacher.from_dataset(dataset)
        return analytic if name == "analytic" else NoisyTeacher(analytic, sigma, seed=seed)
    if name == "gold":
        if dataset is None or dataset.gold is None:
            raise MissingGoldError("учитель gold: в датасете нет gold truth")
        teacher = AnalyticTeacher(dataset.gold)
        teacher.name = "gold"
        return teacher
    if name.startswith("opencv-"):
        return OpenCVTeacher(name.split("-", 1)[1])
    if name.startswith("file:"):
        return FileTeacher(name.split(":", 1)[1])
    raise ConfigError(f"неизвестный учитель {name!r}, допустимо: {', '.join(TEACHER_NAMES)}")


def _parallel_map(fn: Callable, items: Sequence, threads: int, desc: str, show_progress: bool):
    if threads <= 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=not show_progress)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, disable=not show_progress))


def generate_gold(dataset: SequenceDataset, teacher: TeacherOracle, threads: int = 1,
                  show_progress: bool = False) -> SequenceDataset:
    """
    Разметка всех пар (всех частей разбиения) учителем: y~ = h(x)

    Args:
        dataset: кадры
        teacher: учитель
        threads: число потоков; результат от него не зависит

    Returns:
        SequenceDataset: тот же датасет с gold
    """
    def estimate(index: int) -> FlowField:
        pair = dataset.pair(index)
        try:
            flow = teacher.estimate(pair, index)
        except TeacherError:
            raise
        except Exception as e:
            raise TeacherError(f"пара {index}: учитель {teacher.name} упал: {e}") from e
        if (flow.width, flow.height) != (pair.width, pair.height):
            raise TeacherError(
                f"пара {index}: поток {flow.width}x{flow.height} вместо {pair.width}x{pair.height}"
            )
        return flow

    gold = _parallel_map(estimate, range(dataset.n_pairs), threads, "gold", show_progress)
    logger.info("Gold truth: %d пар размечено учителем %s", len(gold), teacher.name)
    return dataset.with_gold(gold, teacher.name)


def split_dataset(dataset: SequenceDataset, n_train: int, n_val: int, n_test: int) -> SequenceDataset:
    """Непрерывное временное разбиение: сначала train, затем val, затем test"""
    if min(n_train, n_val, n_test) < 0:
        raise SplitError(f"отрицательный размер части: {n_train}/{n_val}/{n_test}")
    if n_train + n_val + n_test > dataset.n_pairs:
        raise SplitError(
            f"запрошено {n_train + n_val + n_test} пар, в датасете {dataset.n_pairs}"
        )
    split = SplitRanges(
        train=(0, n_train),
        val=(n_train, n_train + n_val),
        test=(n_train + n_val, n_train + n_val + n_test),
    )
    return dataset.with_split(split)


# --- дообучение ----------------------------------------------------------

@dataclass(frozen=True)
class FineTuneConfig:
    max_epochs: int = 100
    val_every: int = 5
    patience: int = 3
    min_rel_improvement: float = 1e-4
    batch_size: int = 8
    crop_size: tuple = (64, 64)
    seed: int = 0
    learning_rate: float = 1e-4
    loss_weights: Optional[tuple] = None
    photometric_augment: bool = False
    threads: int = 1
    show_progress: bool = False

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs должно быть >= 1, получено {self.max_epochs}")
        if self.val_every < 1:
            raise ConfigError(f"val_every должно быть >= 1, получено {self.val_every}")
        if self.patience < 1:
            raise ConfigError(f"patience должно быть >= 1, получено {self.patience}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size должно быть >= 1, получено {self.batch_size}")
        if len(self.crop_size) != 2 or min(self.crop_size) < 1:
            raise ConfigError(f"crop_size должен быть (h, w), получено {self.crop_size}")
        if self.learning_rate < 0:
            raise ConfigError(f"learning_rate должен быть >= 0, получено {self.learning_rate}")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: Optional[float] = None
    wall_time: float = field(default=0.0, compare=False)


@dataclass
class TrainingLog:
    """История обучения; время не участвует в сравнении логов"""
    phase: str = "fine-tune"
    epochs: list = field(default_factory=list)
    best_epoch: Optional[int] = None
    best_val_loss: Optional[float] = None
    stopped_early: bool = False
    accessed_pairs: list = field(default_factory=list)

    @property
    def epoch_of_convergence(self) -> Optional[int]:
        return self.best_epoch

    @property
    def wall_time(self) -> float:
        return sum(record.wall_time for record in self.epochs)

    @property
    def val_losses(self) -> list[float]:
        return [r.val_loss for r in self.epochs if r.val_loss is not None]

    def write_csv(self, path: Union[str, Path]) -> None:
        """epoch, train_loss, val_loss; без времени, чтобы файл был воспроизводимым"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "train_loss", "val_loss"])
            for r in self.epochs:
                writer.writerow([r.epoch, repr(r.train_loss), "" if r.val_loss is None else repr(r.val_loss)])

    def summary_text(self) -> str:
        lines = [
            f"phase: {self.phase}",
            f"epochs: {len(self.epochs)}",
            f"epoch_of_convergence: {self.best_epoch}",
            f"best_val_loss: {self.best_val_loss!r}",
            f"stopped_early: {self.stopped_early}",
            f"train_pairs_read: {len(self.accessed_pairs)}",
        ]
        return "\n".join(lines) + "\n"


def _prepare_validation(net: StudentNet, dataset: SequenceDataset, indices: range):
    inputs, golds = [], []
    for i in indices:
        pair = dataset.pair(i)
        pair = FramePair(crop_to_multiple(pair.first, net.config.multiple),
                         crop_to_multiple(pair.second, net.config.multiple))
        gold = crop_to_multiple(dataset.gold[i], net.config.multiple)
        inputs.append(pair_input(pair, net.config))
        golds.append(np.stack([gold.u, gold.v]))
    return np.stack(inputs), np.stack(golds)


def _validation_loss(net: StudentNet, inputs: np.ndarray, golds: np.ndarray,
                     batch_size: int, weights, threads: int = 1) -> float:
    """Средний loss по валидации; батчи считаются параллельно, суммируются по порядку"""
    def chunk_loss(start: int) -> float:
        chunk = slice(start, start + batch_size)
        return batch_loss(net, inputs[chunk], golds[chunk], weights) * len(inputs[chunk])

    losses = _parallel_map(chunk_loss, range(0, len(inputs), batch_size), threads, "val", False)
    total = 0.0
    for loss in losses:
        total += loss
    return total / len(inputs)


def _augment_photometric(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Случайные усиление и сдвиг яркости, независимо для каждого кадра пары"""
    half = x.shape[0] // 2
    out = np.empty_like(x)
    for part in (slice(0, half), slice(half, None)):
        gain = rng.uniform(0.8, 1.2)
        bias = rng.uniform(-0.05, 0.05)
        out[part] = np.clip((x[part] + 0.5) * gain + bias, 0.0, 1.0) - 0.5
    return out


def fine_tune(net: StudentNet, dataset: SequenceDataset, config: FineTuneConfig,
              phase: str = "fine-tune"):
    """
    Дообучение студента на gold truth пациента

    Args:
        net: исходная (предобученная) сеть
        dataset: датасет с gold и разбиением; читаются только train и val
        config: параметры обучения

    Returns:
        tuple: (лучшая по валидации сеть, TrainingLog)
    """
    if dataset.gold is None:
        raise MissingGoldError("в датасете нет gold truth (gold/): сначала выполните generate_gold, команда `gold`")
    train_indices = dataset.indices("train")
    val_indices = dataset.indices("val")
    if len(train_indices) == 0:
        raise SplitError("пустая обучающая выборка")

    crop_h, crop_w = config.crop_size
    if crop_h > dataset.height or crop_w > dataset.width:
        raise DimensionError(
            f"кроп {crop_w}x{crop_h} больше кадров {dataset.width}x{dataset.height}"
        )
    if crop_h % net.config.multiple or crop_w % net.config.multiple:
        raise DimensionError(f"кроп {crop_w}x{crop_h} не кратен {net.config.multiple}")

    weights = None if config.loss_weights is None else list(config.loss_weights)
    rng = np.random.default_rng(config.seed)
    state = init_optimizer(net, learning_rate=config.learning_rate)
    log = TrainingLog(phase=phase)
    accessed = set()

    if len(val_indices):
        val_inputs, val_golds = _prepare_validation(net, dataset, val_indices)
        accessed.update(val_indices)

    best_net = net
    reference_val = None
    bad_validations = 0
    logger.info("%s: %d train / %d val пар, до %d эпох", phase, len(train_indices),
                len(val_indices), config.max_epochs)

    for epoch in tqdm(range(1, config.max_epochs + 1), desc=phase, disable=not config.show_progress):
        started = time.perf_counter()
        order = rng.permutation(np.asarray(train_indices))
        weighted_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            inputs, golds = [], []
            for index in order[start:start + config.batch_size]:
                index = int(index)
                x0 = int(rng.integers(0, dataset.width - crop_w + 1))
                y0 = int(rng.integers(0, dataset.height - crop_h + 1))
                x = pair_input(crop_pair(dataset.pair(index), x0, y0, crop_w, crop_h), net.config)
                if config.photometric_augment:
                    x = _augment_photometric(x, rng)
                gold = crop(dataset.gold[index], x0, y0, crop_w, crop_h)
                inputs.append(x)
                golds.append(np.stack([gold.u, gold.v]))
                accessed.add(index)
            loss, grads = backward_batch(net, np.stack(inputs), np.stack(golds), weights)
            net, state = optimizer_step(net, grads, state)
            weighted_sum += loss * len(inputs)
            logger.debug("эпоха %d, батч %d: loss %.6f", epoch, start // config.batch_size, loss)
        train_loss = weighted_sum / len(order)

        val_loss = None
        stop = False
        if len(val_indices) and (epoch % config.val_every == 0 or epoch == config.max_epochs):
            val_loss = _validation_loss(net, val_inputs, val_golds, config.batch_size, weights,
                                        config.threads)
            if log.best_val_loss is None or val_loss < log.best_val_loss:
                log.best_val_loss, log.best_epoch, best_net = val_loss, epoch, net
            if reference_val is None or val_loss < reference_val * (1 - config.min_rel_improvement):
                reference_val = val_loss
                bad_validations = 0
            else:
                bad_validations += 1
                stop = bad_validations >= config.patience
            logger.info("%s: эпоха %d, train %.5f, val %.5f", phase, epoch, train_loss, val_loss)

        log.epochs.append(EpochRecord(epoch, train_loss, val_loss, time.perf_counter() - started))
        if stop:
            log.stopped_early = True
            logger.info("%s: ранняя остановка на эпохе %d (лучшая %d)", phase, epoch, log.best_epoch)
            break

    if not len(val_indices):
        best_net = net
        log.best_epoch = log.epochs[-1].epoch
    log.accessed_pairs = sorted(accessed)
    return best_net, log


def pretrain(net: StudentNet, dataset: SequenceDataset, config: FineTuneConfig):
    """Обучение на общем (не пациентском) домене: так получается предобученный студент"""
    return fine_tune(net, dataset, config, phase="pretrain")


# --- оценка --------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EvaluationResult:
    pair_indices: list
    epe: list
    ssim: list
    stats: BoxplotStats
    mean_epe: float

    def rows(self) -> list[dict]:
        return [
            {"pair_index": i, "epe": repr(e), "ssim": repr(s)}
            for i, e, s in zip(self.pair_indices, self.epe, self.ssim)
        ]


def evaluate(model: Union[StudentNet, TeacherOracle], dataset: SequenceDataset,
             threads: int = 1, split: str = "test", show_progress: bool = False) -> EvaluationResult:
    """
    EPE* и SSIM реконструкции по тестовым парам

    Args:
        model: студент или учитель (для сравнения учителя с самим собой)
        dataset: датасет с gold и разбиением
        threads: потоки; порядок результатов фиксирован

    Returns:
        EvaluationResult: EPE* по парам, статистика боксплота и среднее
    """
    if dataset.gold is None:
        raise MissingGoldError("в датасете нет gold truth (gold/): сначала выполните generate_gold, команда `gold`")
    indices = list(dataset.indices(split))
    if not indices:
        raise SplitError(f"пустая часть {split}: оценивать нечего")
    multiple = model.config.multiple if isinstance(model, StudentNet) else 1

    def score(index: int) -> tuple[float, float]:
        pair = dataset.pair(index)
        if isinstance(model, StudentNet):
            pair = FramePair(crop_to_multiple(pair.first, multiple), crop_to_multiple(pair.second, multiple))
            flow = predict_flow(model, pair)
        else:
            flow = model.estimate(pair, index)
        gold = crop_to_multiple(dataset.gold[index], multiple)
        return epe_mean(flow, gold), reconstruction_ssim(pair, flow)

    scores = _parallel_map(score, indices, threads, "eval", show_progress)
    epe = [s[0] for s in scores]
    ssim_values = [s[1] for s in scores]
    result = EvaluationResult(indices, epe, ssim_values, boxplot_stats(epe), float(np.mean(epe)))
    logger.info("Оценка %s: %d пар, средний EPE* %.4f", split, len(indices), result.mean_epe)
    return result


# --- хранение на диске ---------------------------------------------------

def _format_range(bounds: tuple) -> str:
    return f"{bounds[0]}:{bounds[1]}"


def _parse_range(text: str, key: str) -> tuple:
    try:
        start, stop = (int(x) for x in text.split(":"))
    except ValueError as e:
        raise SplitError(f"манифест: {key}={text!r} не похоже на start:stop") from e
    return start, stop


def save_dataset(dataset: SequenceDataset, directory: Union[str, Path]) -> Path:
    """
    Раскладка на диске:
        frames/000000.png ... (16 бит)
        gold/000000.flo ...   (если есть gold)
        truth/000000.flo ...  (если известен точный поток)
        manifest.txt          (key=value: размеры, разбиение, происхождение)
    """
    directory = Path(directory)
    for i, frame in enumerate(dataset.frames):
        write_image(frame, directory / "frames" / f"{i:06d}.png", bit_depth=16)
    for name in ("gold", "truth"):
        flows = getattr(dataset, name)
        if flows is not None:
            for i, flow in enumerate(flows):
                write_flo(flow, directory / name / f"{i:06d}.flo")

    lines = [
        "version=1",
        f"frames={len(dataset.frames)}",
        f"size={dataset.width}x{dataset.height}",
    ]
    if dataset.split is not None:
        lines += [f"{name}={_format_range(getattr(dataset.split, name))}" for name in SPLIT_NAMES]
    lines += [f"provenance.{key}={value}" for key, value in sorted(dataset.provenance.items())]
    (directory / MANIFEST_NAME).write_text("\n".join(lines) + "\n")
    logger.info("Датасет записан: %s (%d кадров)", directory, len(dataset.frames))
    return directory


def _load_flows(directory: Path, count: int) -> Optional[list]:
    if not directory.is_dir():
        return None
    flows = []
    for i in range(count):
        path = directory / f"{i:06d}.flo"
        if not path.exists():
            raise MissingGoldError(f"{directory}: нет потока для пары {i} ({path.name})")
        flows.append(read_flo(path))
    return flows


def load_dataset(directory: Union[str, Path]) -> SequenceDataset:
    """Чтение датасета из раскладки save_dataset (manifest.txt необязателен)"""
    directory = Path(directory)
    frames_dir = directory / "frames"
    if not frames_dir.is_dir():
        frames_dir = directory
    frames = [read_image(p) for p in list_frames(frames_dir)]
    if len(frames) < 2:
        raise DataError(f"{directory}: найдено {len(frames)} кадров, нужно минимум 2")

    manifest = {}
    manifest_path = directory / MANIFEST_NAME
    if manifest_path.exists():
        manifest = {k: v for k, v in dotenv_values(manifest_path).items() if v is not None}

    split = None
    if all(name in manifest for name in SPLIT_NAMES):
        split = SplitRanges(**{name: _parse_range(manifest[name], name) for name in SPLIT_NAMES})
    provenance = {
        key.split(".", 1)[1]: value for key, value in manifest.items() if key.startswith("provenance.")
    }
    return SequenceDataset(
        frames=tuple(frames),
        gold=_load_flows(directory / "gold", len(frames) - 1),
        truth=_load_flows(directory / "truth", len(frames) - 1),
        split=split,
        provenance=provenance,
    )
