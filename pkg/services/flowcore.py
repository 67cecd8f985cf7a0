"""
Базовые типы (кадр, поток, пара кадров), ввод-вывод .flo и изображений,
цветовая визуализация потока и препроцессинг
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import cv2
import numpy as np

from services.errors import (
    CorruptFileError,
    DataError,
    DimensionError,
    FlowValueError,
    FormatError,
    UnsupportedImageError,
)

logger = logging.getLogger(__name__)

# Магия Middlebury .flo: байты 'PIEH' как little-endian float32
FLO_MAGIC = np.float32(202021.25)

IMAGE_EXTENSIONS = (".png", ".tif", ".tiff", ".bmp", ".jpg", ".jpeg")


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ImageFrame:
    """Кадр: массив (H, W, C) float64, C = 1 или 3, значения в [0, 1]"""
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise DimensionError(f"кадр должен иметь форму (H, W, 1|3), получено {data.shape}")
        if data.shape[0] == 0 or data.shape[1] == 0:
            raise DimensionError(f"пустой кадр {data.shape}")
        if not np.all(np.isfinite(data)):
            raise FlowValueError("кадр содержит NaN/Inf")
        if data.min() < 0.0 or data.max() > 1.0:
            raise FlowValueError(
                f"значения кадра вне [0, 1]: [{data.min():.4g}, {data.max():.4g}]"
            )
        object.__setattr__(self, "data", _readonly(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class FlowField:
    """Плотный поток: u (вправо) и v (вниз) в пикселях, массивы (H, W)"""
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64)
        v = np.array(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise DimensionError(f"компоненты потока разной формы: {u.shape} и {v.shape}")
        if u.size == 0:
            raise DimensionError("пустой поток")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise FlowValueError("поток содержит NaN/Inf")
        object.__setattr__(self, "u", _readonly(u))
        object.__setattr__(self, "v", _readonly(v))

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @classmethod
    def from_array(cls, array: np.ndarray) -> "FlowField":
        """Из массива (H, W, 2)"""
        array = np.asarray(array)
        if array.ndim != 3 or array.shape[2] != 2:
            raise DimensionError(f"ожидался массив (H, W, 2), получено {array.shape}")
        return cls(array[:, :, 0], array[:, :, 1])

    @classmethod
    def zeros(cls, width: int, height: int) -> "FlowField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))

    @classmethod
    def constant(cls, width: int, height: int, du: float, dv: float) -> "FlowField":
        return cls(np.full((height, width), float(du)), np.full((height, width), float(dv)))

    def as_array(self) -> np.ndarray:
        return np.stack([self.u, self.v], axis=-1)


@dataclass(frozen=True, eq=False)
class FramePair:
    """Пара последовательных кадров x = (I_n, I_n+1)"""
    first: ImageFrame
    second: ImageFrame

    def __post_init__(self):
        if self.first.data.shape != self.second.data.shape:
            raise DimensionError(
                f"кадры пары разного размера: {self.first.data.shape} и {self.second.data.shape}"
            )

    @property
    def width(self) -> int:
        return self.first.width

    @property
    def height(self) -> int:
        return self.first.height


FrameOrFlow = Union[ImageFrame, FlowField]


def as_flow(flow: Union[FlowField, np.ndarray]) -> FlowField:
    """Принимает FlowField или массив (H, W, 2) и проверяет инварианты"""
    if isinstance(flow, FlowField):
        return flow
    return FlowField.from_array(flow)


def check_same_size(a: FrameOrFlow, b: FrameOrFlow, what: str = "входы") -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionError(
            f"{what}: размеры не совпадают ({a.width}x{a.height} и {b.width}x{b.height})"
        )


# --- .flo ---------------------------------------------------------------

def read_flo(path: Union[str, Path]) -> FlowField:
    """
    Чтение Middlebury .flo

    Args:
        path: путь к файлу

    Returns:
        FlowField: поток с точными сохранёнными значениями
    """
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise CorruptFileError(f"{path}: файл короче заголовка")
    magic = np.frombuffer(raw, dtype="<f4", count=1, offset=0)[0]
    if magic != FLO_MAGIC:
        raise FormatError(f"{path}: неверная магия .flo ({magic!r})")
    if len(raw) < 12:
        raise CorruptFileError(f"{path}: заголовок обрезан")
    width, height = (int(x) for x in np.frombuffer(raw, dtype="<i4", count=2, offset=4))
    if width <= 0 or height <= 0:
        raise DimensionError(f"{path}: недопустимые размеры {width}x{height}")
    expected = 12 + 8 * width * height
    if len(raw) != expected:
        raise CorruptFileError(f"{path}: ожидалось {expected} байт, в файле {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", count=2 * width * height, offset=12)
    data = data.reshape(height, width, 2)
    try:
        return FlowField(data[:, :, 0], data[:, :, 1])
    except FlowValueError as e:
        raise CorruptFileError(f"{path}: {e}") from e


def write_flo(flow: Union[FlowField, np.ndarray], path: Union[str, Path]) -> None:
    """Запись потока в .flo; побайтово обратна read_flo"""
    flow = as_flow(flow)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes()
    header += np.array([flow.width, flow.height], dtype="<i4").tobytes()
    payload = np.stack([flow.u, flow.v], axis=-1).astype("<f4").tobytes()
    path.write_bytes(header + payload)


# --- изображения ----------------------------------------------------------

def read_image(path: Union[str, Path]) -> ImageFrame:
    """
    Чтение 8/16-битного серого или RGB изображения

    Args:
        path: путь к растровому файлу

    Returns:
        ImageFrame: значения нормированы в [0, 1]
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: файл не найден")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise CorruptFileError(f"{path}: не удалось декодировать изображение")

    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise UnsupportedImageError(f"{path}: неподдерживаемая глубина {raw.dtype}")

    if raw.ndim == 3:
        if raw.shape[2] == 4:
            logger.warning("%s: альфа-канал отброшен", path)
            raw = raw[:, :, :3]
        if raw.shape[2] != 3:
            raise UnsupportedImageError(f"{path}: {raw.shape[2]} каналов")
        raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)

    return ImageFrame(raw.astype(np.float64) / scale)


def write_image(frame: ImageFrame, path: Union[str, Path], bit_depth: int = 8) -> None:
    """Запись кадра в PNG-подобный файл с глубиной 8 или 16 бит"""
    if bit_depth == 8:
        dtype, scale = np.uint8, 255.0
    elif bit_depth == 16:
        dtype, scale = np.uint16, 65535.0
    else:
        raise UnsupportedImageError(f"глубина {bit_depth} бит не поддерживается")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = np.rint(frame.data * scale).astype(dtype)
    if frame.channels == 3:
        raw = cv2.cvtColor(raw, cv2.COLOR_RGB2BGR)
    else:
        raw = raw[:, :, 0]
    if not cv2.imwrite(str(path), raw):
        raise DataError(f"{path}: не удалось записать изображение")


def list_frames(directory: Union[str, Path]) -> list[Path]:
    """Кадры с номерными именами (000000.png, 000001.png, ...) по возрастанию номера"""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: каталог кадров не найден")
    frames = [
        p for p in directory.iterdir()
        if p.suffix.lower() in IMAGE_EXTENSIONS and p.stem.isdigit()
    ]
    return sorted(frames, key=lambda p: int(p.stem))


# --- визуализация --------------------------------------------------------

def make_color_wheel() -> np.ndarray:
    """Стандартное 55-цветное колесо Middlebury, значения 0..255"""
    ry, yg, gc, cb, bm, mr = 15, 6, 4, 11, 13, 6
    wheel = np.zeros((ry + yg + gc + cb + bm + mr, 3))
    col = 0

    wheel[col:col + ry, 0] = 255
    wheel[col:col + ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry

    wheel[col:col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col:col + yg, 1] = 255
    col += yg

    wheel[col:col + gc, 1] = 255
    wheel[col:col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc

    wheel[col:col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col:col + cb, 2] = 255
    col += cb

    wheel[col:col + bm, 2] = 255
    wheel[col:col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm

    wheel[col:col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col:col + mr, 0] = 255
    return wheel


COLOR_WHEEL = make_color_wheel()


def flow_to_color(flow: FlowField, max_magnitude: Optional[float] = None) -> ImageFrame:
    """
    Цветовая кодировка потока: оттенок = направление, насыщенность = длина

    Args:
        flow: поток
        max_magnitude: нормировка длины; по умолчанию 99-й перцентиль
            (устойчиво к бликам)

    Returns:
        ImageFrame: RGB, нулевой поток белый
    """
    magnitude = np.hypot(flow.u, flow.v)
    if max_magnitude is None:
        max_magnitude = float(np.percentile(magnitude, 99))
        # движется меньше 1% пикселей: перцентиль нулевой, нормируем по максимуму
        if max_magnitude <= 0:
            max_magnitude = float(magnitude.max())
    if max_magnitude <= 0:
        return ImageFrame(np.ones((flow.height, flow.width, 3)))

    ncols = COLOR_WHEEL.shape[0]
    rad = magnitude / max_magnitude
    angle = np.arctan2(-flow.v, -flow.u) / np.pi
    fk = (angle + 1) / 2 * (ncols - 1)
    k0 = np.floor(fk).astype(int)
    k1 = k0 + 1
    k1[k1 == ncols] = 0
    f = fk - k0
    inside = rad <= 1

    image = np.empty((flow.height, flow.width, 3))
    for i in range(3):
        col0 = COLOR_WHEEL[k0, i] / 255.0
        col1 = COLOR_WHEEL[k1, i] / 255.0
        col = (1 - f) * col0 + f * col1
        col[inside] = 1 - rad[inside] * (1 - col[inside])
        col[~inside] *= 0.75
        image[:, :, i] = col
    return ImageFrame(np.clip(image, 0.0, 1.0))


# --- препроцессинг -------------------------------------------------------

def to_gray(frame: ImageFrame) -> ImageFrame:
    """Яркость по Rec.601; серый кадр возвращается как есть"""
    if frame.channels == 1:
        return frame
    luma = frame.data @ np.array([0.299, 0.587, 0.114])
    return ImageFrame(np.clip(luma, 0.0, 1.0))


def stack_pair(pair: FramePair) -> np.ndarray:
    """Вход сети: массив (2*C, H, W), каналы первого кадра, затем второго"""
    stacked = np.concatenate([pair.first.data, pair.second.data], axis=2)
    return stacked.transpose(2, 0, 1)


def crop(obj: FrameOrFlow, x0: int, y0: int, width: int, height: int) -> FrameOrFlow:
    """Вырезать окно; значения потока не меняются (смещения инвариантны к сдвигу)"""
    if x0 < 0 or y0 < 0 or width <= 0 or height <= 0 \
            or x0 + width > obj.width or y0 + height > obj.height:
        raise DimensionError(
            f"окно ({x0}, {y0}, {width}x{height}) вне {obj.width}x{obj.height}"
        )
    rows = slice(y0, y0 + height)
    cols = slice(x0, x0 + width)
    if isinstance(obj, FlowField):
        return FlowField(obj.u[rows, cols], obj.v[rows, cols])
    return ImageFrame(obj.data[rows, cols])


def crop_pair(pair: FramePair, x0: int, y0: int, width: int, height: int) -> FramePair:
    return FramePair(
        crop(pair.first, x0, y0, width, height),
        crop(pair.second, x0, y0, width, height),
    )


def center_crop_offsets(width: int, height: int, new_width: int, new_height: int) -> tuple[int, int]:
    return (width - new_width) // 2, (height - new_height) // 2


def crop_to_multiple(obj: FrameOrFlow, m: int) -> FrameOrFlow:
    """
    Центральная обрезка до размеров, кратных m

    Args:
        obj: кадр или поток
        m: кратность (64 для архитектуры сети)

    Returns:
        тот же тип размера (floor(w/m)*m, floor(h/m)*m)
    """
    if m <= 0:
        raise DimensionError(f"кратность должна быть положительной, получено {m}")
    if obj.width < m or obj.height < m:
        raise DimensionError(f"{obj.width}x{obj.height} меньше кратности {m}")
    new_width = obj.width // m * m
    new_height = obj.height // m * m
    if (new_width, new_height) == (obj.width, obj.height):
        return obj
    x0, y0 = center_crop_offsets(obj.width, obj.height, new_width, new_height)
    return crop(obj, x0, y0, new_width, new_height)
