"""
Компактная студенческая сеть оптического потока (миниатюра FlowNetS)

Архитектура при levels = L, ширинах c_l = base_width * 2^(l-1):
    conv{l}          3x3, шаг 2, ELU           -> c_l каналов, разрешение H/2^l
    predict_flow{L}  3x3 по conv{L}            -> поток H/2^L
    deconv{l}        nearest x2 + 3x3, ELU     -> c_l каналов (l = L-1 .. 1)
    concat{l}        [conv{l}, deconv{l}, 2 * up(flow{l+1})]  (2 c_l + 2 каналов)
    predict_flow{l}  3x3 по concat{l}          -> поток H/2^l
    выход            2 * билинейный up(flow1)  -> поток H x W

Потоки каждого уровня выражены в пикселях своего уровня. Все вычисления
в float64 (float32 допускается только для инференса).
"""

import logging
import struct
import zlib
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from services.errors import CheckpointError, ConfigError, DimensionError, NumericError
from services.flowcore import FlowField, FramePair, stack_pair, to_gray
from services.metrics import MultiScaleFlow, gold_for_level, multiscale_l1_arrays

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"FDCK"
CHECKPOINT_VERSION = 1
LITTLE_ENDIAN = 1


@dataclass(frozen=True)
class NetConfig:
    """Сложность студента: входные каналы, ширина первого уровня, число уровней, seed"""
    input_channels: int = 2
    base_width: int = 16
    levels: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.input_channels not in (2, 6):
            raise ConfigError(f"input_channels должно быть 2 или 6, получено {self.input_channels}")
        if self.levels < 2:
            raise ConfigError(f"levels должно быть >= 2, получено {self.levels}")
        if self.base_width < 4:
            raise ConfigError(f"base_width должно быть >= 4, получено {self.base_width}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed вне диапазона uint64: {self.seed}")

    @property
    def widths(self) -> list[int]:
        return [self.base_width * 2 ** i for i in range(self.levels)]

    @property
    def n_scales(self) -> int:
        return self.levels + 1

    @property
    def multiple(self) -> int:
        """Размеры входа должны делиться на это число"""
        return 2 ** self.levels

    def concat_channels(self, level: int) -> int:
        width = self.widths[level - 1]
        return width if level == self.levels else 2 * width + 2

    def param_shapes(self) -> dict[str, tuple]:
        shapes = {}
        in_channels = self.input_channels
        for level, width in enumerate(self.widths, start=1):
            shapes[f"conv{level}.weight"] = (width, in_channels, 3, 3)
            shapes[f"conv{level}.bias"] = (width,)
            in_channels = width
        for level in range(self.levels - 1, 0, -1):
            width = self.widths[level - 1]
            shapes[f"deconv{level}.weight"] = (width, self.concat_channels(level + 1), 3, 3)
            shapes[f"deconv{level}.bias"] = (width,)
        for level in range(self.levels, 0, -1):
            shapes[f"predict_flow{level}.weight"] = (2, self.concat_channels(level), 3, 3)
            shapes[f"predict_flow{level}.bias"] = (2,)
        return shapes


def heavy_config(config: NetConfig) -> NetConfig:
    """Медленная эталонная конфигурация: ширина x3, примерно в 9 раз больше параметров"""
    return replace(config, base_width=config.base_width * 3)


@dataclass(eq=False)
class StudentNet:
    config: NetConfig
    params: dict = field(default_factory=dict)

    @property
    def param_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> "StudentNet":
        return StudentNet(self.config, {k: v.copy() for k, v in self.params.items()})


@dataclass
class OptimizerState:
    """Adam: моменты по параметрам, счётчик шагов и гиперпараметры"""
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


# --- инициализация -------------------------------------------------------

def init(config: NetConfig) -> StudentNet:
    """
    Детерминированная инициализация из seed

    Ядра ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), смещения нулевые.
    """
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in config.param_shapes().items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / np.sqrt(shape[1] * shape[2] * shape[3])
            params[name] = rng.uniform(-bound, bound, size=shape)
    net = StudentNet(config, params)
    logger.debug("Инициализирована сеть: %d параметров", net.param_count)
    return net


# --- примитивы -----------------------------------------------------------

def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, stride: int) -> np.ndarray:
    """Свёртка 3x3 с нулевым паддингом 1; x (N, C, H, W)"""
    n, _, height, width = x.shape
    out_h, out_w = height // stride, width // stride
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    out = np.zeros((weight.shape[0], n, out_h, out_w), dtype=x.dtype)
    for i in range(3):
        for j in range(3):
            patch = padded[:, :, i:i + stride * out_h:stride, j:j + stride * out_w:stride]
            out += np.tensordot(weight[:, :, i, j], patch, axes=([1], [1]))
    out += bias[:, None, None, None]
    return np.ascontiguousarray(out.transpose(1, 0, 2, 3))


def conv2d_backward(grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray, stride: int,
                    need_input_grad: bool = True):
    """Градиенты свёртки: (по входу или None, по ядру, по смещению)"""
    _, _, out_h, out_w = grad_out.shape
    padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    g = grad_out.transpose(1, 0, 2, 3)
    grad_w = np.empty_like(weight)
    grad_padded = np.zeros_like(padded) if need_input_grad else None
    for i in range(3):
        for j in range(3):
            rows = slice(i, i + stride * out_h, stride)
            cols = slice(j, j + stride * out_w, stride)
            grad_w[:, :, i, j] = np.tensordot(g, padded[:, :, rows, cols], axes=([1, 2, 3], [0, 2, 3]))
            if need_input_grad:
                grad_padded[:, :, rows, cols] += \
                    np.tensordot(weight[:, :, i, j], g, axes=([0], [0])).transpose(1, 0, 2, 3)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    grad_x = grad_padded[:, :, 1:-1, 1:-1] if need_input_grad else None
    return grad_x, grad_w, grad_b


def elu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0)))


def elu_grad(z: np.ndarray, a: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, a + 1.0)


def upsample_nearest(x: np.ndarray) -> np.ndarray:
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def upsample_nearest_backward(g: np.ndarray) -> np.ndarray:
    n, c, height, width = g.shape
    return g.reshape(n, c, height // 2, 2, width // 2, 2).sum(axis=(3, 5))


@lru_cache(maxsize=None)
def _upsample_matrix(size: int) -> np.ndarray:
    """Матрица (2n, n) билинейного увеличения x2 (центры пикселей, зажатие у края)"""
    matrix = np.zeros((2 * size, size))
    src = np.clip((np.arange(2 * size) + 0.5) / 2 - 0.5, 0, size - 1)
    i0 = np.minimum(np.floor(src).astype(int), max(size - 2, 0))
    i1 = np.minimum(i0 + 1, size - 1)
    frac = src - i0
    rows = np.arange(2 * size)
    np.add.at(matrix, (rows, i0), 1 - frac)
    np.add.at(matrix, (rows, i1), frac)
    matrix.setflags(write=False)
    return matrix


def upsample_bilinear(x: np.ndarray) -> np.ndarray:
    mh = _upsample_matrix(x.shape[2]).astype(x.dtype, copy=False)
    mw = _upsample_matrix(x.shape[3]).astype(x.dtype, copy=False)
    return np.matmul(np.matmul(mh, x), mw.T)


def upsample_bilinear_backward(g: np.ndarray) -> np.ndarray:
    mh = _upsample_matrix(g.shape[2] // 2)
    mw = _upsample_matrix(g.shape[3] // 2)
    return np.matmul(np.matmul(mh.T, g), mw)


# --- прямой и обратный проход -------------------------------------------

def pair_input(pair: FramePair, config: NetConfig) -> np.ndarray:
    """Пара кадров -> вход сети (C_in, H, W), центрированный вокруг нуля"""
    if config.input_channels == 2 and pair.first.channels == 3:
        pair = FramePair(to_gray(pair.first), to_gray(pair.second))
    x = stack_pair(pair)
    if config.input_channels == 6 and x.shape[0] == 2:
        x = np.repeat(x, 3, axis=0)
    if x.shape[0] != config.input_channels:
        raise DimensionError(f"ожидалось {config.input_channels} входных каналов, получено {x.shape[0]}")
    return x - 0.5


def _check_input(x: np.ndarray, config: NetConfig) -> None:
    height, width = x.shape[-2:]
    if height % config.multiple or width % config.multiple:
        raise DimensionError(
            f"размер {width}x{height} не кратен {config.multiple}; используйте crop_to_multiple"
        )
    if x.shape[1] != config.input_channels:
        raise DimensionError(f"ожидалось {config.input_channels} входных каналов, получено {x.shape[1]}")


def _forward_arrays(params: dict, config: NetConfig, x: np.ndarray, keep_cache: bool = False):
    """Прямой проход по батчу x (N, C_in, H, W): список уровней от грубого к точному"""
    levels = config.levels
    cache = {"x": x, "enc_z": {}, "enc_a": {}, "feats": {}, "up_in": {}, "up_z": {}, "up_a": {}}

    act = x
    for level in range(1, levels + 1):
        z = conv2d(act, params[f"conv{level}.weight"], params[f"conv{level}.bias"], 2)
        act = elu(z)
        cache["enc_z"][level] = z
        cache["enc_a"][level] = act

    feats = {levels: cache["enc_a"][levels]}
    flows = {levels: conv2d(feats[levels], params[f"predict_flow{levels}.weight"],
                            params[f"predict_flow{levels}.bias"], 1)}
    for level in range(levels - 1, 0, -1):
        up_in = upsample_nearest(feats[level + 1])
        up_z = conv2d(up_in, params[f"deconv{level}.weight"], params[f"deconv{level}.bias"], 1)
        up_a = elu(up_z)
        flow_up = 2 * upsample_bilinear(flows[level + 1])
        feats[level] = np.concatenate([cache["enc_a"][level], up_a, flow_up], axis=1)
        flows[level] = conv2d(feats[level], params[f"predict_flow{level}.weight"],
                              params[f"predict_flow{level}.bias"], 1)
        cache["up_in"][level] = up_in
        cache["up_z"][level] = up_z
        cache["up_a"][level] = up_a

    preds = [flows[level] for level in range(levels, 0, -1)]
    preds.append(2 * upsample_bilinear(flows[1]))
    if keep_cache:
        cache["feats"] = feats
        return preds, cache
    return preds, None


def _backward_arrays(params: dict, config: NetConfig, cache: dict, grad_preds: list) -> dict:
    levels = config.levels
    grads = {}
    g_flow = {levels - i: grad_preds[i] for i in range(levels)}
    g_flow[1] = g_flow[1] + 2 * upsample_bilinear_backward(grad_preds[levels])
    g_feat = {}
    g_enc = {level: np.zeros_like(a) for level, a in cache["enc_a"].items()}

    for level in range(1, levels):
        width = config.widths[level - 1]
        gx, gw, gb = conv2d_backward(g_flow[level], cache["feats"][level],
                                     params[f"predict_flow{level}.weight"], 1)
        grads[f"predict_flow{level}.weight"], grads[f"predict_flow{level}.bias"] = gw, gb
        if level in g_feat:
            gx = gx + g_feat[level]
        g_enc[level] += gx[:, :width]
        g_up = gx[:, width:2 * width]
        g_flow[level + 1] = g_flow[level + 1] + 2 * upsample_bilinear_backward(gx[:, 2 * width:])

        g_z = g_up * elu_grad(cache["up_z"][level], cache["up_a"][level])
        g_in, gw, gb = conv2d_backward(g_z, cache["up_in"][level], params[f"deconv{level}.weight"], 1)
        grads[f"deconv{level}.weight"], grads[f"deconv{level}.bias"] = gw, gb
        g_feat[level + 1] = g_feat.get(level + 1, 0) + upsample_nearest_backward(g_in)

    gx, gw, gb = conv2d_backward(g_flow[levels], cache["feats"][levels],
                                 params[f"predict_flow{levels}.weight"], 1)
    grads[f"predict_flow{levels}.weight"], grads[f"predict_flow{levels}.bias"] = gw, gb
    g_enc[levels] += gx + g_feat.get(levels, 0)

    g_act = g_enc[levels]
    for level in range(levels, 0, -1):
        g_z = g_act * elu_grad(cache["enc_z"][level], cache["enc_a"][level])
        inputs = cache["x"] if level == 1 else cache["enc_a"][level - 1]
        g_in, gw, gb = conv2d_backward(g_z, inputs, params[f"conv{level}.weight"], 2,
                                       need_input_grad=level > 1)
        grads[f"conv{level}.weight"], grads[f"conv{level}.bias"] = gw, gb
        if level > 1:
            g_act = g_enc[level - 1] + g_in

    return {name: grads[name] for name in params}


def _to_multiscale(preds: list, index: int = 0) -> MultiScaleFlow:
    return MultiScaleFlow(tuple(FlowField(p[index, 0], p[index, 1]) for p in preds))


def forward(net: StudentNet, pair: FramePair) -> MultiScaleFlow:
    """
    Прямой проход g_theta(x)

    Args:
        net: сеть
        pair: пара кадров с размерами, кратными 2^levels

    Returns:
        MultiScaleFlow: levels + 1 уровней, последний в разрешении входа
    """
    x = pair_input(pair, net.config)[None]
    _check_input(x, net.config)
    preds, _ = _forward_arrays(net.params, net.config, x)
    return _to_multiscale(preds)


def predict_flow(net: StudentNet, pair: FramePair, dtype=np.float64) -> FlowField:
    """Поток в разрешении входа; float32 - только для замеров скорости"""
    x = pair_input(pair, net.config)[None].astype(dtype)
    _check_input(x, net.config)
    params = net.params if dtype == np.float64 \
        else {k: v.astype(dtype) for k, v in net.params.items()}
    preds, _ = _forward_arrays(params, net.config, x)
    final = preds[-1][0].astype(np.float64)
    return FlowField(final[0], final[1])


def batch_loss(net: StudentNet, inputs: np.ndarray, golds: np.ndarray,
               weights: Optional[Sequence[float]] = None) -> float:
    """Средняя по батчу многомасштабная L1 (без градиентов, для валидации)"""
    _check_input(inputs, net.config)
    preds, _ = _forward_arrays(net.params, net.config, inputs)
    return _mean_sample_loss(preds, golds, weights)


def _mean_sample_loss(preds: list, golds: np.ndarray, weights) -> float:
    n = golds.shape[0]
    total = 0.0
    for k in range(n):
        total += multiscale_l1_arrays([p[k] for p in preds], golds[k], weights)
    return total / n


def backward_batch(net: StudentNet, inputs: np.ndarray, golds: np.ndarray,
                   weights: Optional[Sequence[float]] = None):
    """
    Потери и точные градиенты по батчу

    Args:
        net: сеть
        inputs: (N, C_in, H, W)
        golds: (N, 2, H, W) gold truth
        weights: веса масштабов (по умолчанию равные)

    Returns:
        tuple: (loss, grads) - loss как среднее по батчу, grads по имени параметра
    """
    config = net.config
    _check_input(inputs, config)
    if golds.shape[0] != inputs.shape[0] or golds.shape[1] != 2 \
            or golds.shape[2:] != inputs.shape[2:]:
        raise DimensionError(f"gold {golds.shape} не соответствует входу {inputs.shape}")
    weights = [1.0] * config.n_scales if weights is None else list(weights)
    if len(weights) != config.n_scales:
        raise DimensionError(f"весов {len(weights)}, а масштабов {config.n_scales}")

    preds, cache = _forward_arrays(net.params, config, inputs, keep_cache=True)
    loss = _mean_sample_loss(preds, golds, weights)
    if not np.isfinite(loss):
        raise NumericError("функция потерь не конечна")

    n = inputs.shape[0]
    grad_preds = []
    for weight, pred in zip(weights, preds):
        height, width = pred.shape[-2:]
        target = gold_for_level(golds, height, width)
        grad_preds.append(weight * np.sign(pred - target) / (n * height * width))
    return loss, _backward_arrays(net.params, config, cache, grad_preds)


def backward(net: StudentNet, pair: FramePair, gold: FlowField,
             weights: Optional[Sequence[float]] = None):
    """Потери и градиенты для одной пары"""
    inputs = pair_input(pair, net.config)[None]
    golds = np.stack([gold.u, gold.v])[None]
    return backward_batch(net, inputs, golds, weights)


def gradient_check(net: StudentNet, pair: FramePair, gold: FlowField,
                   weights: Optional[Sequence[float]] = None, h: float = 1e-4) -> dict[str, float]:
    """
    Сверка аналитических градиентов с центральными разностями

    Returns:
        dict: относительная ошибка ||a - n|| / max(||a||, ||n||) по каждому параметру
    """
    inputs = pair_input(pair, net.config)[None]
    golds = np.stack([gold.u, gold.v])[None]
    _, analytic = backward_batch(net, inputs, golds, weights)

    errors = {}
    for name, value in net.params.items():
        numeric = np.empty_like(value)
        for idx in np.ndindex(value.shape):
            original = value[idx]
            value[idx] = original + h
            plus = batch_loss(net, inputs, golds, weights)
            value[idx] = original - h
            minus = batch_loss(net, inputs, golds, weights)
            value[idx] = original
            numeric[idx] = (plus - minus) / (2 * h)
        scale = max(np.linalg.norm(analytic[name]), np.linalg.norm(numeric), 1e-12)
        errors[name] = float(np.linalg.norm(analytic[name] - numeric) / scale)
    return errors


# --- оптимизатор ---------------------------------------------------------

def init_optimizer(net: StudentNet, learning_rate: float = 1e-4, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8,
                   weight_decay: float = 0.0) -> OptimizerState:
    return OptimizerState(
        learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon,
        weight_decay=weight_decay,
        m={k: np.zeros_like(v) for k, v in net.params.items()},
        v={k: np.zeros_like(v) for k, v in net.params.items()},
    )


def adam_update(params: dict, grads: dict, state: OptimizerState):
    """Шаг Adam с коррекцией смещения; возвращает новые параметры и состояние"""
    if set(grads) != set(params):
        raise DimensionError("набор градиентов не совпадает с параметрами")
    step = state.step + 1
    bias1 = 1 - state.beta1 ** step
    bias2 = 1 - state.beta2 ** step
    new_params, new_m, new_v = {}, {}, {}
    for name, value in params.items():
        grad = grads[name]
        if np.shape(grad) != np.shape(value):
            raise DimensionError(f"{name}: градиент {np.shape(grad)} вместо {np.shape(value)}")
        m = state.beta1 * state.m.get(name, 0.0) + (1 - state.beta1) * grad
        v = state.beta2 * state.v.get(name, 0.0) + (1 - state.beta2) * grad * grad
        update = state.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon)
        updated = value - update
        if state.weight_decay:
            updated = updated - state.learning_rate * state.weight_decay * value
        new_params[name], new_m[name], new_v[name] = updated, m, v
    return new_params, replace(state, step=step, m=new_m, v=new_v)


def optimizer_step(net: StudentNet, grads: dict, state: OptimizerState):
    """Один шаг оптимизации: (новая сеть, новое состояние)"""
    params, state = adam_update(net.params, grads, state)
    if not all(np.all(np.isfinite(p)) for p in params.values()):
        raise NumericError(f"NaN/Inf в параметрах после шага {state.step}")
    return StudentNet(net.config, params), state


# --- чекпоинты -----------------------------------------------------------

def save_checkpoint(net: StudentNet, path: Union[str, Path]) -> None:
    """
    Формат (little-endian):
        'FDCK' | версия u16 | порядок байт u8 (1 = LE) | резерв u8
        input_channels u32 | base_width u32 | levels u32 | seed u64
        число параметров u32
        для каждого: длина имени u16, имя utf-8, ndim u8, размеры u32..., данные f64
        CRC32 всего предыдущего u32
    """
    config = net.config
    chunks = [
        struct.pack("<4sHBB", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, LITTLE_ENDIAN, 0),
        struct.pack("<IIIQ", config.input_channels, config.base_width, config.levels, config.seed),
        struct.pack("<I", len(net.params)),
    ]
    for name, value in net.params.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack(f"<B{value.ndim}I", value.ndim, *value.shape))
        chunks.append(np.ascontiguousarray(value, dtype="<f8").tobytes())
    body = b"".join(chunks)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    logger.info("Чекпоинт сохранён: %s", path)


def _validate_shapes(params: dict, config: NetConfig) -> None:
    expected = config.param_shapes()
    for name, shape in expected.items():
        if name not in params:
            raise CheckpointError(f"параметр {name} отсутствует в чекпоинте")
        if params[name].shape != shape:
            raise CheckpointError(
                f"параметр {name}: форма {params[name].shape}, ожидалась {shape}"
            )
    extra = sorted(set(params) - set(expected))
    if extra:
        raise CheckpointError(f"лишний параметр {extra[0]} в чекпоинте")


def load_checkpoint(path: Union[str, Path], config: Optional[NetConfig] = None) -> StudentNet:
    """
    Загрузка чекпоинта

    Args:
        path: файл чекпоинта
        config: ожидаемая конфигурация; при несовпадении форм - ошибка с именем параметра

    Returns:
        StudentNet: побитово те же параметры
    """
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: неверная магия чекпоинта")
    _, version, byte_order, _ = struct.unpack_from("<4sHBB", raw, 0)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: версия {version} не поддерживается")
    if byte_order != LITTLE_ENDIAN:
        raise CheckpointError(f"{path}: неизвестный порядок байт {byte_order}")
    body, (crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError(f"{path}: контрольная сумма не совпадает (файл повреждён)")

    try:
        offset = 8
        channels, base_width, levels, seed = struct.unpack_from("<IIIQ", body, offset)
        offset += struct.calcsize("<IIIQ")
        (count,) = struct.unpack_from("<I", body, offset)
        offset += 4
        params = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", body, offset)
            offset += 2
            name = body[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", body, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", body, offset)
            offset += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            data = np.frombuffer(body, dtype="<f8", count=size, offset=offset)
            offset += 8 * size
            params[name] = data.astype(np.float64).reshape(shape)
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"{path}: повреждённая таблица параметров ({e})") from e
    if offset != len(body):
        raise CheckpointError(f"{path}: лишние байты после таблицы параметров")

    stored = NetConfig(channels, base_width, levels, seed)
    _validate_shapes(params, config if config is not None else stored)
    if config is not None and config != stored:
        logger.warning("Конфигурация чекпоинта %s отличается от ожидаемой %s", stored, config)
    return StudentNet(stored, params)
