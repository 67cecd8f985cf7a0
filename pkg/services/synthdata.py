"""
Синтетические "пациенты" с точным потоком

Кадр n рисуется выборкой из неподвижной базовой текстуры через
накопленное обратное отображение M_n^-1 (без цепочки пересэмплирований),
поэтому межкадровый поток M_n+1(M_n^-1(x)) - x известен точно. Освещение
накладывается после варпинга и на поток не влияет.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter, map_coordinates, spline_filter

from services.distill import SequenceDataset, SplitRanges
from services.errors import ConfigError, DataError
from services.flowcore import FlowField, ImageFrame

logger = logging.getLogger(__name__)

TEXTURES = ("dense-perlin", "sparse-blobs", "tissue-like")
MOTIONS = ("rotation", "scale", "translation", "deformation", "composite")
ILLUMINATIONS = ("none", "vignette", "gain-ramp", "specular")
SCHEDULES = ("linear", "loop")

# отступ базовой текстуры вокруг кадра; за ним текстура зеркалится
TEXTURE_MARGIN = 32
SPARSE_BACKGROUND = 0.5
SPARSE_BLOB_SIGMA = 1.2
SPARSE_BLOB_AMPLITUDE = 0.3
MIN_VISIBLE_FRACTION = 0.9
TISSUE_TINT = (1.0, 0.62, 0.55)


@dataclass(frozen=True)
class SceneSpec:
    """
    Описание синтетической сцены

    motion выбирает активные параметры движения; composite включает все.
    Скорости заданы на кадр: rotation_deg в градусах, scale_factor как
    множитель, translation в пикселях, bump_drift в пикселях.
    """
    texture: str = "dense-perlin"
    texture_density: float = 0.002
    texture_octaves: int = 4
    motion: str = "rotation"
    rotation_deg: float = 0.0
    scale_factor: float = 1.0
    translation: tuple = (0.0, 0.0)
    bump_amplitude: float = 0.0
    bump_sigma: float = 24.0
    bump_count: int = 0
    bump_drift: float = 0.3
    bump_period: float = 40.0
    center: Optional[tuple] = None
    schedule: str = "linear"
    illumination: str = "none"
    vignette_strength: float = 0.5
    gain_factor: float = 0.97
    gain_period: int = 16
    specular_count: int = 3
    specular_radius: float = 4.0
    specular_intensity: float = 0.6
    frames: int = 221
    size: tuple = (256, 192)
    color: bool = False
    seed: int = 7

    def __post_init__(self):
        for value, allowed, name in ((self.texture, TEXTURES, "texture"), (self.motion, MOTIONS, "motion"),
                                     (self.illumination, ILLUMINATIONS, "illumination"),
                                     (self.schedule, SCHEDULES, "schedule")):
            if value not in allowed:
                raise ConfigError(f"{name}: неизвестное значение {value!r}, допустимо {', '.join(allowed)}")
        if self.frames < 2:
            raise ConfigError(f"нужно минимум 2 кадра, получено {self.frames}")
        if len(self.size) != 2 or min(self.size) < 16:
            raise ConfigError(f"размер кадра слишком мал: {self.size}")
        if self.scale_factor <= 0:
            raise ConfigError(f"scale_factor должен быть > 0, получено {self.scale_factor}")
        if self.bump_count and self.bump_sigma <= 0:
            raise ConfigError("bump_sigma должна быть > 0")
        # обратимость деформации: сумма констант Липшица бугров меньше 1
        if self.bump_count * abs(self.bump_amplitude) * math.exp(-0.5) / max(self.bump_sigma, 1e-12) >= 1:
            raise ConfigError("деформация необратима: уменьшите bump_amplitude или увеличьте bump_sigma")

    @property
    def width(self) -> int:
        return int(self.size[0])

    @property
    def height(self) -> int:
        return int(self.size[1])


# --- текстуры ------------------------------------------------------------

def _normalize(z: np.ndarray, low: float, high: float) -> np.ndarray:
    z = z - z.min()
    peak = z.max()
    return low + (high - low) * (z / peak if peak > 0 else z)


def _octave_noise(shape: tuple, octaves: int, rng: np.random.Generator) -> np.ndarray:
    total = np.zeros(shape)
    for k in range(octaves):
        sigma = max(12.0 / 2 ** k, 2.0)
        total += 0.5 ** k * gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return total


def make_texture(spec: SceneSpec, width: int, height: int, rng: np.random.Generator) -> np.ndarray:
    """Базовая текстура (height, width) в [0, 1]"""
    shape = (height, width)
    if spec.texture == "dense-perlin":
        return _normalize(_octave_noise(shape, spec.texture_octaves, rng), 0.1, 0.9)

    if spec.texture == "sparse-blobs":
        count = int(round(spec.texture_density * width * height))
        image = np.zeros(shape)
        ys = rng.integers(0, height, size=count)
        xs = rng.integers(0, width, size=count)
        signs = rng.choice([-1.0, 1.0], size=count)
        np.add.at(image, (ys, xs), signs)
        blobs = gaussian_filter(image, SPARSE_BLOB_SIGMA, mode="wrap") * (2 * np.pi * SPARSE_BLOB_SIGMA ** 2)
        return np.clip(SPARSE_BACKGROUND + SPARSE_BLOB_AMPLITUDE * blobs, 0.0, 1.0)

    # tissue-like: мягкий фон и тёмные "сосуды" вдоль нулевых линий гладкого шума
    base = _normalize(_octave_noise(shape, spec.texture_octaves, rng), 0.0, 1.0)
    field = gaussian_filter(rng.standard_normal(shape), 6.0, mode="wrap")
    field /= field.std()
    vessels = np.exp(-(field / 0.15) ** 2)
    return np.clip(0.35 + 0.45 * base - 0.25 * vessels, 0.0, 1.0)


# --- движение ------------------------------------------------------------

def schedule_values(spec: SceneSpec) -> np.ndarray:
    """Накопленный параметр движения p_n для каждого кадра"""
    n = np.arange(spec.frames, dtype=np.float64)
    if spec.schedule == "linear":
        return n
    period = spec.frames - 1
    return period / (2 * np.pi) * np.sin(2 * np.pi * n / period)


class _MotionModel:
    """M_p(X) = S_p(X + D_p(X)): деформация в координатах текстуры, затем подобие"""

    def __init__(self, spec: SceneSpec, rng: np.random.Generator):
        active = spec.motion
        everything = active == "composite"
        self.theta = math.radians(spec.rotation_deg) if everything or active == "rotation" else 0.0
        self.log_scale = math.log(spec.scale_factor) if everything or active == "scale" else 0.0
        self.shift = np.array(spec.translation, dtype=np.float64) \
            if everything or active == "translation" else np.zeros(2)
        if spec.center is None:
            self.center = np.array([(spec.width - 1) / 2, (spec.height - 1) / 2])
        else:
            self.center = np.array(spec.center, dtype=np.float64)

        use_bumps = everything or active == "deformation"
        count = spec.bump_count if use_bumps else 0
        self.amplitude = spec.bump_amplitude
        self.sigma = spec.bump_sigma
        self.period = spec.bump_period
        self.bump_centers = np.column_stack([
            rng.uniform(0.2, 0.8, size=count) * spec.width,
            rng.uniform(0.2, 0.8, size=count) * spec.height,
        ])
        angles = rng.uniform(0, 2 * np.pi, size=count)
        self.bump_dirs = np.column_stack([np.cos(angles), np.sin(angles)])
        drift_angles = rng.uniform(0, 2 * np.pi, size=count)
        self.bump_drift = spec.bump_drift * np.column_stack([np.cos(drift_angles), np.sin(drift_angles)])
        self.bump_phase = rng.uniform(0, 2 * np.pi, size=count)

    def _displacement(self, p: float, x: np.ndarray, y: np.ndarray):
        dx = np.zeros_like(x)
        dy = np.zeros_like(y)
        for k in range(len(self.bump_centers)):
            cx, cy = self.bump_centers[k] + self.bump_drift[k] * p
            a = self.amplitude * math.sin(2 * np.pi * p / self.period + self.bump_phase[k])
            g = a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * self.sigma ** 2))
            dx += g * self.bump_dirs[k, 0]
            dy += g * self.bump_dirs[k, 1]
        return dx, dy

    def forward(self, p: float, x: np.ndarray, y: np.ndarray):
        dx, dy = self._displacement(p, x, y)
        x, y = x + dx, y + dy
        s = math.exp(self.log_scale * p)
        c, sn = math.cos(self.theta * p), math.sin(self.theta * p)
        rx, ry = x - self.center[0], y - self.center[1]
        return (self.center[0] + s * (c * rx - sn * ry) + self.shift[0] * p,
                self.center[1] + s * (sn * rx + c * ry) + self.shift[1] * p)

    def inverse(self, p: float, x: np.ndarray, y: np.ndarray, iterations: int = 60):
        s = math.exp(-self.log_scale * p)
        c, sn = math.cos(self.theta * p), math.sin(self.theta * p)
        rx = x - self.shift[0] * p - self.center[0]
        ry = y - self.shift[1] * p - self.center[1]
        ux = self.center[0] + s * (c * rx + sn * ry)
        uy = self.center[1] + s * (-sn * rx + c * ry)
        if not len(self.bump_centers):
            return ux, uy
        # X = u - D_p(X): сжимающее отображение
        bx, by = ux.copy(), uy.copy()
        for _ in range(iterations):
            dx, dy = self._displacement(p, bx, by)
            nx, ny = ux - dx, uy - dy
            change = max(np.max(np.abs(nx - bx)), np.max(np.abs(ny - by)))
            bx, by = nx, ny
            if change < 1e-12:
                break
        return bx, by


# --- освещение -----------------------------------------------------------

def _illumination(spec: SceneSpec, frames: list, rng: np.random.Generator) -> list:
    if spec.illumination == "none":
        return frames
    height, width = frames[0].shape[:2]
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)

    if spec.illumination == "vignette":
        cx, cy = (width - 1) / 2, (height - 1) / 2
        r2 = ((xs - cx) ** 2 + (ys - cy) ** 2) / (cx ** 2 + cy ** 2)
        mask = (1 - spec.vignette_strength * r2)[..., None]
        return [np.clip(f * mask, 0.0, 1.0) for f in frames]

    if spec.illumination == "gain-ramp":
        half = spec.gain_period / 2
        out = []
        for n, f in enumerate(frames):
            phase = n % spec.gain_period
            exponent = phase if phase <= half else spec.gain_period - phase
            out.append(np.clip(f * spec.gain_factor ** exponent, 0.0, 1.0))
        return out

    # specular: блики блуждают независимо от движения ткани
    positions = np.column_stack([rng.uniform(0, width, spec.specular_count),
                                 rng.uniform(0, height, spec.specular_count)])
    out = []
    for f in frames:
        glare = np.zeros((height, width))
        for px, py in positions:
            glare += np.exp(-((xs - px) ** 2 + (ys - py) ** 2) / (2 * spec.specular_radius ** 2))
        out.append(np.clip(f + spec.specular_intensity * glare[..., None], 0.0, 1.0))
        positions = positions + rng.normal(0, 1.5, size=positions.shape)
        positions[:, 0] = np.clip(positions[:, 0], 0, width - 1)
        positions[:, 1] = np.clip(positions[:, 1], 0, height - 1)
    return out


# --- генерация -----------------------------------------------------------

def generate_sequence(spec: SceneSpec) -> tuple[list, list]:
    """
    Рендер последовательности и точных межкадровых потоков

    Args:
        spec: описание сцены

    Returns:
        tuple: (кадры ImageFrame, потоки FlowField n -> n+1)
    """
    texture_seed, motion_seed, light_seed = np.random.SeedSequence(spec.seed).spawn(3)
    width, height = spec.width, spec.height
    margin = TEXTURE_MARGIN

    texture = make_texture(spec, width + 2 * margin, height + 2 * margin, np.random.default_rng(texture_seed))
    coefficients = spline_filter(texture, order=3, mode="mirror")
    motion = _MotionModel(spec, np.random.default_rng(motion_seed))
    p = schedule_values(spec)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)

    raw_frames = []
    flows = []
    source = None
    for n in range(spec.frames):
        bx, by = motion.inverse(p[n], xs, ys)
        image = map_coordinates(coefficients, [by + margin, bx + margin], order=3,
                                mode="mirror", prefilter=False)
        raw_frames.append(np.clip(image, 0.0, 1.0)[..., None])
        if source is not None:
            fx, fy = motion.forward(p[n], *source)
            flow = FlowField(fx - xs, fy - ys)
            visible = np.mean((fx >= 0) & (fx <= width - 1) & (fy >= 0) & (fy <= height - 1))
            if visible < MIN_VISIBLE_FRACTION:
                raise DataError(
                    f"пара {n - 1}: видимо только {visible:.0%} пикселей, уменьшите скорость движения"
                )
            flows.append(flow)
        source = (bx, by)

    lit = _illumination(spec, raw_frames, np.random.default_rng(light_seed))
    if spec.color:
        tint = np.array(TISSUE_TINT)
        lit = [np.clip(f * tint, 0.0, 1.0) for f in lit]
    frames = [ImageFrame(f) for f in lit]
    logger.info("Сгенерировано %d кадров %dx%d (%s, %s, %s)", len(frames), width, height,
                spec.texture, spec.motion, spec.illumination)
    return frames, flows


# --- режимы --------------------------------------------------------------

REGIMES = ("rotation", "scale", "sparse", "deformation", "generic", "loop")

# train/val/test пар, пропорции как в исходных последовательностях, 220 пар
REGIME_SPLITS = {
    "rotation": (120, 40, 60),
    "scale": (107, 43, 70),
    "sparse": (109, 27, 84),
    "deformation": (147, 49, 24),
    "generic": (180, 40, 0),
    "loop": (0, 0, 99),
}

SUITE_REGIMES = ("rotation", "scale", "sparse", "deformation")


def regime_spec(regime: str, seed: int, illumination: Optional[str] = None,
                frames: Optional[int] = None, size: Optional[tuple] = None) -> SceneSpec:
    """SceneSpec режима; illumination/frames/size переопределяют значения режима"""
    if regime == "rotation":
        spec = SceneSpec(texture="dense-perlin", motion="rotation", rotation_deg=0.8)
    elif regime == "scale":
        spec = SceneSpec(texture="dense-perlin", motion="scale", scale_factor=1.004)
    elif regime == "sparse":
        spec = SceneSpec(texture="sparse-blobs", motion="translation", translation=(1.0, 0.5),
                         illumination="vignette")
    elif regime == "deformation":
        spec = SceneSpec(texture="tissue-like", motion="deformation", bump_amplitude=4.0,
                         bump_sigma=20.0, bump_count=4)
    elif regime == "generic":
        # другой домен: смешанное движение и отдельный seed
        spec = SceneSpec(texture="tissue-like", motion="composite", rotation_deg=-0.4,
                         scale_factor=1.001, translation=(0.6, -0.4), bump_amplitude=2.0,
                         bump_sigma=24.0, bump_count=3)
        seed = seed + 1000
    elif regime == "loop":
        spec = SceneSpec(texture="dense-perlin", motion="composite", rotation_deg=0.5,
                         translation=(0.3, 0.2), schedule="loop", frames=100)
    else:
        raise ConfigError(f"неизвестный режим {regime!r}, допустимо: {', '.join(REGIMES)}")

    if frames is None:
        frames = spec.frames if regime == "loop" else sum(REGIME_SPLITS[regime]) + 1
    changes = {"seed": seed, "frames": frames}
    if illumination is not None:
        changes["illumination"] = illumination
    if size is not None:
        changes["size"] = tuple(size)
    return replace(spec, **changes)


def _scaled_split(regime: str, n_pairs: int) -> tuple:
    n_train, n_val, n_test = REGIME_SPLITS[regime]
    total = n_train + n_val + n_test
    if n_pairs >= total:
        return n_train, n_val, n_test
    train = int(n_train * n_pairs / total)
    val = int(n_val * n_pairs / total)
    return train, val, n_pairs - train - val if n_test else 0


def make_regime_dataset(regime: str, seed: int, illumination: Optional[str] = None,
                        frames: Optional[int] = None, size: Optional[tuple] = None) -> SequenceDataset:
    """
    Датасет одного режима: кадры, точный поток (truth) и разбиение

    Gold отсутствует; его добавляет generate_gold.
    """
    spec = regime_spec(regime, seed, illumination, frames, size)
    images, flows = generate_sequence(spec)
    n_train, n_val, n_test = _scaled_split(regime, len(flows))
    split = SplitRanges(train=(0, n_train), val=(n_train, n_train + n_val),
                        test=(n_train + n_val, n_train + n_val + n_test))
    provenance = {
        "regime": regime,
        "seed": seed,
        "texture": spec.texture,
        "motion": spec.motion,
        "illumination": spec.illumination,
        "schedule": spec.schedule,
    }
    return SequenceDataset(frames=tuple(images), truth=tuple(flows), split=split, provenance=provenance)


def make_regime_suite(seed: int, frames: Optional[int] = None,
                      size: Optional[tuple] = None) -> dict[str, SequenceDataset]:
    """Четыре режима: rotation, scale, sparse, deformation"""
    return {regime: make_regime_dataset(regime, seed, frames=frames, size=size) for regime in SUITE_REGIMES}
