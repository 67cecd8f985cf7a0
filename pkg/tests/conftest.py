"""
Общие фикстуры: отдельная база реестра на каждый тест и маленькие сцены
"""

import numpy as np
import pytest

from db import database
from services.flowcore import FlowField, FramePair, ImageFrame


@pytest.fixture(autouse=True)
def registry(tmp_path):
    database.configure(f"sqlite:///{tmp_path}/runs.db")
    database.init_db()
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_frame(width: int, height: int, shift_x: float = 0.0, shift_y: float = 0.0) -> ImageFrame:
    """Гладкая синусоидальная текстура, сдвинутая на (shift_x, shift_y)"""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    xs = xs + shift_x
    ys = ys + shift_y
    data = 0.5 + 0.2 * np.sin(xs / 5.0) * np.cos(ys / 7.0) + 0.1 * np.sin((xs + ys) / 11.0)
    return ImageFrame(data)


def translated_pair(width: int, height: int, du: float, dv: float) -> tuple[FramePair, FlowField]:
    """Пара, где второй кадр сдвинут так, что I1(x) = I2(x + (du, dv))"""
    first = smooth_frame(width, height)
    second = smooth_frame(width, height, -du, -dv)
    return FramePair(first, second), FlowField.constant(width, height, du, dv)
