"""
Обратный варпинг, композиция потоков, стабилизация и трекинг сетки

Граница везде обрабатывается зажатием к краю (clamp-to-edge): координаты
вне кадра прижимаются к ближайшему пикселю, NaN не появляются никогда.
"""

import csv
import logging
from dataclasses import dataclass
from functools import reduce
from pathlib import Path
from typing import Sequence, Union

import cv2
import numpy as np

from services.errors import DataError, DimensionError, FlowValueError
from services.flowcore import FlowField, ImageFrame, check_same_size

logger = logging.getLogger(__name__)


def _bilinear(grid: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Билинейная выборка из grid (H, W) или (H, W, C) в точках (xs, ys)"""
    height, width = grid.shape[:2]
    xs = np.clip(xs, 0.0, width - 1)
    ys = np.clip(ys, 0.0, height - 1)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(width - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(height - 2, 0))
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    fx = xs - x0
    fy = ys - y0
    if grid.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    # весовая форма (1-f)*a + f*b точна в узлах сетки при f = 0 и f = 1
    top = (1 - fx) * grid[y0, x0] + fx * grid[y0, x1]
    bottom = (1 - fx) * grid[y1, x0] + fx * grid[y1, x1]
    return (1 - fy) * top + fy * bottom


def _pixel_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:height, 0:width]
    return xs.astype(np.float64), ys.astype(np.float64)


def bilinear_sample(frame: ImageFrame, x: float, y: float) -> np.ndarray:
    """Значение кадра в нецелой точке (по каналам), с зажатием к краю"""
    value = _bilinear(frame.data, np.asarray(float(x)), np.asarray(float(y)))
    return np.asarray(value, dtype=np.float64).reshape(frame.channels)


def sample_flow(flow: FlowField, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Поток в произвольных точках, результат (..., 2)"""
    return _bilinear(flow.as_array(), xs, ys)


def backward_warp(frame: ImageFrame, flow: FlowField) -> ImageFrame:
    """
    Обратный варпинг: out(x) = frame(x + flow(x))

    Args:
        frame: кадр-источник I_n
        flow: поток w_1->n той же размерности

    Returns:
        ImageFrame: реконструкция первого кадра
    """
    check_same_size(frame, flow, "backward_warp")
    xs, ys = _pixel_grid(flow.width, flow.height)
    warped = _bilinear(frame.data, xs + flow.u, ys + flow.v)
    return ImageFrame(np.clip(warped, 0.0, 1.0))


def compose_flows(w_ab: FlowField, w_bc: FlowField) -> FlowField:
    """Конкатенация потоков: w_ac(x) = w_ab(x) + w_bc(x + w_ab(x))"""
    check_same_size(w_ab, w_bc, "compose_flows")
    xs, ys = _pixel_grid(w_ab.width, w_ab.height)
    carried = sample_flow(w_bc, xs + w_ab.u, ys + w_ab.v)
    return FlowField(w_ab.u + carried[..., 0], w_ab.v + carried[..., 1])


def accumulate_flows(flows: Sequence[FlowField]) -> FlowField:
    """Левая свёртка compose_flows: w_1->n из w_1->2, ..., w_n-1->n"""
    if not flows:
        raise DataError("accumulate_flows: пустой список потоков")
    for flow in flows[1:]:
        check_same_size(flows[0], flow, "accumulate_flows")
    return reduce(compose_flows, flows)


# --- трекинг -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TrackedMesh:
    """Сетка точек: points (N, 2) как (x, y), edges (E, 2), lost (N,) флаги ушедших за кадр"""
    points: np.ndarray
    edges: np.ndarray
    lost: np.ndarray = None

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        edges = np.array(self.edges, dtype=np.intp).reshape(-1, 2)
        lost = np.zeros(len(points), dtype=bool) if self.lost is None \
            else np.array(self.lost, dtype=bool).reshape(-1)
        if not np.all(np.isfinite(points)):
            raise FlowValueError("координаты сетки содержат NaN/Inf")
        if len(lost) != len(points):
            raise DimensionError("длина флагов lost не совпадает с числом точек")
        if edges.size and (edges.min() < 0 or edges.max() >= len(points)):
            raise DimensionError("индекс ребра вне диапазона точек")
        for name, value in (("points", points), ("edges", edges), ("lost", lost)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)


def make_grid_mesh(width: int, height: int, rows: int = 8, cols: int = 8,
                   margin: float = 16.0) -> TrackedMesh:
    """Регулярная сетка rows x cols с 4-связной топологией"""
    xs = np.linspace(margin, width - 1 - margin, cols)
    ys = np.linspace(margin, height - 1 - margin, rows)
    gx, gy = np.meshgrid(xs, ys)
    points = np.stack([gx.ravel(), gy.ravel()], axis=1)

    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return TrackedMesh(points, np.array(edges, dtype=np.intp).reshape(-1, 2))


def track_mesh(mesh: TrackedMesh, flow_seq: Sequence[FlowField]) -> list[TrackedMesh]:
    """
    Трекинг - операция, обратная стабилизации: p' = p + w(p)

    Args:
        mesh: начальная сетка (кадр 0)
        flow_seq: межкадровые потоки w_n->n+1

    Returns:
        list[TrackedMesh]: положения на каждом кадре, начиная с исходного
    """
    trajectory = [mesh]
    points = mesh.points.copy()
    lost = mesh.lost.copy()
    for n, flow in enumerate(flow_seq):
        displacement = sample_flow(flow, points[:, 0], points[:, 1])
        points = points + displacement
        outside = (points[:, 0] < 0) | (points[:, 0] > flow.width - 1) \
            | (points[:, 1] < 0) | (points[:, 1] > flow.height - 1)
        if np.any(outside & ~lost):
            logger.warning("кадр %d: %d точек ушли за край и зажаты",
                           n + 1, int(np.count_nonzero(outside & ~lost)))
        lost = lost | outside
        points[:, 0] = np.clip(points[:, 0], 0, flow.width - 1)
        points[:, 1] = np.clip(points[:, 1], 0, flow.height - 1)
        trajectory.append(TrackedMesh(points, mesh.edges, lost))
    return trajectory


def positional_drift(trajectory: Sequence[TrackedMesh],
                     reference: Sequence[TrackedMesh]) -> list[float]:
    """Средняя евклидова ошибка положения точек на каждом кадре"""
    if len(trajectory) != len(reference):
        raise DimensionError("траектории разной длины")
    return [
        float(np.mean(np.hypot(*(a.points - b.points).T)))
        for a, b in zip(trajectory, reference)
    ]


def stabilization_error(frames: Sequence[ImageFrame], flow_seq: Sequence[FlowField]) -> list[float]:
    """
    Ошибка стабилизации: |I_1 - I_n(x + w_1->n(x))|, усреднённая по кадру

    Возвращает значение для каждого кадра, для нулевого кадра это 0.
    """
    if len(frames) != len(flow_seq) + 1:
        raise DimensionError(
            f"кадров должно быть на один больше потоков: {len(frames)} и {len(flow_seq)}"
        )
    reference = frames[0].data
    errors = [0.0]
    accumulated = None
    for n in range(1, len(frames)):
        check_same_size(frames[n], flow_seq[n - 1], "stabilization_error")
        flow = flow_seq[n - 1]
        accumulated = flow if accumulated is None else compose_flows(accumulated, flow)
        warped = backward_warp(frames[n], accumulated)
        errors.append(float(np.mean(np.abs(reference - warped.data))))
    return errors


# --- экспорт -------------------------------------------------------------

def draw_mesh(frame: ImageFrame, mesh: TrackedMesh,
              color: tuple = (0, 255, 0), lost_color: tuple = (255, 0, 0)) -> ImageFrame:
    """Наложение сетки на кадр (как оверлей Prior Tracking), RGB результат"""
    rgb = frame.data if frame.channels == 3 else np.repeat(frame.data, 3, axis=2)
    canvas = np.ascontiguousarray(np.rint(rgb * 255).astype(np.uint8))
    points = [(int(x), int(y)) for x, y in np.rint(mesh.points)]
    for i, j in mesh.edges:
        cv2.line(canvas, points[i], points[j], color, 1, cv2.LINE_AA)
    for p, is_lost in zip(points, mesh.lost):
        cv2.circle(canvas, p, 2, lost_color if is_lost else color, -1)
    return ImageFrame(canvas.astype(np.float64) / 255.0)


def write_trajectory_csv(trajectory: Sequence[TrackedMesh], path: Union[str, Path]) -> None:
    """CSV: frame, point_id, x, y, lost"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "point_id", "x", "y", "lost"])
        for n, mesh in enumerate(trajectory):
            for i, ((x, y), is_lost) in enumerate(zip(mesh.points, mesh.lost)):
                writer.writerow([n, i, repr(float(x)), repr(float(y)), int(is_lost)])
