import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from services.errors import DataError, DimensionError
from services.flowcore import FlowField, ImageFrame
from services.warp import (
    TrackedMesh,
    accumulate_flows,
    backward_warp,
    bilinear_sample,
    compose_flows,
    draw_mesh,
    make_grid_mesh,
    positional_drift,
    stabilization_error,
    track_mesh,
    write_trajectory_csv,
)
from tests.conftest import smooth_frame


def rotation_flow(size: int, degrees: float) -> FlowField:
    """Поток поворота вокруг центра кадра: w(x) = R(x - c) + c - x"""
    c = (size - 1) / 2
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    a = np.deg2rad(degrees)
    dx, dy = xs - c, ys - c
    u = np.cos(a) * dx - np.sin(a) * dy - dx
    v = np.sin(a) * dx + np.cos(a) * dy - dy
    return FlowField(u, v)


def reference_bilinear(data, x, y):
    """Прямолинейная эталонная реализация с явными ветками"""
    height, width = data.shape[:2]
    x = min(max(x, 0.0), width - 1)
    y = min(max(y, 0.0), height - 1)
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = min(x0 + 1, width - 1), min(y0 + 1, height - 1)
    fx, fy = x - x0, y - y0
    return ((1 - fx) * (1 - fy) * data[y0, x0] + fx * (1 - fy) * data[y0, x1]
            + (1 - fx) * fy * data[y1, x0] + fx * fy * data[y1, x1])


def test_bilinear_sample_grid_point(rng):
    frame = ImageFrame(rng.random((5, 6, 3)))
    assert np.array_equal(bilinear_sample(frame, 4, 2), frame.data[2, 4])


def test_bilinear_sample_midpoint():
    frame = ImageFrame(np.array([[0.0, 1.0]]))
    assert bilinear_sample(frame, 0.5, 0.0)[0] == pytest.approx(0.5)


def test_bilinear_sample_clamps_outside():
    frame = ImageFrame(np.array([[0.25, 1.0], [0.5, 0.75]]))
    assert bilinear_sample(frame, -5.0, -5.0)[0] == 0.25
    assert bilinear_sample(frame, 10.0, 10.0)[0] == 0.75


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 9), st.floats(-3, 7))
def test_bilinear_sample_matches_reference(x, y):
    data = np.arange(6 * 7, dtype=np.float64).reshape(6, 7) / 41.0
    frame = ImageFrame(data)
    assert bilinear_sample(frame, x, y)[0] == pytest.approx(reference_bilinear(data, x, y), abs=1e-12)


def test_backward_warp_zero_flow_identity(rng):
    frame = ImageFrame(rng.random((9, 11, 3)))
    warped = backward_warp(frame, FlowField.zeros(11, 9))
    assert np.array_equal(warped.data, frame.data)


def test_backward_warp_constant_shift():
    width = 8
    frame = ImageFrame(np.tile(np.arange(width) / width, (4, 1)))
    warped = backward_warp(frame, FlowField.constant(width, 4, 1.0, 0.0))
    for c in range(width - 1):
        assert warped.data[2, c, 0] == pytest.approx((c + 1) / width)
    assert warped.data[2, width - 1, 0] == pytest.approx((width - 1) / width)


def test_backward_warp_outside_frame_is_border():
    frame = ImageFrame(np.array([[0.1, 0.2], [0.3, 0.4]]))
    warped = backward_warp(frame, FlowField.constant(2, 2, -50.0, 50.0))
    assert np.allclose(warped.data[:, :, 0], 0.3)


def test_backward_warp_dimension_mismatch():
    with pytest.raises(DimensionError):
        backward_warp(ImageFrame(np.zeros((4, 4))), FlowField.zeros(5, 4))


def test_compose_with_zero_is_identity():
    w = rotation_flow(32, 2.0)
    zero = FlowField.zeros(32, 32)
    assert np.allclose(compose_flows(zero, w).as_array(), w.as_array())
    assert np.array_equal(compose_flows(w, zero).as_array(), w.as_array())


def test_compose_constant_translations_add():
    one = FlowField.constant(10, 6, 1.0, 0.0)
    composed = compose_flows(one, one)
    assert np.allclose(composed.u, 2.0)
    assert np.allclose(composed.v, 0.0)


def test_compose_rotations():
    composed = compose_flows(rotation_flow(64, 1.0), rotation_flow(64, 1.0))
    expected = rotation_flow(64, 2.0)
    diff = np.abs(composed.as_array() - expected.as_array())[4:-4, 4:-4]
    assert diff.max() < 0.05


def test_accumulate_single_and_zero():
    w = rotation_flow(16, 3.0)
    assert np.array_equal(accumulate_flows([w]).as_array(), w.as_array())
    zeros = accumulate_flows([FlowField.zeros(16, 16)] * 4)
    assert np.all(zeros.u == 0) and np.all(zeros.v == 0)


def test_accumulate_ten_half_pixel_steps():
    total = accumulate_flows([FlowField.constant(20, 8, 0.5, 0.0)] * 10)
    assert np.allclose(total.u, 5.0)
    assert np.allclose(total.v, 0.0)


def test_accumulate_empty_raises():
    with pytest.raises(DataError):
        accumulate_flows([])


def test_grid_mesh_topology():
    mesh = make_grid_mesh(64, 48, rows=3, cols=4, margin=8)
    assert mesh.points.shape == (12, 2)
    # 3 * (4 - 1) горизонтальных + (3 - 1) * 4 вертикальных
    assert len(mesh.edges) == 17
    assert mesh.points[0].tolist() == [8.0, 8.0]
    assert mesh.points[-1].tolist() == [55.0, 39.0]


def test_mesh_rejects_bad_edge():
    with pytest.raises(DimensionError):
        TrackedMesh(np.zeros((2, 2)), np.array([[0, 2]]))


def test_track_zero_flows_is_stationary():
    mesh = make_grid_mesh(32, 32, rows=4, cols=4, margin=4)
    trajectory = track_mesh(mesh, [FlowField.zeros(32, 32)] * 5)
    assert len(trajectory) == 6
    assert all(np.array_equal(state.points, mesh.points) for state in trajectory)


def test_track_constant_shift_ten_frames():
    mesh = make_grid_mesh(64, 64, rows=4, cols=4, margin=16)
    trajectory = track_mesh(mesh, [FlowField.constant(64, 64, 1.0, 0.0)] * 10)
    assert np.allclose(trajectory[-1].points - mesh.points, [10.0, 0.0])
    assert not trajectory[-1].lost.any()


def test_track_rotation_stays_on_orbit():
    size = 64
    c = (size - 1) / 2
    start = np.array([[c + 20.0, c]])
    mesh = TrackedMesh(start, np.zeros((0, 2)))
    trajectory = track_mesh(mesh, [rotation_flow(size, 1.0)] * 90)

    a = np.deg2rad(90.0)
    expected = [c + 20.0 * np.cos(a), c + 20.0 * np.sin(a)]
    assert np.hypot(*(trajectory[-1].points[0] - expected)) < 0.1


def test_track_flags_points_leaving_frame():
    mesh = TrackedMesh(np.array([[30.0, 5.0], [2.0, 5.0]]), np.zeros((0, 2)))
    trajectory = track_mesh(mesh, [FlowField.constant(32, 10, 4.0, 0.0)])
    assert trajectory[-1].lost.tolist() == [True, False]
    assert trajectory[-1].points[0].tolist() == [31.0, 5.0]


def test_positional_drift():
    a = [TrackedMesh(np.array([[0.0, 0.0], [1.0, 1.0]]), np.zeros((0, 2)))]
    b = [TrackedMesh(np.array([[3.0, 4.0], [1.0, 1.0]]), np.zeros((0, 2)))]
    assert positional_drift(a, b) == [2.5]


def test_stabilization_identical_frames_zero_flows():
    frame = smooth_frame(24, 16)
    errors = stabilization_error([frame] * 4, [FlowField.zeros(24, 16)] * 3)
    assert errors == [0.0, 0.0, 0.0, 0.0]


def test_stabilization_ground_truth_flows_small():
    frames = [smooth_frame(64, 48, shift_x=-0.5 * n) for n in range(6)]
    flows = [FlowField.constant(64, 48, 0.5, 0.0)] * 5
    errors = stabilization_error(frames, flows)
    assert errors[0] == 0.0
    assert max(errors) < 0.02


def test_stabilization_biased_flows_drift_grows():
    frames = [smooth_frame(64, 48)] * 6
    flows = [FlowField.constant(64, 48, 0.5, 0.0)] * 5
    errors = stabilization_error(frames, flows)
    assert all(later > earlier for earlier, later in zip(errors, errors[1:]))


def test_stabilization_length_mismatch():
    with pytest.raises(DimensionError):
        stabilization_error([smooth_frame(8, 8)] * 3, [FlowField.zeros(8, 8)])


def test_draw_mesh_and_trajectory_csv(tmp_path):
    frame = smooth_frame(32, 24)
    mesh = make_grid_mesh(32, 24, rows=2, cols=2, margin=4)
    overlay = draw_mesh(frame, mesh)
    assert overlay.channels == 3
    assert overlay.data[4, 4].tolist() == pytest.approx([0.0, 1.0, 0.0])

    trajectory = track_mesh(mesh, [FlowField.constant(32, 24, 1.0, 0.0)] * 2)
    path = tmp_path / "trajectory.csv"
    write_trajectory_csv(trajectory, path)
    with path.open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 3 * 4
    assert rows[-1]["frame"] == "2"
    assert float(rows[-1]["x"]) == pytest.approx(mesh.points[-1][0] + 2.0)
