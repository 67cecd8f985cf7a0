import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from services.errors import DataError, DimensionError
from services.flowcore import FlowField, ImageFrame
from services.metrics import (
    SSIM_K1,
    MultiScaleFlow,
    area_downsample,
    boxplot_figure,
    boxplot_stats,
    epe_map,
    epe_mean,
    gold_for_level,
    multiscale_l1_loss,
    reconstruction_ssim,
    ssim,
    summary_dict,
    write_metrics_csv,
    write_summary_json,
)
from tests.conftest import translated_pair

flows_4x3 = arrays(np.float64, (3, 4, 2), elements=st.floats(-50, 50))


def test_epe_zero_for_identical(rng):
    flow = FlowField(rng.normal(size=(5, 6)), rng.normal(size=(5, 6)))
    assert epe_mean(flow, flow) == 0.0


def test_epe_three_four_five():
    pred = FlowField(np.array([[3.0, 0.0]]), np.array([[4.0, 0.0]]))
    errors = epe_map(pred, FlowField.zeros(2, 1))
    assert errors.tolist() == [[5.0, 0.0]]
    assert epe_mean(pred, FlowField.zeros(2, 1)) == 2.5


def test_epe_margin_excludes_border():
    u = np.zeros((6, 6))
    u[0, :] = 10.0
    assert epe_mean(FlowField(u, np.zeros((6, 6))), FlowField.zeros(6, 6), margin=1) == 0.0
    with pytest.raises(DimensionError):
        epe_mean(FlowField.zeros(6, 6), FlowField.zeros(6, 6), margin=3)


@settings(max_examples=50, deadline=None)
@given(flows_4x3, flows_4x3)
def test_epe_symmetric_nonnegative(a, b):
    fa, fb = FlowField.from_array(a), FlowField.from_array(b)
    assert epe_mean(fa, fb) == pytest.approx(epe_mean(fb, fa))
    assert epe_mean(fa, fb) >= 0.0


def test_epe_dimension_mismatch():
    with pytest.raises(DimensionError):
        epe_map(FlowField.zeros(3, 3), FlowField.zeros(4, 3))


def test_ssim_self_is_one(rng):
    frame = ImageFrame(rng.random((24, 24, 3)))
    assert ssim(frame, frame) == 1.0


def test_ssim_constant_images_closed_form():
    a = ImageFrame(np.full((16, 16), 0.2))
    b = ImageFrame(np.full((16, 16), 0.8))
    c1 = SSIM_K1 ** 2
    expected = (2 * 0.2 * 0.8 + c1) / (0.2 ** 2 + 0.8 ** 2 + c1)
    assert ssim(a, b) == pytest.approx(expected, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_ssim_symmetric_and_bounded(seed):
    rng = np.random.default_rng(seed)
    a = ImageFrame(rng.random((16, 20)))
    b = ImageFrame(rng.random((16, 20)))
    assert ssim(a, b) == pytest.approx(ssim(b, a))
    assert -1.0 <= ssim(a, b) <= 1.0


def test_ssim_rejects_small_frames():
    small = ImageFrame(np.zeros((10, 30)))
    with pytest.raises(DimensionError):
        ssim(small, small)


def test_reconstruction_ssim_with_exact_flow():
    pair, flow = translated_pair(48, 32, 1.0, 0.0)
    assert reconstruction_ssim(pair, flow) > reconstruction_ssim(pair, FlowField.zeros(48, 32))
    assert reconstruction_ssim(pair, flow) > 0.95


def pyramid(gold: FlowField, n_scales: int) -> MultiScaleFlow:
    stacked = np.stack([gold.u, gold.v])
    levels = []
    for s in reversed(range(n_scales)):
        factor = 2 ** s
        level = gold_for_level(stacked, gold.height // factor, gold.width // factor)
        levels.append(FlowField(level[0], level[1]))
    return MultiScaleFlow(levels)


def test_gold_for_level_scales_displacements():
    gold = np.stack([np.full((8, 8), 4.0), np.full((8, 8), -2.0)])
    level = gold_for_level(gold, 2, 2)
    assert level.shape == (2, 2, 2)
    assert np.allclose(level[0], 1.0)
    assert np.allclose(level[1], -0.5)


def test_area_downsample_averages_blocks():
    array = np.arange(16, dtype=np.float64).reshape(4, 4)
    assert area_downsample(array, 2).tolist() == [[2.5, 4.5], [10.5, 12.5]]


def test_loss_zero_for_downsampled_gold(rng):
    gold = FlowField(rng.normal(size=(16, 16)), rng.normal(size=(16, 16)))
    assert multiscale_l1_loss(pyramid(gold, 3), gold, [1.0, 0.5, 0.25]) == pytest.approx(0.0)


def test_loss_single_scale_constant_offset():
    gold = FlowField.zeros(8, 4)
    pred = MultiScaleFlow([FlowField.constant(8, 4, 1.0, -1.0)])
    assert multiscale_l1_loss(pred, gold, [1.0]) == 2.0


def test_loss_scale_chain_mismatch():
    gold = FlowField.zeros(8, 8)
    with pytest.raises(DimensionError):
        multiscale_l1_loss(pyramid(gold, 2), gold, [1.0])
    with pytest.raises(DimensionError):
        multiscale_l1_loss(MultiScaleFlow([FlowField.zeros(4, 4)]), gold, [1.0])


def test_multiscale_flow_must_be_dyadic():
    with pytest.raises(DimensionError):
        MultiScaleFlow([FlowField.zeros(3, 3), FlowField.zeros(8, 8)])


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 8, 2), elements=st.floats(-20, 20)),
       arrays(np.float64, (4, 8, 2), elements=st.floats(-20, 20)))
def test_loss_nonnegative(pred, gold):
    value = multiscale_l1_loss(MultiScaleFlow([FlowField.from_array(pred)]),
                               FlowField.from_array(gold), [1.0])
    assert value >= 0.0


def test_boxplot_singleton():
    stats = boxplot_stats([5.0])
    assert (stats.median, stats.lower_quartile, stats.upper_quartile,
            stats.whisker_low, stats.whisker_high) == (5.0,) * 5
    assert stats.outliers == []
    assert stats.n == 1


def test_boxplot_four_values():
    stats = boxplot_stats([4, 1, 3, 2])
    assert stats.median == 2.5
    assert stats.lower_quartile == 1.5
    assert stats.upper_quartile == 3.5


def test_boxplot_zero_iqr_outlier():
    stats = boxplot_stats([1, 1, 1, 1, 100])
    assert stats.outliers == [100.0]
    assert stats.whisker_high == 1.0


def test_boxplot_empty():
    with pytest.raises(DataError):
        boxplot_stats([])


def midpoint_quantile(ordered, p):
    """Середина двух соседних порядковых статистик вокруг позиции p·(n-1)"""
    position = p * (len(ordered) - 1)
    return (ordered[math.floor(position)] + ordered[math.ceil(position)]) / 2


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40))
def test_boxplot_matches_sorted_reference(samples):
    stats = boxplot_stats(samples)
    ordered = sorted(samples)
    q1 = midpoint_quantile(ordered, 0.25)
    q3 = midpoint_quantile(ordered, 0.75)

    assert stats.median == pytest.approx(midpoint_quantile(ordered, 0.5), abs=1e-6)
    assert stats.lower_quartile == pytest.approx(q1, abs=1e-6)
    assert stats.upper_quartile == pytest.approx(q3, abs=1e-6)
    assert stats.whisker_low <= stats.lower_quartile <= stats.median
    assert stats.median <= stats.upper_quartile <= stats.whisker_high
    assert stats.whisker_low in ordered or stats.whisker_low == stats.lower_quartile
    assert stats.whisker_high in ordered or stats.whisker_high == stats.upper_quartile

    iqr = stats.upper_quartile - stats.lower_quartile
    low = stats.lower_quartile - 1.5 * iqr
    high = stats.upper_quartile + 1.5 * iqr
    assert stats.outliers == [s for s in ordered if s < low or s > high]
    assert len(stats.outliers) + sum(low <= s <= high for s in ordered) == len(ordered)


def test_summary_files(tmp_path):
    summary = summary_dict([0.1, 0.2, 0.3], [0.9, 0.95, 0.99])
    assert summary["mean_epe"] == pytest.approx(0.2)
    assert summary["ssim"]["max"] == 0.99

    write_summary_json({"student": summary}, tmp_path / "summary.json")
    loaded = json.loads((tmp_path / "summary.json").read_text())
    assert loaded["student"]["boxplot"]["median"] == pytest.approx(0.2)

    write_metrics_csv([{"pair_index": 3, "epe": 0.5, "ssim": 0.9}], tmp_path / "metrics.csv")
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines == ["pair_index,epe,ssim", "3,0.5,0.9"]

    boxplot_figure({"rotation": [0.1, 0.2], "scale": [0.3, 0.5]}, tmp_path / "box.png")
    assert (tmp_path / "box.png").stat().st_size > 0


def test_boxplot_two_far_values_whiskers_at_quartiles():
    stats = boxplot_stats([0.0, 10.0])
    assert stats.median == 5.0
    assert stats.whisker_low == stats.whisker_high == 5.0
    assert stats.outliers == [0.0, 10.0]
