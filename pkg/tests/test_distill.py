import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from services.distill import (
    AnalyticTeacher,
    FileTeacher,
    FineTuneConfig,
    NoisyTeacher,
    SequenceDataset,
    SplitRanges,
    TeacherOracle,
    _prepare_validation,
    _validation_loss,
    evaluate,
    fine_tune,
    generate_gold,
    load_dataset,
    make_teacher,
    pretrain,
    save_dataset,
    split_dataset,
)
from services.errors import (
    ConfigError,
    DimensionError,
    MissingGoldError,
    SplitError,
    TeacherError,
)
from services.flowcore import FlowField, ImageFrame, crop, write_flo
from services.studentnet import NetConfig, init
from tests.conftest import smooth_frame

TINY = NetConfig(input_channels=2, base_width=4, levels=2, seed=11)


def shifted_dataset(n_frames: int = 6, size: int = 16, du: float = 1.0, dv: float = 0.5,
                    split=(3, 1, 1)) -> SequenceDataset:
    """Текстура, равномерно сдвигающаяся на (du, dv) за кадр, с точным потоком как gold"""
    frames = [smooth_frame(size, size, -du * n, -dv * n) for n in range(n_frames)]
    truth = [FlowField.constant(size, size, du, dv)] * (n_frames - 1)
    dataset = SequenceDataset(tuple(frames), truth=tuple(truth), provenance={"regime": "shift"})
    dataset = generate_gold(dataset, AnalyticTeacher.from_dataset(dataset))
    return split_dataset(dataset, *split) if split else dataset


def quick_config(**overrides) -> FineTuneConfig:
    values = dict(max_epochs=4, val_every=1, patience=3, batch_size=2, crop_size=(8, 8),
                  seed=5, learning_rate=1e-2)
    values.update(overrides)
    return FineTuneConfig(**values)


def test_split_of_601_pairs():
    frame = ImageFrame(np.zeros((4, 4)))
    dataset = split_dataset(SequenceDataset((frame,) * 602), 329, 110, 161)
    assert dataset.split == SplitRanges((0, 329), (329, 439), (439, 600))
    assert list(dataset.indices("test"))[-1] == 599


def test_split_with_empty_test_is_valid():
    dataset = shifted_dataset(split=(4, 1, 0))
    assert len(dataset.indices("test")) == 0


def test_split_exceeding_pairs():
    with pytest.raises(SplitError):
        shifted_dataset(split=(3, 2, 1))


def test_overlapping_ranges_rejected():
    with pytest.raises(SplitError):
        SplitRanges((0, 10), (5, 12), (12, 20))
    with pytest.raises(SplitError):
        SplitRanges((0, 10), (10, 8), (12, 20))


def test_dataset_validates_flow_count():
    frame = smooth_frame(8, 8)
    with pytest.raises(DimensionError):
        SequenceDataset((frame,) * 3, truth=(FlowField.zeros(8, 8),))


def test_analytic_gold_is_exact_truth():
    dataset = shifted_dataset()
    assert dataset.gold == dataset.truth
    assert dataset.provenance["teacher"] == "analytic"


def test_file_teacher_missing_pair(tmp_path):
    dataset = shifted_dataset(n_frames=3, split=None)
    write_flo(FlowField.zeros(16, 16), tmp_path / "000000.flo")
    with pytest.raises(TeacherError, match="пара 1"):
        generate_gold(dataset, FileTeacher(tmp_path))


class BrokenTeacher(TeacherOracle):
    name = "broken"

    def estimate(self, pair, index):
        if index == 2:
            raise OSError("диск недоступен")
        return FlowField.zeros(pair.width, pair.height)


def test_any_teacher_failure_names_the_pair():
    dataset = shifted_dataset(split=None)
    with pytest.raises(TeacherError, match="пара 2.*диск недоступен"):
        generate_gold(dataset, BrokenTeacher())


def test_noisy_teacher_zero_sigma_is_analytic():
    dataset = shifted_dataset(split=None)
    teacher = NoisyTeacher(AnalyticTeacher.from_dataset(dataset), sigma=0.0, seed=3)
    assert generate_gold(dataset, teacher).gold == dataset.truth


def test_noisy_teacher_deterministic_across_threads():
    dataset = shifted_dataset(n_frames=8, size=64, split=None)
    teacher = make_teacher("noisy", dataset, sigma=0.5, seed=9)
    serial = generate_gold(dataset, teacher, threads=1).gold
    parallel = generate_gold(dataset, teacher, threads=4).gold
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)

    residual = serial[0].u - dataset.truth[0].u
    assert abs(residual.mean()) < 0.2
    assert 0.3 < residual.std() < 0.7


def test_noisy_teacher_rejects_negative_sigma():
    with pytest.raises(ConfigError):
        NoisyTeacher(AnalyticTeacher([]), sigma=-1.0)


def test_make_teacher_unknown_name():
    with pytest.raises(ConfigError):
        make_teacher("flownet2")


def test_gold_teacher_needs_gold():
    dataset = SequenceDataset((smooth_frame(8, 8),) * 3)
    with pytest.raises(MissingGoldError):
        make_teacher("gold", dataset)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 8), st.integers(0, 8))
def test_cropped_gold_matches_offset(x0, y0):
    ys, xs = np.mgrid[0:16, 0:16].astype(np.float64)
    gold = FlowField(xs * 0.1, ys * -0.2)
    cropped = crop(gold, x0, y0, 8, 8)
    assert cropped.u[2, 3] == gold.u[y0 + 2, x0 + 3]
    assert cropped.v[2, 3] == gold.v[y0 + 2, x0 + 3]


def test_fine_tune_is_deterministic():
    dataset = shifted_dataset()
    net_a, log_a = fine_tune(init(TINY), dataset, quick_config())
    net_b, log_b = fine_tune(init(TINY), dataset, quick_config())
    assert log_a.epochs == log_b.epochs
    assert log_a.best_epoch == log_b.best_epoch
    assert all(np.array_equal(net_a.params[k], net_b.params[k]) for k in net_a.params)


def test_validation_threads_do_not_change_results():
    dataset = shifted_dataset(n_frames=9, split=(4, 3, 1))
    net_a, log_a = fine_tune(init(TINY), dataset, quick_config(batch_size=1, threads=1))
    net_b, log_b = fine_tune(init(TINY), dataset, quick_config(batch_size=1, threads=3))
    assert log_a.epochs == log_b.epochs
    assert all(np.array_equal(net_a.params[k], net_b.params[k]) for k in net_a.params)


def test_fine_tune_runs_to_max_epochs_without_early_stop():
    _, log = fine_tune(init(TINY), shifted_dataset(), quick_config(max_epochs=7, val_every=100))
    assert len(log.epochs) == 7
    assert not log.stopped_early
    assert log.val_losses and log.epochs[-1].val_loss is not None


def test_fine_tune_stops_on_patience():
    config = quick_config(max_epochs=50, val_every=2, patience=3, learning_rate=0.0)
    _, log = fine_tune(init(TINY), shifted_dataset(), config)
    assert log.stopped_early
    assert len(log.epochs) == 8
    assert log.best_epoch == 2


def test_best_checkpoint_has_lowest_validation_loss():
    dataset = shifted_dataset()
    best, log = fine_tune(init(TINY), dataset, quick_config(max_epochs=6))
    inputs, golds = _prepare_validation(best, dataset, dataset.indices("val"))
    value = _validation_loss(best, inputs, golds, 2, None)
    assert value == pytest.approx(log.best_val_loss)
    assert all(value <= v + 1e-12 for v in log.val_losses)


def test_fine_tune_reads_only_train_and_val():
    dataset = shifted_dataset(n_frames=9, split=(4, 2, 2))
    _, log = fine_tune(init(TINY), dataset, quick_config(max_epochs=2))
    allowed = set(dataset.indices("train")) | set(dataset.indices("val"))
    assert set(log.accessed_pairs) == allowed
    assert not set(log.accessed_pairs) & set(dataset.indices("test"))


def test_fine_tune_overfits_one_pair():
    dataset = shifted_dataset(n_frames=2, split=(1, 0, 0))
    config = quick_config(max_epochs=500, batch_size=1, crop_size=(16, 16))
    _, log = fine_tune(init(TINY), dataset, config)
    assert len(log.epochs) == 500
    assert log.epochs[-1].train_loss < 0.2 * log.epochs[0].train_loss
    assert log.best_epoch == 500


def test_fine_tune_with_photometric_augment():
    _, log = pretrain(init(TINY), shifted_dataset(), quick_config(max_epochs=2, photometric_augment=True))
    assert log.phase == "pretrain"
    assert all(np.isfinite(r.train_loss) for r in log.epochs)


def test_fine_tune_requires_gold():
    dataset = split_dataset(SequenceDataset((smooth_frame(16, 16),) * 6), 3, 1, 1)
    with pytest.raises(MissingGoldError, match="generate_gold"):
        fine_tune(init(TINY), dataset, quick_config())


def test_fine_tune_rejects_large_crop():
    with pytest.raises(DimensionError):
        fine_tune(init(TINY), shifted_dataset(), quick_config(crop_size=(32, 32)))


def test_training_log_files(tmp_path):
    _, log = fine_tune(init(TINY), shifted_dataset(), quick_config(max_epochs=2))
    log.write_csv(tmp_path / "log.csv")
    lines = (tmp_path / "log.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss"
    assert len(lines) == 3
    assert "epoch_of_convergence: " in log.summary_text()


def test_evaluate_teacher_against_itself():
    dataset = shifted_dataset()
    result = evaluate(make_teacher("gold", dataset), dataset)
    assert result.epe == [0.0]
    assert result.mean_epe == 0.0
    assert result.pair_indices == [4]


def test_evaluate_untrained_student_error_is_shift_magnitude():
    dataset = shifted_dataset(n_frames=9, split=(4, 2, 2))
    net = init(TINY)
    for name in net.params:
        if name.startswith("predict_flow"):
            net.params[name][...] = 0.0
    result = evaluate(net, dataset, threads=2)
    assert result.mean_epe == pytest.approx(np.hypot(1.0, 0.5))
    assert len(result.rows()) == 2


def test_evaluate_empty_test_split():
    dataset = shifted_dataset(split=(4, 1, 0))
    with pytest.raises(SplitError):
        evaluate(make_teacher("gold", dataset), dataset)


def test_dataset_save_load_round_trip(tmp_path):
    dataset = shifted_dataset()
    save_dataset(dataset, tmp_path / "ds")

    loaded = load_dataset(tmp_path / "ds")

    assert loaded.n_pairs == dataset.n_pairs
    assert loaded.split == dataset.split
    assert loaded.provenance == {"regime": "shift", "teacher": "analytic"}
    assert np.allclose(loaded.frames[3].data, dataset.frames[3].data, atol=1e-4)
    assert all(np.array_equal(a.u, b.u) for a, b in zip(loaded.gold, dataset.gold))
    assert loaded.truth is not None


def test_load_dataset_detects_missing_gold_file(tmp_path):
    dataset = shifted_dataset()
    save_dataset(dataset, tmp_path / "ds")
    (tmp_path / "ds" / "gold" / "000002.flo").unlink()
    with pytest.raises(MissingGoldError):
        load_dataset(tmp_path / "ds")
