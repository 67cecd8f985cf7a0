import numpy as np
import pytest

from services.errors import ConfigError, DataError
from services.flowcore import FlowField
from services.metrics import epe_mean
from services.synthdata import (
    REGIME_SPLITS,
    SPARSE_BACKGROUND,
    SceneSpec,
    generate_sequence,
    make_regime_dataset,
    make_regime_suite,
    make_texture,
    regime_spec,
    schedule_values,
)
from services.warp import accumulate_flows, backward_warp


def test_rotation_flow_geometry():
    spec = SceneSpec(motion="rotation", rotation_deg=1.0, frames=2, size=(65, 65))
    _, flows = generate_sequence(spec)
    flow = flows[0]
    assert abs(flow.u[32, 32]) < 1e-9 and abs(flow.v[32, 32]) < 1e-9
    for r in (5, 10, 20):
        magnitude = np.hypot(flow.u[32, 32 + r], flow.v[32, 32 + r])
        assert magnitude == pytest.approx(2 * r * np.sin(np.deg2rad(0.5)), rel=1e-9)


def test_scale_flow_formula():
    spec = SceneSpec(motion="scale", scale_factor=1.01, frames=2, size=(80, 60))
    _, flows = generate_sequence(spec)
    ys, xs = np.mgrid[0:60, 0:80].astype(np.float64)
    cx, cy = 79 / 2, 59 / 2
    assert np.allclose(flows[0].u, 0.01 * (xs - cx), atol=1e-9)
    assert np.allclose(flows[0].v, 0.01 * (ys - cy), atol=1e-9)


@pytest.mark.parametrize("spec", [
    SceneSpec(motion="rotation", rotation_deg=0.8, frames=4, size=(64, 48)),
    SceneSpec(motion="scale", scale_factor=1.004, frames=4, size=(64, 48)),
    SceneSpec(motion="translation", translation=(1.0, 0.5), frames=4, size=(64, 48)),
    SceneSpec(motion="deformation", bump_amplitude=4.0, bump_sigma=20.0, bump_count=4,
              frames=4, size=(96, 80)),
], ids=["rotation", "scale", "translation", "deformation"])
def test_photometric_consistency(spec):
    frames, flows = generate_sequence(spec)
    for n, flow in enumerate(flows):
        warped = backward_warp(frames[n + 1], flow)
        assert np.mean(np.abs(warped.data - frames[n].data)) < 0.02


def test_illumination_never_changes_flows():
    flows = {}
    frames = {}
    for illumination in ("none", "vignette", "gain-ramp", "specular"):
        spec = regime_spec("deformation", seed=3, illumination=illumination, frames=4, size=(48, 40))
        frames[illumination], flows[illumination] = generate_sequence(spec)
    for illumination in ("vignette", "gain-ramp", "specular"):
        for a, b in zip(flows["none"], flows[illumination]):
            assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    assert not np.array_equal(frames["none"][1].data, frames["vignette"][1].data)


def test_sparse_texture_mostly_background():
    spec = SceneSpec(texture="sparse-blobs", texture_density=0.002)
    texture = make_texture(spec, 256, 192, np.random.default_rng(0))
    near_background = np.mean(np.abs(texture - SPARSE_BACKGROUND) <= 0.05)
    assert near_background >= 0.95
    assert texture.max() > SPARSE_BACKGROUND + 0.1


@pytest.mark.parametrize("texture", ["dense-perlin", "sparse-blobs", "tissue-like"])
def test_textures_in_unit_range(texture):
    image = make_texture(SceneSpec(texture=texture), 80, 60, np.random.default_rng(1))
    assert image.shape == (60, 80)
    assert image.min() >= 0.0 and image.max() <= 1.0


def test_generation_is_deterministic():
    spec = regime_spec("generic", seed=5, frames=3, size=(48, 32))
    frames_a, flows_a = generate_sequence(spec)
    frames_b, flows_b = generate_sequence(spec)
    assert all(np.array_equal(a.data, b.data) for a, b in zip(frames_a, frames_b))
    assert all(np.array_equal(a.u, b.u) for a, b in zip(flows_a, flows_b))


def test_seed_changes_texture():
    a, _ = generate_sequence(regime_spec("rotation", seed=1, frames=2, size=(32, 32)))
    b, _ = generate_sequence(regime_spec("rotation", seed=2, frames=2, size=(32, 32)))
    assert not np.array_equal(a[0].data, b[0].data)


def test_accumulated_flows_match_analytic_map():
    n = 50
    spec = SceneSpec(motion="rotation", rotation_deg=0.3, frames=n + 1, size=(64, 48))
    _, flows = generate_sequence(spec)

    ys, xs = np.mgrid[0:48, 0:64].astype(np.float64)
    cx, cy = 63 / 2, 47 / 2
    a = np.deg2rad(0.3 * n)
    u = cx + np.cos(a) * (xs - cx) - np.sin(a) * (ys - cy) - xs
    v = cy + np.sin(a) * (xs - cx) + np.cos(a) * (ys - cy) - ys

    # центральная область: цепочка выборок не выходит за кадр
    assert epe_mean(accumulate_flows(flows), FlowField(u, v), margin=12) < 0.1


def test_loop_schedule_returns_to_start():
    values = schedule_values(SceneSpec(schedule="loop", frames=41))
    assert values[0] == 0.0
    assert abs(values[-1]) < 1e-9
    frames, _ = generate_sequence(regime_spec("loop", seed=7, frames=21, size=(48, 32)))
    assert np.allclose(frames[0].data, frames[-1].data, atol=1e-9)


def test_color_frames_have_three_channels():
    frames, _ = generate_sequence(SceneSpec(motion="translation", translation=(0.5, 0.0),
                                            frames=2, size=(32, 32), color=True))
    assert frames[0].channels == 3


def test_fast_motion_is_rejected():
    with pytest.raises(DataError):
        generate_sequence(SceneSpec(motion="translation", translation=(20.0, 0.0), frames=2, size=(64, 64)))


def test_non_invertible_deformation_rejected():
    with pytest.raises(ConfigError):
        SceneSpec(motion="deformation", bump_amplitude=30.0, bump_sigma=5.0, bump_count=2)


def test_unknown_regime():
    with pytest.raises(ConfigError):
        regime_spec("colonoscopy", seed=1)


def test_regime_split_proportions():
    train, val, test = REGIME_SPLITS["rotation"]
    assert train / (train + val + test) == pytest.approx(329 / 600, abs=0.01)
    assert val / (train + val + test) == pytest.approx(110 / 600, abs=0.01)
    assert all(sum(REGIME_SPLITS[r]) == 220 for r in REGIME_SPLITS if r != "loop")
    assert regime_spec("rotation", seed=1).frames == 221


def test_regime_dataset_scaled_split():
    dataset = make_regime_dataset("rotation", seed=7, frames=21, size=(64, 48))
    assert dataset.n_pairs == 20
    assert dataset.gold is None and dataset.truth is not None
    assert dataset.split.train == (0, 10)
    assert dataset.split.val == (10, 13)
    assert dataset.split.test == (13, 20)
    assert dataset.provenance["regime"] == "rotation"


def test_regime_suite():
    suite = make_regime_suite(seed=7, frames=5, size=(48, 48))
    assert list(suite) == ["rotation", "scale", "sparse", "deformation"]
    assert all(ds.n_pairs == 4 for ds in suite.values())


def test_same_seed_gives_identical_suites():
    first = make_regime_suite(seed=7, frames=5, size=(48, 48))
    second = make_regime_suite(seed=7, frames=5, size=(48, 48))
    for regime in first:
        a, b = first[regime], second[regime]
        assert a.split == b.split
        assert a.provenance == b.provenance
        assert all(np.array_equal(x.data, y.data) for x, y in zip(a.frames, b.frames))
        assert all(np.array_equal(x.u, y.u) and np.array_equal(x.v, y.v) for x, y in zip(a.truth, b.truth))
