import numpy as np
import pytest

from frbnet import frbt
from frbnet.fcr import LOG_FLOOR
from frbnet.spectral import dft2, make_freq_grid
from frbnet.synth import (PALETTE, SceneDecomposition, SynthConfig, compose_image, gen_dataset,
                          load_dataset, make_highlight, make_reflectance, make_shading, save_dataset)


@pytest.fixture(scope="module")
def small_ds():
    return gen_dataset(SynthConfig(n_samples=40, size=32, seed=5))


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        SynthConfig(test_highlight_range=(0.3, 1.0))
    with pytest.raises(ValueError):
        SynthConfig(train_gain_range=(0.2, 1.0), test_gain_range=(0.1, 0.3))
    with pytest.raises(ValueError):
        SynthConfig(shading_scale=1.5)
    with pytest.raises(ValueError):
        SynthConfig(n_classes=7)


def test_reflectance_class0_has_distinct_disk():
    cfg = SynthConfig()
    for seed in range(5):
        rho, label = make_reflectance(cfg, 0, seed)
        assert label == 0
        corner = rho[:, 0, 0]
        contrast = np.abs(rho - corner[:, None, None]).max(axis=(1, 2))
        assert contrast.max() >= 0.2
        # the shape colour is close to the class palette entry
        shape = np.abs(rho - np.asarray(PALETTE[0])[:, None, None]).max(axis=0) < 0.06
        assert shape.sum() > 0.05 * cfg.size**2


def test_reflectance_deterministic_and_bounded():
    cfg = SynthConfig()
    a, _ = make_reflectance(cfg, 2, (1, 2))
    b, _ = make_reflectance(cfg, 2, (1, 2))
    assert np.array_equal(a, b)
    assert a.min() >= LOG_FLOOR and a.max() <= 1.0


def test_reflectance_rejects_bad_class():
    with pytest.raises(ValueError):
        make_reflectance(SynthConfig(n_classes=4), 4, 0)


def test_class_counts_exact():
    ds = gen_dataset(SynthConfig(n_samples=1000, size=8, seed=3))
    counts = np.bincount([s.label for s in ds.samples], minlength=4)
    np.testing.assert_array_equal(counts, [250, 250, 250, 250])


def test_shading_near_constant_at_full_width_scale():
    cfg = SynthConfig(size=32)
    for seed in range(10):
        L = make_shading(cfg, seed, scale=32)
        assert ((L.max() - L.min()) / L.mean()) < 0.1


@pytest.mark.parametrize("scale", [2.0, 12.0])
def test_shading_is_smooth(scale):
    cfg = SynthConfig()
    grid = make_freq_grid(cfg.size, cfg.size)
    for seed in range(5):
        for plane in make_shading(cfg, seed, scale=scale):
            power = np.abs(dft2(plane - plane.mean())) ** 2
            assert power[grid.r > 0.3].sum() < 0.05 * power.sum()


def test_shading_range_and_gains():
    cfg = SynthConfig()
    L = make_shading(cfg, 4, value_range=(0.05, 0.15))
    assert L.min() >= 0.05 and L.max() <= 0.15
    base = make_shading(cfg, 4)
    scaled = make_shading(cfg, 4, gains=(2.0, 1.0, 0.5))
    np.testing.assert_allclose(scaled.mean(axis=(1, 2)) / base.mean(axis=(1, 2)), [2.0, 1.0, 0.5], rtol=1e-14)


def test_highlight_edge_cases():
    cfg = SynthConfig()
    assert not make_highlight(cfg, 0, n_blobs=0).any()
    one = make_highlight(cfg, 1, amplitude_range=(0.3, 0.3), n_blobs=1, jitter=0.0)
    assert abs(one.max() - 0.3) < 1e-12
    for seed in range(10):
        h = make_highlight(cfg, seed, amplitude_range=(0.0, 0.5), n_blobs=5)
        assert h.min() >= 0.0 and h.max() < 0.5


def test_highlight_is_sparse():
    cfg = SynthConfig()
    for seed in range(20):
        h = make_highlight(cfg, seed, amplitude_range=(0.3, 0.3), n_blobs=3, jitter=0.0)
        assert np.mean(h[0] >= 0.15) < 0.2


def test_highlight_rejects_amplitude_one():
    with pytest.raises(ValueError):
        make_highlight(SynthConfig(), 0, amplitude_range=(0.0, 1.0))


def test_compose_examples():
    cfg = SynthConfig()
    rho, _ = make_reflectance(cfg, 1, 0)
    L = make_shading(cfg, 0)
    zero = np.zeros_like(L)
    img, n = compose_image(SceneDecomposition(rho, L, zero, 1))
    assert n == 0 and np.array_equal(img, L * rho)
    const, _ = compose_image(SceneDecomposition(np.full_like(L, 0.5), np.full_like(L, 0.4), zero, 0))
    assert np.all(const == 0.2)
    H = make_highlight(cfg, 0)
    half = SceneDecomposition(rho, 0.5 * L, H, 1)
    a, _ = compose_image(half)
    b, _ = compose_image(SceneDecomposition(rho, L, H, 1))
    np.testing.assert_allclose(2 * a, b, rtol=1e-15)


def test_compose_reports_clamps():
    ones = np.ones((3, 8, 8))
    img, n = compose_image(SceneDecomposition(ones, ones, np.full((3, 8, 8), 0.5), 0))
    assert n == 3 * 64 and img.max() == 1.0


def test_split_arithmetic_and_disjoint_gains():
    cfg = SynthConfig(n_samples=200, size=16)
    ds = gen_dataset(cfg)
    assert len(ds.train) == 150 and len(ds.test) == 50
    hi_test = max(max(s.gains) for s in ds.test)
    lo_train = min(min(s.gains) for s in ds.train)
    assert hi_test < lo_train
    assert cfg.test_gain_range[1] < cfg.train_gain_range[0]


def test_dataset_invariants(small_ds):
    for s in small_ds.samples:
        d = s.decomposition
        recomposed, n = compose_image(d)
        assert n == s.clamp_count
        assert np.array_equal(recomposed, s.image)
        assert s.image.min() >= LOG_FLOOR
        assert d.highlight.max() < 1.0


def test_regeneration_is_byte_identical(small_ds):
    again = gen_dataset(SynthConfig(n_samples=40, size=32, seed=5))
    for a, b in zip(small_ds.samples, again.samples):
        assert frbt.dumps(a.image) == frbt.dumps(b.image)
        assert frbt.dumps(a.decomposition.highlight) == frbt.dumps(b.decomposition.highlight)
        assert a.label == b.label and a.split == b.split


def test_sample_depends_only_on_seed_and_index():
    a = gen_dataset(SynthConfig(n_samples=20, size=16, seed=2))
    b = gen_dataset(SynthConfig(n_samples=20, size=16, seed=3))
    assert not np.array_equal(a.samples[0].image, b.samples[0].image)


def test_save_and_load_roundtrip(small_ds, tmp_path):
    save_dataset(small_ds, tmp_path / "ds", png=True)
    assert (tmp_path / "ds" / "png" / "00000.png").is_file()
    back = load_dataset(tmp_path / "ds")
    assert back.config == small_ds.config
    for a, b in zip(small_ds.samples, back.samples):
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.decomposition.shading, b.decomposition.shading)
        assert (a.label, a.split, a.gains) == (b.label, b.split, b.gains)


def test_load_missing_dataset(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dataset(tmp_path / "nope")
