"""Scene generation, noise calibration, and the bundled library."""

import math

import numpy as np
import pytest

from mlunmix import (
    ConfigError,
    SceneSpec,
    SpectralLibrary,
    add_noise,
    demo_library,
    generate_scene,
    noise_sigma,
    sample_noise,
    synthetic_library,
)
from mlunmix.metrics import sad


@pytest.fixture(scope="module")
def lib():
    return demo_library()


def small_lib(bands=32, count=6, seed=0):
    return synthetic_library(bands=bands, count=count, seed=seed, pool=40)


class TestSceneSpec:
    def test_block_must_divide(self):
        with pytest.raises(ValueError):
            SceneSpec(image_size=(10, 10), block_size=4)

    def test_filter_must_be_odd(self):
        with pytest.raises(ValueError):
            SceneSpec(filter_size=4)

    def test_purity_range(self):
        with pytest.raises(ValueError):
            SceneSpec(purity_threshold=0.0)
        with pytest.raises(ValueError):
            SceneSpec(purity_threshold=1.2)


class TestGenerateScene:
    def test_columns_sum_to_one(self, lib):
        truth = generate_scene(lib, SceneSpec(seed=1))
        sums = truth.S_true.data.sum(axis=0)
        assert np.abs(sums - 1.0).max() < 1e-12

    def test_no_pixel_above_purity_threshold(self, lib):
        spec = SceneSpec(seed=2)
        truth = generate_scene(lib, spec)
        assert truth.S_true.data.max() <= spec.purity_threshold + 1e-12

    def test_degenerate_spec_gives_raw_blocks(self, lib):
        spec = SceneSpec(image_size=(16, 16), block_size=8, filter_size=1,
                         purity_threshold=1.0, p=3, seed=3)
        truth = generate_scene(lib, spec)
        s = truth.S_true.data
        assert set(np.unique(s)) == {0.0, 1.0}
        assert (s.sum(axis=0) == 1.0).all()
        # block structure: all pixels of one 8x8 tile share a label
        labels = s.argmax(axis=0).reshape(16, 16)
        for bi in range(2):
            for bj in range(2):
                tile = labels[bi * 8:(bi + 1) * 8, bj * 8:(bj + 1) * 8]
                assert (tile == tile[0, 0]).all()

    def test_every_endmember_appears(self, lib):
        for seed in range(10):
            truth = generate_scene(lib, SceneSpec(image_size=(16, 16), p=3, seed=seed))
            assert (truth.S_true.data.max(axis=1) > 0).all()

    def test_deterministic_per_seed(self, lib):
        spec = SceneSpec(image_size=(16, 16), p=3, seed=9)
        t1 = generate_scene(lib, spec)
        t2 = generate_scene(lib, spec)
        assert np.array_equal(t1.S_true.data, t2.S_true.data)
        assert np.array_equal(t1.A_true.data, t2.A_true.data)

    def test_signatures_verbatim_from_library(self, lib):
        truth = generate_scene(lib, SceneSpec(seed=4))
        bank = lib.signatures
        for col in truth.A_true.data.T:
            assert any(np.array_equal(col, bank[:, k]) for k in range(lib.count))

    def test_clean_cube_is_exact_product(self, lib):
        truth = generate_scene(lib, SceneSpec(image_size=(16, 16), p=3, seed=5))
        assert np.array_equal(
            truth.clean_cube.data, truth.A_true.data @ truth.S_true.data
        )

    def test_library_too_small(self):
        with pytest.raises(ConfigError, match="library"):
            generate_scene(small_lib(count=3), SceneSpec(p=6))

    def test_purity_below_uniform_rejected(self, lib):
        with pytest.raises(ConfigError, match="purity"):
            generate_scene(lib, SceneSpec(p=6, purity_threshold=0.1))

    def test_smoothing_bounds_on_single_boundary_toy(self):
        # two half-image blocks with one straight vertical boundary: along the
        # boundary the mean filter changes nothing (difference 0, within the
        # spec slack 2/f^2); across it one window column swaps, bounding the
        # difference by f/f^2 = 1/f
        lib2 = small_lib(count=2, seed=1)
        spec = SceneSpec(image_size=(16, 16), block_size=8, filter_size=9,
                         purity_threshold=1.0, p=2, seed=0)
        truth = generate_scene(lib2, spec)
        plane = truth.S_true.data[0].reshape(16, 16)
        f = spec.filter_size
        horizontal = np.abs(np.diff(plane, axis=1))[1:-1, :]
        vertical = np.abs(np.diff(plane, axis=0))[:, 1:-1]
        assert horizontal.max() <= 1.0 / f + 1e-12
        assert vertical.max() <= 1.0 / f + 1e-12


class TestAddNoise:
    def test_infinite_snr_is_identity(self, lib):
        truth = generate_scene(lib, SceneSpec(image_size=(16, 16), p=3, seed=0))
        noisy, sigma = add_noise(truth.clean_cube, math.inf, seed=1)
        assert noisy is truth.clean_cube
        assert sigma == 0.0

    def test_requested_snr_achieved_before_clamping(self, lib):
        truth = generate_scene(lib, SceneSpec(image_size=(32, 32), p=6, seed=1))
        x = truth.clean_cube.data
        for snr in (15.0, 25.0):
            sigma = noise_sigma(truth.clean_cube, snr)
            field = sample_noise(truth.clean_cube.bands, truth.clean_cube.pixels, sigma, seed=7)
            measured = 10.0 * np.log10(
                (x * x).sum(axis=0).mean() / (field.data ** 2).sum(axis=0).mean()
            )
            assert measured == pytest.approx(snr, abs=0.2)

    def test_different_seeds_same_sigma(self, lib):
        truth = generate_scene(lib, SceneSpec(image_size=(16, 16), p=3, seed=2))
        n1, s1 = add_noise(truth.clean_cube, 20.0, seed=1)
        n2, s2 = add_noise(truth.clean_cube, 20.0, seed=2)
        assert s1 == s2
        assert not np.array_equal(n1.data, n2.data)

    def test_output_nonnegative_and_same_shape(self, lib):
        truth = generate_scene(lib, SceneSpec(image_size=(16, 16), p=3, seed=3))
        noisy, _ = add_noise(truth.clean_cube, 5.0, seed=0)
        assert noisy.data.shape == truth.clean_cube.data.shape
        assert (noisy.data >= 0).all()
        assert noisy.spatial_dims == truth.clean_cube.spatial_dims

    def test_noise_field_mean_near_zero(self):
        field = sample_noise(64, 256, sigma=0.1, seed=5)
        bound = 3.0 * 0.1 / math.sqrt(64 * 256)
        assert abs(field.data.mean()) < bound


class TestLibraries:
    def test_demo_library_shape(self, lib):
        assert lib.bands == 224
        assert lib.count == 12
        assert lib.wavelengths is not None
        assert lib.wavelengths[0] == pytest.approx(380.0)
        assert lib.wavelengths[-1] == pytest.approx(2500.0)

    def test_demo_library_angular_spread(self, lib):
        angles = [
            sad(lib.signatures[:, i], lib.signatures[:, j])
            for i in range(lib.count)
            for j in range(i + 1, lib.count)
        ]
        assert min(angles) > 0.15
        assert max(angles) < 0.8

    def test_synthetic_library_deterministic(self):
        a = synthetic_library(bands=48, count=5, seed=3, pool=30)
        b = synthetic_library(bands=48, count=5, seed=3, pool=30)
        assert np.array_equal(a.signatures, b.signatures)

    def test_synthetic_library_nonnegative(self):
        lib2 = small_lib()
        assert (lib2.signatures >= 0).all()
        assert lib2.signatures.max() <= 1.0

    def test_pool_must_cover_count(self):
        with pytest.raises(ValueError):
            synthetic_library(count=10, pool=5)
