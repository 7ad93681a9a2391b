import math

import numpy as np
import pytest

from src.errors import DataError, KernelLargerThanImage, NonIntegerDimension
from src.gabor import (GaborParams, build_bank, convolve, envelope_sigma, extract_grf_grbf,
                       gabor_kernel, pool_blocks, vector_dimension)
from src.imaging import GrayImage
from src.radon import radon_transform


def _naive_convolve(image, kernel):
    """Same-size zero-padded convolution by four nested loops"""
    rows, cols = image.shape
    kh, kw = kernel.shape
    oy, ox = kh // 2, kw // 2
    out = np.zeros((rows, cols), dtype=np.result_type(image, kernel))
    for i in range(rows):
        for j in range(cols):
            acc = 0
            for m in range(kh):
                for n in range(kw):
                    y, x = i + oy - m, j + ox - n
                    if 0 <= y < rows and 0 <= x < cols:
                        acc += image[y, x] * kernel[m, n]
            out[i, j] = acc
    return out


class TestVectorDimension:
    @pytest.mark.parametrize("n_g, expected", [(12, 768), (20, 1280), (48, 3072)])
    def test_published_sizes(self, n_g, expected):
        assert vector_dimension(32, 32, n_g, 4, 4) == expected

    def test_non_divisible(self):
        with pytest.raises(NonIntegerDimension):
            vector_dimension(32, 32, 20, 3, 4)

    def test_default_config_matches(self):
        from config import PipelineConfig
        assert PipelineConfig().vector_dim == 1280


class TestKernel:
    def test_sigma_for_one_octave(self):
        omega = 0.25
        expected = (1 / (math.pi * omega)) * math.sqrt(math.log(2) / 2) * 3.0
        assert envelope_sigma(omega, 1.0) == pytest.approx(expected)

    def test_center_tap_without_dc_correction(self):
        params = GaborParams(dc_correct=False)
        kernel = gabor_kernel(0.25, 0.3, params)
        assert kernel[11, 11] == pytest.approx(0.25 ** 2 / (math.pi * 0.5))

    def test_point_symmetry(self):
        params = GaborParams(win_h=15, win_w=15)
        for theta in (0.0, math.pi / 5, 2.0):
            kernel = gabor_kernel(0.2, theta, params)
            np.testing.assert_allclose(kernel[::-1, ::-1], np.conj(kernel), atol=1e-14)

    def test_dc_correction_zeroes_real_mean(self):
        kernel = gabor_kernel(0.1, 0.0, GaborParams())
        assert abs(kernel.real.mean()) < 1e-15

    def test_bank_layout(self):
        bank = build_bank(GaborParams(n_scales=3, n_orients=4, win_h=9, win_w=9))
        assert bank.kernels.shape == (3, 4, 9, 9)
        assert len(bank) == 12
        np.testing.assert_allclose(bank.frequencies, [0.25, 0.25 / math.sqrt(2), 0.125])
        np.testing.assert_allclose(bank.orientations, [0, math.pi / 4, math.pi / 2, 3 * math.pi / 4])
        order = [(u, v) for u, v, *_ in bank]
        assert order == [(u, v) for u in range(3) for v in range(4)]

    def test_even_window_rejected(self):
        with pytest.raises(DataError):
            GaborParams(win_h=22)


class TestConvolve:
    def test_impulse_reproduces_kernel(self, rng):
        kernel = rng.random((7, 7)) + 1j * rng.random((7, 7))
        image = np.zeros((31, 31))
        image[15, 15] = 1.0
        out = convolve(image, kernel)
        np.testing.assert_allclose(out[12:19, 12:19], kernel, atol=1e-14)

    def test_matches_naive_loops(self, rng):
        for _ in range(100):
            rows, cols = rng.integers(5, 11, size=2)
            kh = int(rng.choice([1, 3, 5]))
            kw = int(rng.choice([1, 3, 5]))
            image = rng.random((rows, cols))
            kernel = rng.standard_normal((kh, kw)) + 1j * rng.standard_normal((kh, kw))
            np.testing.assert_allclose(convolve(image, kernel), _naive_convolve(image, kernel),
                                       atol=1e-10)

    def test_linear_in_the_image(self, rng):
        kernel = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        a, b = rng.random((12, 12)), rng.random((12, 12))
        combined = convolve(2.5 * a - 0.75 * b, kernel)
        np.testing.assert_allclose(combined, 2.5 * convolve(a, kernel) - 0.75 * convolve(b, kernel),
                                   atol=1e-12)

    def test_kernel_too_large(self):
        with pytest.raises(KernelLargerThanImage):
            convolve(np.zeros((5, 5)), np.ones((7, 3)))


class TestPooling:
    def test_block_means(self):
        matrix = np.arange(16, dtype=float).reshape(4, 4)
        np.testing.assert_allclose(pool_blocks(matrix, 2, 2), [[2.5, 4.5], [10.5, 12.5]])

    def test_blocks_must_tile(self):
        with pytest.raises(NonIntegerDimension):
            pool_blocks(np.zeros((6, 6)), 4, 4)


class TestExtraction:
    def test_lengths_and_block_alignment(self, rng, small_config, small_bank):
        img = GrayImage(rng.random((32, 32)))
        features, barcode = extract_grf_grbf(img, small_bank, 8, 4, 4, sinogram_side=16)
        assert len(features) == len(barcode) == small_config.vector_dim == 64
        values = features.values.reshape(features.n_blocks, features.block_len)
        bits = barcode.bits.reshape(barcode.n_blocks, barcode.block_len)
        for block_values, block_bits in zip(values, bits):
            expected = (block_values >= np.median(block_values)).astype(np.uint8)
            np.testing.assert_array_equal(block_bits, expected)
            assert block_bits.sum() >= block_bits.size / 2

    def test_magnitudes_are_non_negative(self, rng, small_bank):
        img = GrayImage(rng.random((32, 32)))
        features, _ = extract_grf_grbf(img, small_bank, 8, 4, 4, sinogram_side=16)
        assert (features.values >= 0).all()

    def test_precomputed_sinogram_is_used(self, rng, small_bank):
        img = GrayImage(rng.random((32, 32)))
        sino = radon_transform(img, 8)
        a, _ = extract_grf_grbf(img, small_bank, 8, 4, 4, 16)
        b, _ = extract_grf_grbf(img, small_bank, 8, 4, 4, 16, sino=sino)
        np.testing.assert_array_equal(a.values, b.values)
        with pytest.raises(DataError):
            extract_grf_grbf(img, small_bank, 16, 4, 4, 16, sino=sino)

    def test_pool_must_divide_sinogram(self, rng, small_bank):
        img = GrayImage(rng.random((32, 32)))
        with pytest.raises(NonIntegerDimension):
            extract_grf_grbf(img, small_bank, 8, 3, 4, sinogram_side=16)
