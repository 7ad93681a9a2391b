import math

import numpy as np
import pytest

from src.errors import NonSquareInput
from src.imaging import GrayImage, rotate
from src.radon import (projection_angles, radial_bins, radon_barcode, radon_transform,
                       threshold_projection)


def _bilinear(pixels, x, y):
    """Bilinear interpolant of the pixel grid, zero outside it"""
    side = pixels.shape[0]
    x0, y0 = np.floor(x).astype(int), np.floor(y).astype(int)
    fx, fy = x - x0, y - y0
    total = np.zeros_like(x)
    for dy, wy in ((0, 1.0 - fy), (1, fy)):
        for dx, wx in ((0, 1.0 - fx), (1, fx)):
            xi, yi = x0 + dx, y0 + dy
            inside = (xi >= 0) & (xi < side) & (yi >= 0) & (yi < side)
            values = np.where(inside, pixels[np.clip(yi, 0, side - 1), np.clip(xi, 0, side - 1)], 0.0)
            total += wx * wy * values
    return total


def _line_oracle(pixels, n_angles, step=0.01):
    """Integrate the interpolant along every line rho = (x - c) cos + (y - c) sin"""
    side = pixels.shape[0]
    n_bins = radial_bins(side)
    half = (n_bins - 1) / 2.0
    c = (side - 1) / 2.0
    t = np.arange(-n_bins / 2.0, n_bins / 2.0, step) + step / 2.0
    out = np.zeros((n_bins, n_angles))
    for k in range(n_angles):
        theta = math.radians(180.0 * k / n_angles)
        for j in range(n_bins):
            rho = j - half
            x = c + rho * math.cos(theta) - t * math.sin(theta)
            y = c + rho * math.sin(theta) + t * math.cos(theta)
            out[j, k] = _bilinear(pixels, x, y).sum() * step
    return out


class TestGeometry:
    def test_angles_cover_half_turn(self):
        np.testing.assert_allclose(projection_angles(4), [0.0, 45.0, 90.0, 135.0])

    def test_bins_are_odd(self):
        assert radial_bins(8) == 13
        assert radial_bins(128) == 183
        assert all(radial_bins(s) % 2 == 1 for s in range(1, 64))

    def test_non_square_rejected(self):
        with pytest.raises(NonSquareInput):
            radon_transform(GrayImage(np.zeros((4, 5))), 4)


class TestLineOracle:
    def test_matches_line_integral(self, rng):
        for n_angles in (4, 8):
            for _ in range(25):
                pixels = rng.random((8, 8))
                sino = radon_transform(GrayImage(pixels), n_angles)
                expected = _line_oracle(pixels, n_angles)
                interior = slice(1, -1)
                np.testing.assert_allclose(sino.data[interior], expected[interior],
                                           rtol=2e-2, atol=2e-2 * expected.max())

    def test_single_row(self):
        pixels = np.zeros((9, 9))
        pixels[2, :] = 1.0
        sino = radon_transform(GrayImage(pixels), 2)  # 0 and 90 degrees
        half = (sino.n_bins - 1) // 2
        # Vertical projection: one unit per column
        np.testing.assert_allclose(sino.data[half - 4:half + 5, 0], 1.0, atol=1e-12)
        # Horizontal projection: the whole row lands two bins above the center
        assert sino.data[half - 2, 1] == pytest.approx(9.0)
        assert sino.data[:, 1].sum() == pytest.approx(9.0)


class TestMass:
    def test_every_projection_conserves_mass(self, rng):
        for _ in range(25):
            pixels = rng.random((8, 8))
            sino = radon_transform(GrayImage(pixels), 8)
            np.testing.assert_allclose(sino.data.sum(axis=0), pixels.sum(), rtol=1e-6)

    def test_center_pixel_hits_center_bin(self):
        pixels = np.zeros((9, 9))
        pixels[4, 4] = 1.0
        sino = radon_transform(GrayImage(pixels), 16)
        half = (sino.n_bins - 1) // 2
        np.testing.assert_array_equal(sino.data.argmax(axis=0), half)
        np.testing.assert_allclose(sino.data.sum(axis=0), 1.0, rtol=1e-9)


class TestRotationCovariance:
    def test_rotation_shifts_columns(self):
        side, n_angles = 33, 8
        yy, xx = np.mgrid[0:side, 0:side]
        blob = np.exp(-((xx - 20.0) ** 2 + (yy - 13.0) ** 2) / (2 * 3.0 ** 2))
        img = GrayImage(blob)
        base = radon_transform(img, n_angles).data
        turned = radon_transform(rotate(img, 180.0 / n_angles), n_angles).data
        np.testing.assert_allclose(turned[:, :-1], base[:, 1:], atol=0.05 * base.max())
        # The wrapped column is the first one mirrored in rho
        np.testing.assert_allclose(turned[:, -1], base[::-1, 0], atol=0.05 * base.max())


class TestRadonBarcode:
    def test_threshold_uses_positive_median(self):
        bits = threshold_projection([0.0, 0.0, 1.0, 2.0, 3.0])
        np.testing.assert_array_equal(bits, [0, 0, 0, 1, 1])

    def test_empty_projection_is_zero(self):
        assert not threshold_projection(np.zeros(6)).any()

    def test_length_and_blank_image(self):
        sino = radon_transform(GrayImage(np.zeros((16, 16))), 8)
        code = radon_barcode(sino, bits_per_angle=32)
        assert code.bits.size == 8 * 32
        assert not code.bits.any()

    def test_deterministic(self, rng):
        img = GrayImage(rng.random((16, 16)))
        a = radon_barcode(radon_transform(img, 8), 16).bits
        b = radon_barcode(radon_transform(img, 8), 16).bits
        np.testing.assert_array_equal(a, b)
