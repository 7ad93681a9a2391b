import io

import numpy as np
import pytest
from PIL import Image

from src.errors import DataError, MalformedImage, MissingFile, UnsupportedFormat
from src.imaging import (GrayImage, decode_image, load_image, normalize_input, resize,
                         resize_array, rotate, to_uint8, write_pgm)


def _encode(array, fmt):
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format=fmt)
    return buf.getvalue()


def _naive_bilinear(matrix, out_w, out_h):
    in_h, in_w = matrix.shape
    out = np.zeros((out_h, out_w))
    for r in range(out_h):
        for c in range(out_w):
            y = min(max((r + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1)
            x = min(max((c + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1)
            y0, x0 = int(np.floor(y)), int(np.floor(x))
            y1, x1 = min(y0 + 1, in_h - 1), min(x0 + 1, in_w - 1)
            fy, fx = y - y0, x - x0
            out[r, c] = ((1 - fy) * (1 - fx) * matrix[y0, x0] + (1 - fy) * fx * matrix[y0, x1]
                         + fy * (1 - fx) * matrix[y1, x0] + fy * fx * matrix[y1, x1])
    return out


class TestGrayImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(DataError):
            GrayImage(np.full((2, 2), 1.5))

    def test_pixels_are_read_only(self):
        img = GrayImage(np.zeros((3, 4)))
        assert (img.width, img.height) == (4, 3)
        assert not img.is_square
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 1.0


class TestDecode:
    def test_png_gray_scaled_to_unit_range(self):
        pixels = np.array([[0, 255], [128, 64]], dtype=np.uint8)
        img = decode_image(_encode(pixels, "PNG"), "PNG")
        np.testing.assert_allclose(img.pixels, pixels / 255.0)

    def test_rgb_uses_luminance(self):
        rgb = np.zeros((1, 1, 3), dtype=np.uint8)
        rgb[0, 0] = (255, 0, 0)
        img = decode_image(_encode(rgb, "PNG"), "PNG")
        assert img.pixels[0, 0] == pytest.approx(0.299)

    def test_pgm(self):
        pixels = np.arange(16, dtype=np.uint8).reshape(4, 4) * 16
        img = decode_image(_encode(pixels, "PPM"), "PGM")
        np.testing.assert_allclose(img.pixels, pixels / 255.0)

    def test_pgm_header_bytes(self):
        data = b"P5\n2 2\n255\n" + bytes([0, 255, 255, 0])
        img = decode_image(data, "PGM")
        np.testing.assert_array_equal(img.pixels, [[0.0, 1.0], [1.0, 0.0]])

    def test_decoding_is_deterministic(self, rng):
        data = _encode(rng.integers(0, 256, size=(9, 7), dtype=np.uint8), "PNG")
        np.testing.assert_array_equal(decode_image(data, "PNG").pixels,
                                      decode_image(data, "PNG").pixels)

    def test_garbage_bytes(self):
        with pytest.raises(MalformedImage):
            decode_image(b"not an image", "PNG")

    def test_format_tag_mismatch(self):
        data = _encode(np.zeros((2, 2), dtype=np.uint8), "PNG")
        with pytest.raises(MalformedImage):
            decode_image(data, "BMP")

    def test_unknown_format(self):
        with pytest.raises(UnsupportedFormat):
            decode_image(b"", "JPEG2000")

    def test_load_by_suffix(self, tmp_path):
        path = tmp_path / "a.png"
        Image.fromarray(np.full((5, 5), 255, dtype=np.uint8)).save(path)
        assert load_image(path).pixels.min() == 1.0
        with pytest.raises(UnsupportedFormat):
            load_image(tmp_path / "a.xyz")
        with pytest.raises(MissingFile):
            load_image(tmp_path / "missing.png")


class TestResize:
    def test_matches_hand_bilinear(self, rng):
        for out_w, out_h in [(7, 5), (16, 16), (3, 9)]:
            matrix = rng.random((6, 8))
            np.testing.assert_allclose(resize_array(matrix, out_w, out_h),
                                       _naive_bilinear(matrix, out_w, out_h), atol=1e-12)

    def test_identity_is_a_copy(self, rng):
        matrix = rng.random((4, 4))
        out = resize_array(matrix, 4, 4)
        np.testing.assert_array_equal(out, matrix)
        assert out is not matrix

    def test_constant_image_stays_constant(self):
        img = GrayImage(np.full((10, 13), 0.3))
        np.testing.assert_allclose(resize(img, 128, 128).pixels, 0.3)

    def test_output_stays_within_input_range(self, rng):
        for out_w, out_h in [(5, 3), (17, 17), (40, 9)]:
            matrix = rng.random((7, 11))
            out = resize_array(matrix, out_w, out_h)
            assert out.min() >= matrix.min() - 1e-12
            assert out.max() <= matrix.max() + 1e-12

    def test_normalize_input_is_square(self, rng):
        img = normalize_input(GrayImage(rng.random((20, 30))), 16)
        assert img.pixels.shape == (16, 16)

    def test_bad_target(self):
        with pytest.raises(DataError):
            resize_array(np.zeros((2, 2)), 0, 3)


class TestRotate:
    def test_zero_degrees_is_identity(self, rng):
        img = GrayImage(rng.random((9, 9)))
        np.testing.assert_allclose(rotate(img, 0.0).pixels, img.pixels, atol=1e-12)

    def test_quarter_turn_is_counter_clockwise(self):
        pixels = np.zeros((5, 5))
        pixels[2, 4] = 1.0  # right of center
        out = rotate(GrayImage(pixels), 90.0).pixels
        # +x maps toward -y: the dot moves above the center
        assert out[0, 2] == pytest.approx(1.0)
        assert out.sum() == pytest.approx(1.0)


class TestPgm:
    def test_to_uint8_constant(self):
        assert not to_uint8(np.full((3, 3), 7.0)).any()

    def test_write_pgm_round_trip(self, tmp_path):
        matrix = np.array([[0.0, 2.0], [4.0, 8.0]])
        path = write_pgm(tmp_path / "s.pgm", matrix)
        back = np.asarray(Image.open(path))
        np.testing.assert_array_equal(back, to_uint8(matrix))
        assert back[1, 1] == 255
