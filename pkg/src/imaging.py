"""
Grayscale image decoding, resizing and rotation.

Every downstream descriptor has a fixed length, so every image entering the
pipeline goes through normalize_input first.
"""
import logging
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from src.errors import DataError, MalformedImage, MissingFile, UnsupportedFormat
from utils.constants import IMAGE_FORMATS, LUMINANCE_WEIGHTS

logger = logging.getLogger(__name__)

# PIL reports PGM files as PPM
_PIL_FORMAT = {"PNG": "PNG", "PGM": "PPM", "BMP": "BMP", "TIFF": "TIFF"}
_RGB_MODES = {"RGB", "RGBA", "RGBX", "CMYK", "YCbCr", "P", "PA"}
_SIXTEEN_BIT_MODES = {"I;16", "I;16L", "I;16B", "I;16N", "I"}


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major grayscale image with intensities in [0, 1]"""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.array(self.pixels, dtype=np.float64)
        if pixels.ndim != 2 or pixels.size == 0:
            raise DataError(f"GrayImage needs a non-empty 2-D array, got shape {pixels.shape}")
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
            raise DataError("GrayImage intensities must lie in [0, 1]")
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def is_square(self):
        return self.width == self.height


def decode_image(data: bytes, fmt: str) -> GrayImage:
    """
    Decode encoded image bytes into a GrayImage

    Args:
        data: Encoded file contents
        fmt: Format tag, one of PNG, PGM, BMP, TIFF

    Returns:
        GrayImage scaled to [0, 1] by the format's maximum value; colour
        inputs are reduced to BT.601 luminance
    """
    tag = fmt.upper().lstrip(".")
    if tag not in _PIL_FORMAT:
        raise UnsupportedFormat(f"unsupported image format {fmt!r}")

    try:
        img = Image.open(BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise MalformedImage(f"cannot decode {tag} bytes: {e}") from e

    if img.format != _PIL_FORMAT[tag]:
        raise MalformedImage(f"bytes are {img.format}, expected {tag}")

    mode = img.mode
    if mode == "1":
        pixels = np.asarray(img, dtype=np.float64)
    elif mode == "L":
        pixels = np.asarray(img, dtype=np.float64) / 255.0
    elif mode == "LA":
        pixels = np.asarray(img.getchannel(0), dtype=np.float64) / 255.0
    elif mode in _RGB_MODES:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        pixels = rgb @ np.asarray(LUMINANCE_WEIGHTS)
    elif mode in _SIXTEEN_BIT_MODES:
        pixels = np.asarray(img, dtype=np.float64) / 65535.0
    elif mode == "F":
        pixels = np.asarray(img, dtype=np.float64)
    else:
        raise UnsupportedFormat(f"unsupported pixel mode {mode!r} in {tag} image")

    return GrayImage(np.clip(pixels, 0.0, 1.0))


def load_image(path) -> GrayImage:
    """Read an image file, picking the decoder from its suffix"""
    path = Path(path)
    fmt = IMAGE_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise UnsupportedFormat(f"{path}: unsupported file type {path.suffix!r}")
    if not path.exists():
        raise MissingFile(f"image not found: {path}")
    try:
        return decode_image(path.read_bytes(), fmt)
    except MalformedImage as e:
        raise MalformedImage(f"{path}: {e}") from e


def _center_aligned(n_out, n_in):
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    return np.clip(coords, 0.0, n_in - 1)


def resize_array(matrix, out_w, out_h):
    """
    Bilinear resize with pixel-center alignment and edge clamping

    Args:
        matrix: 2-D real array (rows = height)
        out_w: Output width
        out_h: Output height

    Returns:
        float64 array of shape (out_h, out_w)
    """
    if out_w < 1 or out_h < 1:
        raise DataError(f"resize target must be positive, got {out_w}x{out_h}")
    matrix = np.asarray(matrix, dtype=np.float64)
    in_h, in_w = matrix.shape
    if (in_h, in_w) == (out_h, out_w):
        return matrix.copy()

    rows = _center_aligned(out_h, in_h)
    cols = _center_aligned(out_w, in_w)
    grid = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(matrix, grid, order=1, mode="nearest")


def resize(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    if (img.width, img.height) == (out_w, out_h):
        return img
    resized = resize_array(img.pixels, out_w, out_h)
    # Convex combinations can drift past the bounds by an ulp
    return GrayImage(np.clip(resized, 0.0, 1.0))


def normalize_input(img: GrayImage, side: int = 128) -> GrayImage:
    """Resize straight to side x side; aspect ratio is not preserved"""
    return resize(img, side, side)


def rotate(img: GrayImage, degrees: float) -> GrayImage:
    """
    Rotate image content counter-clockwise about the grid center

    Bilinear sampling with zero fill; the output keeps the input size.
    """
    h, w = img.pixels.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    alpha = np.deg2rad(degrees)
    cos_a, sin_a = np.cos(alpha), np.sin(alpha)

    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64),
                         indexing="ij")
    dx, dy = xx - cx, yy - cy
    src_x = cx + cos_a * dx - sin_a * dy
    src_y = cy + sin_a * dx + cos_a * dy
    out = ndimage.map_coordinates(img.pixels, [src_y, src_x], order=1, mode="constant", cval=0.0)
    return GrayImage(np.clip(out, 0.0, 1.0))


def to_uint8(matrix):
    """Min-max scale a real matrix to 8 bits; constant input maps to 0"""
    matrix = np.asarray(matrix, dtype=np.float64)
    lo, hi = matrix.min(), matrix.max()
    if hi <= lo:
        return np.zeros(matrix.shape, dtype=np.uint8)
    return np.round((matrix - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_pgm(path, matrix):
    """Write a matrix as a binary PGM (min-max scaled)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(matrix)).save(path, format="PPM")
    logger.debug("Wrote %s", path)
    return path
