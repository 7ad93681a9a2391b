"""
Discrete Radon transform and classic Radon barcodes.

The sinogram is computed by rotate-then-sum: the image is resampled
bilinearly (zero fill) on a canvas turned by -theta, and each canvas column
is summed along its ray at RADON_RAY_SAMPLES points per pixel step. Every
projection is then rescaled to the image mass.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from src.errors import DataError, NonSquareInput
from src.imaging import GrayImage, resize_array
from utils.constants import RADON_RAY_SAMPLES

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Sinogram:
    """Radial-bin x angle matrix of projection sums"""

    data: np.ndarray
    angles: np.ndarray  # degrees

    @property
    def n_bins(self):
        return self.data.shape[0]

    @property
    def n_angles(self):
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class RadonBarcode:
    bits: np.ndarray  # uint8 0/1, angle-major
    n_angles: int
    bits_per_angle: int

    def __post_init__(self):
        if self.bits.size != self.n_angles * self.bits_per_angle:
            raise DataError("barcode length must equal n_angles * bits_per_angle")


def projection_angles(n_angles):
    """Evenly spaced angles over [0, 180) in degrees"""
    return np.arange(n_angles, dtype=np.float64) * (180.0 / n_angles)


def radial_bins(side):
    """ceil(side * sqrt 2), bumped to the next odd number"""
    n_bins = math.ceil(side * math.sqrt(2.0))
    return n_bins if n_bins % 2 else n_bins + 1


def radon_transform(img: GrayImage, n_angles: int) -> Sinogram:
    """
    Compute the sinogram of a square image

    Args:
        img: Square GrayImage
        n_angles: Number of projections over [0, 180)

    Returns:
        Sinogram of shape (radial_bins(side), n_angles)
    """
    if not img.is_square:
        raise NonSquareInput(f"Radon transform needs a square image, got {img.width}x{img.height}")
    if n_angles < 1:
        raise DataError("n_angles must be >= 1")

    side = img.width
    n_bins = radial_bins(side)
    half = (n_bins - 1) / 2.0
    center = (side - 1) / 2.0
    mass = float(img.pixels.sum())

    # Column j of the rotated canvas is the ray rho = j - half; t runs along the ray
    rho = np.arange(n_bins, dtype=np.float64) - half
    step = 1.0 / RADON_RAY_SAMPLES
    t = (np.arange(n_bins * RADON_RAY_SAMPLES, dtype=np.float64) + 0.5) * step - n_bins / 2.0
    tt, rr = np.meshgrid(t, rho, indexing="ij")

    angles = projection_angles(n_angles)
    data = np.zeros((n_bins, n_angles))
    for k, theta in enumerate(np.deg2rad(angles)):
        cos_t, sin_t = math.cos(theta), math.sin(theta)
        xs = center + rr * cos_t - tt * sin_t
        ys = center + rr * sin_t + tt * cos_t
        rotated = ndimage.map_coordinates(img.pixels, [ys, xs], order=1, mode="grid-constant",
                                          cval=0.0)
        data[:, k] = rotated.sum(axis=0) * step

    # Quadrature leaves a small per-angle mass error; scale each column back to the image mass
    totals = data.sum(axis=0)
    nonzero = totals > 0
    data[:, nonzero] *= mass / totals[nonzero]
    return Sinogram(data=data, angles=angles)


def threshold_projection(values):
    """Bits of one projection: 1 where value >= median of its positive values"""
    values = np.asarray(values, dtype=np.float64)
    positive = values[values > 0]
    if positive.size == 0:
        return np.zeros(values.shape, dtype=np.uint8)
    return (values >= np.median(positive)).astype(np.uint8)


def radon_barcode(sino: Sinogram, bits_per_angle: int = 32) -> RadonBarcode:
    """
    Binarize every projection at the median of its non-zero values

    Projections are first resampled to bits_per_angle samples along the
    radial axis so every image yields the same code length.
    """
    if bits_per_angle < 1:
        raise DataError("bits_per_angle must be >= 1")
    resampled = resize_array(sino.data, sino.n_angles, bits_per_angle)
    rows = [threshold_projection(resampled[:, k]) for k in range(sino.n_angles)]
    return RadonBarcode(bits=np.concatenate(rows), n_angles=sino.n_angles,
                        bits_per_angle=bits_per_angle)
