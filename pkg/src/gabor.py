"""
Gabor filter banks and Gabor-Radon feature extraction.

A query image goes image -> sinogram -> 32x32 sinogram -> one filtered,
pooled block per (scale, orientation) pair. The real-valued blocks form the
GRF descriptor used for classification; the same blocks binarized at their
median form the GRBF barcode used for retrieval.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from src.errors import DataError, KernelLargerThanImage, NonIntegerDimension
from src.imaging import GrayImage, resize_array
from src.radon import radon_transform

logger = logging.getLogger(__name__)


# ============================================================================
# TYPES
# ============================================================================

@dataclass(frozen=True)
class GaborParams:
    n_scales: int = 4
    n_orients: int = 5
    win_h: int = 23
    win_w: int = 23
    f_max: float = 0.25
    scale_factor: float = math.sqrt(2.0)
    gamma: float = 0.5
    bandwidth: float = 1.0
    phi: float = 0.0
    dc_correct: bool = True

    def __post_init__(self):
        if self.n_scales < 1 or self.n_orients < 1:
            raise DataError("a Gabor bank needs at least one scale and one orientation")
        if self.win_h < 1 or self.win_w < 1 or self.win_h % 2 == 0 or self.win_w % 2 == 0:
            raise DataError(f"Gabor window must be odd, got {self.win_h}x{self.win_w}")
        if not 0.0 < self.f_max <= 0.5:
            raise DataError(f"f_max must lie in (0, 0.5], got {self.f_max}")
        if self.scale_factor <= 1.0 or self.gamma <= 0.0 or self.bandwidth <= 0.0:
            raise DataError("scale_factor must be > 1; gamma and bandwidth must be > 0")

    @classmethod
    def from_config(cls, config):
        return cls(
            n_scales=config.n_scales, n_orients=config.n_orients,
            win_h=config.win_h, win_w=config.win_w,
            f_max=config.f_max, scale_factor=config.scale_factor,
            gamma=config.gamma, bandwidth=config.bandwidth,
            phi=config.phi, dc_correct=config.dc_correct,
        )

    @property
    def n_filters(self):
        return self.n_scales * self.n_orients


@dataclass(frozen=True, eq=False)
class GaborBank:
    params: GaborParams
    kernels: np.ndarray  # (U, V, win_h, win_w) complex
    frequencies: np.ndarray  # omega_u
    orientations: np.ndarray  # theta_v, radians

    def __len__(self):
        return self.params.n_filters

    def __iter__(self):
        """Yield (u, v, omega, theta, kernel) in scale-major order"""
        for u in range(self.params.n_scales):
            for v in range(self.params.n_orients):
                yield u, v, self.frequencies[u], self.orientations[v], self.kernels[u, v]


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """Pooled Gabor magnitudes, one row-major block per (u, v)"""

    values: np.ndarray
    n_blocks: int
    block_len: int

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class GaborRadonBarcode:
    bits: np.ndarray  # uint8 0/1, same layout as FeatureVector
    n_blocks: int
    block_len: int

    def __len__(self):
        return self.bits.size


# ============================================================================
# BANK
# ============================================================================

def envelope_sigma(omega, bandwidth):
    """Gaussian sigma giving a half-response bandwidth of `bandwidth` octaves"""
    two_b = 2.0 ** bandwidth
    return (1.0 / (math.pi * omega)) * math.sqrt(math.log(2.0) / 2.0) * (two_b + 1.0) / (two_b - 1.0)


def gabor_kernel(omega, theta, params: GaborParams):
    """Sample the complex Gabor function on the window grid, center tap at the middle"""
    half_h, half_w = params.win_h // 2, params.win_w // 2
    y, x = np.mgrid[-half_h:half_h + 1, -half_w:half_w + 1].astype(np.float64)
    x_rot = x * math.cos(theta) + y * math.sin(theta)
    y_rot = -x * math.sin(theta) + y * math.cos(theta)

    sigma = envelope_sigma(omega, params.bandwidth)
    gain = omega ** 2 / (math.pi * params.gamma)
    envelope = np.exp(-(x_rot ** 2 + params.gamma ** 2 * y_rot ** 2) / (2.0 * sigma ** 2))
    carrier = np.exp(1j * (2.0 * math.pi * omega * x_rot + params.phi))
    kernel = gain * envelope * carrier

    if params.dc_correct:
        kernel = kernel - kernel.real.mean()
    return kernel


def build_bank(params: GaborParams) -> GaborBank:
    """
    Build the U x V bank

    omega_u = f_max / scale_factor**u and theta_v = pi * v / V.
    """
    frequencies = np.array([params.f_max / params.scale_factor ** u
                            for u in range(params.n_scales)])
    orientations = np.array([math.pi * v / params.n_orients for v in range(params.n_orients)])
    kernels = np.empty((params.n_scales, params.n_orients, params.win_h, params.win_w),
                       dtype=np.complex128)
    for u, omega in enumerate(frequencies):
        for v, theta in enumerate(orientations):
            kernels[u, v] = gabor_kernel(omega, theta, params)
    logger.debug("Built Gabor bank with %d kernels", params.n_filters)
    return GaborBank(params=params, kernels=kernels, frequencies=frequencies,
                     orientations=orientations)


# ============================================================================
# FILTERING
# ============================================================================

def convolve(matrix, kernel):
    """
    Same-size 2-D convolution with zero padding

    Args:
        matrix: 2-D real or complex array
        kernel: 2-D array no larger than matrix in either dimension

    Returns:
        Array with matrix's shape
    """
    matrix = np.asarray(matrix)
    kernel = np.asarray(kernel)
    if kernel.shape[0] > matrix.shape[0] or kernel.shape[1] > matrix.shape[1]:
        raise KernelLargerThanImage(
            f"kernel {kernel.shape} is larger than image {matrix.shape}")
    return signal.convolve2d(matrix, kernel, mode="same", boundary="fill", fillvalue=0)


def pool_blocks(matrix, d1, d2):
    """Non-overlapping d1 x d2 block means"""
    rows, cols = matrix.shape
    if rows % d1 or cols % d2:
        raise NonIntegerDimension(f"{d1}x{d2} blocks do not tile a {rows}x{cols} matrix")
    return matrix.reshape(rows // d1, d1, cols // d2, d2).mean(axis=(1, 3))


def vector_dimension(M, N, n_g, d1, d2):
    """Descriptor length M*N*n_g / (d1*d2)"""
    if min(M, N, n_g, d1, d2) < 1:
        raise NonIntegerDimension("all vector-dimension factors must be positive")
    numerator = M * N * n_g
    if numerator % (d1 * d2):
        raise NonIntegerDimension(f"{d1}*{d2} does not divide {M}*{N}*{n_g}")
    return numerator // (d1 * d2)


def extract_grf_grbf(img: GrayImage, bank: GaborBank, n_angles: int, d1: int, d2: int,
                     sinogram_side: int = 32, sino=None):
    """
    Extract the Gabor-Radon feature vector and barcode of one image

    Args:
        img: Normalized square image
        bank: Gabor filter bank
        n_angles: Projection count for the sinogram
        d1, d2: Pooling block size; must divide sinogram_side
        sinogram_side: Side of the resized sinogram
        sino: Precomputed sinogram of img with n_angles projections, if available

    Returns:
        Tuple (FeatureVector, GaborRadonBarcode)
    """
    if sinogram_side % d1 or sinogram_side % d2:
        raise NonIntegerDimension(f"d1={d1}, d2={d2} must divide {sinogram_side}")

    if sino is None:
        sino = radon_transform(img, n_angles)
    elif sino.n_angles != n_angles:
        raise DataError(f"sinogram has {sino.n_angles} angles, expected {n_angles}")
    small = resize_array(sino.data, sinogram_side, sinogram_side)

    values, bits = [], []
    for _, _, _, _, kernel in bank:
        magnitude = np.abs(convolve(small, kernel))
        pooled = pool_blocks(magnitude, d1, d2).ravel()
        values.append(pooled)
        bits.append((pooled >= np.median(pooled)).astype(np.uint8))

    block_len = (sinogram_side // d1) * (sinogram_side // d2)
    return (FeatureVector(np.concatenate(values), len(bank), block_len),
            GaborRadonBarcode(np.concatenate(bits), len(bank), block_len))
