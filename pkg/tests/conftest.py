"""
Shared fixtures: seeded RNGs, a small pipeline configuration and generated
synthetic corpora.
"""
import numpy as np
import pytest

from config import PipelineConfig
from src.gabor import GaborParams, build_bank
from src.synth import generate_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    """Tiny but valid configuration: 64-dimensional descriptors"""
    return PipelineConfig(image_side=32, sinogram_side=16, n_angles=8, rbc_bits=8,
                          n_scales=2, n_orients=2, win_h=7, win_w=7, d1=4, d2=4,
                          workers=1)


@pytest.fixture
def small_bank(small_config):
    return build_bank(GaborParams.from_config(small_config))


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """4 classes x 6 train + 3 test images, 40 px"""
    out = tmp_path_factory.mktemp("tiny")
    return generate_dataset(out, n_classes=4, n_per_class=6, seed=3, n_test_per_class=3, size=40)


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    """The desk-scale acceptance corpus: 4 classes x (50 train + 20 test), seed 7"""
    out = tmp_path_factory.mktemp("desk")
    return generate_dataset(out, n_classes=4, n_per_class=50, seed=7, n_test_per_class=20)
