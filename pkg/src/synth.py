"""
Synthetic labelled corpus: parametric shape families standing in for IRMA.

Each class is a shape family (disk, bar, ring, cross) plus a variant that
sets its size, elongation or orientation (see shape_geometry). The family
is encoded in the second character of the T axis of the class's IRMA code.
"""
import logging
import math
from pathlib import Path

import numpy as np
from PIL import Image
from tqdm import tqdm

from src.errors import DataError
from src.irma import parse_irma, write_manifest

logger = logging.getLogger(__name__)

FAMILIES = ("disk", "bar", "ring", "cross")
MAX_VARIANTS = 36


def class_code(class_idx):
    family, variant = class_idx % len(FAMILIES), class_idx // len(FAMILIES)
    return parse_irma(f"1{family + 1}21-1{np.base_repr(variant, 36).lower()}0-2{family}0-700")


def _soft(distance):
    """Anti-aliased inside test: 1 inside, 0 outside, linear over one pixel"""
    return np.clip(0.5 - distance, 0.0, 1.0)


def _bar(xx, yy, cx, cy, theta, half_len, half_width):
    along = (xx - cx) * math.cos(theta) + (yy - cy) * math.sin(theta)
    across = -(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta)
    outside = np.maximum(np.abs(along) - half_len, np.abs(across) - half_width)
    return _soft(outside)


def shape_geometry(family, variant):
    """
    Geometry of one class: (size factor, aspect, angle in degrees)

    Every variant in [0, MAX_VARIANTS) of a family gets its own combination.
    Disks and rings vary radius and elongation; bars and crosses vary
    orientation and arm length.
    """
    if not 0 <= variant < MAX_VARIANTS:
        raise DataError(f"variant must lie in [0, {MAX_VARIANTS})")
    if family in ("disk", "ring"):
        return 1.0 - 0.1 * (variant % 6), 1.0 - 0.12 * (variant // 6), 0.0
    if family == "bar":
        return 1.0 - 0.25 * (variant // 12), 1.0, 30.0 + 15.0 * (variant % 12)
    if family == "cross":
        # The second arm shrinks with the variant group, so 90 degree turns stay distinct
        return 1.0, 1.0 - 0.25 * (variant // 12), 7.5 * (variant % 12)
    raise DataError(f"unknown shape family {family!r}")


def render_shape(family, variant, rng, size):
    """
    Draw one jittered sample of a shape family

    Returns:
        (size, size) float array in [0, 1]
    """
    scale, aspect, angle = shape_geometry(family, variant)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    cx = size / 2.0 + rng.uniform(-0.08, 0.08) * size
    cy = size / 2.0 + rng.uniform(-0.08, 0.08) * size
    radius = size * 0.25 * rng.uniform(0.85, 1.15)
    theta = math.radians(angle + rng.uniform(-4.0, 4.0))

    if family in ("disk", "ring"):
        along = (xx - cx) * math.cos(theta) + (yy - cy) * math.sin(theta)
        across = -(xx - cx) * math.sin(theta) + (yy - cy) * math.cos(theta)
        r = radius * scale
        # Radial distance to the ellipse with semi-axes r and r * aspect
        norm = np.hypot(along, across / aspect)
        distance = np.hypot(along, across) * (norm - r) / np.maximum(norm, 1e-9)
        if family == "disk":
            mask = _soft(distance)
        else:
            mask = _soft(np.abs(distance) - radius * 0.18)
    elif family == "bar":
        mask = _bar(xx, yy, cx, cy, theta, radius * 1.3 * scale, radius * 0.2)
    else:
        mask = np.maximum(_bar(xx, yy, cx, cy, theta, radius * 1.2, radius * 0.16),
                          _bar(xx, yy, cx, cy, theta + math.pi / 2, radius * 1.2 * aspect,
                               radius * 0.16))

    foreground = rng.uniform(0.6, 0.9)
    background = rng.uniform(0.05, 0.15)
    img = background + (foreground - background) * mask
    img += rng.normal(0.0, 0.04, size=img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_dataset(out_dir, n_classes=4, n_per_class=50, seed=7, n_test_per_class=0,
                     size=96, progress=False):
    """
    Write PNG images plus train.tsv (and test.tsv) manifests

    Args:
        out_dir: Destination directory
        n_classes: Number of classes (at most 4 * 36)
        n_per_class: Training images per class
        seed: RNG seed; identical seeds give identical bytes
        n_test_per_class: Test images per class (0 skips test.tsv)
        size: Image side in pixels
        progress: Show a progress bar

    Returns:
        Dict with manifest paths and counts
    """
    if not 1 <= n_classes <= len(FAMILIES) * MAX_VARIANTS:
        raise DataError(f"n_classes must lie in [1, {len(FAMILIES) * MAX_VARIANTS}]")
    if n_per_class < 1 or n_test_per_class < 0 or size < 8:
        raise DataError("need n_per_class >= 1, n_test_per_class >= 0 and size >= 8")

    out_dir = Path(out_dir)
    image_dir = out_dir / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    splits = [("train", n_per_class)]
    if n_test_per_class:
        splits.append(("test", n_test_per_class))

    result = {"out_dir": out_dir, "n_classes": n_classes}
    for split, count in splits:
        rows = []
        total = n_classes * count
        with tqdm(total=total, desc=f"Synth {split}", unit="img", disable=not progress) as bar:
            for c in range(n_classes):
                code = class_code(c)
                family, variant = FAMILIES[c % len(FAMILIES)], c // len(FAMILIES)
                for i in range(count):
                    pixels = render_shape(family, variant, rng, size)
                    image_id = f"{split}-{c:03d}-{i:04d}"
                    rel = Path("images") / f"{image_id}.png"
                    Image.fromarray(np.round(pixels * 255.0).astype(np.uint8)).save(
                        out_dir / rel, format="PNG")
                    rows.append((image_id, rel.as_posix(), code))
                    bar.update(1)
        manifest = write_manifest(out_dir / f"{split}.tsv", rows,
                                  comment=f"synthetic {split} split, seed={seed}")
        result[f"{split}_manifest"] = manifest
        result[f"n_{split}"] = len(rows)
        logger.info("Wrote %d %s images to %s", len(rows), split, image_dir)
    return result
