import numpy as np
import pytest
from PIL import Image

from src.errors import DataError
from src.irma import load_manifest
from src.synth import FAMILIES, MAX_VARIANTS, class_code, generate_dataset, render_shape, shape_geometry


def _images(out_dir):
    return {p.name: p.read_bytes() for p in sorted((out_dir / "images").glob("*.png"))}


class TestGenerator:
    def test_counts_and_manifests(self, tmp_path):
        result = generate_dataset(tmp_path, n_classes=4, n_per_class=3, seed=7,
                                  n_test_per_class=2, size=24)
        assert (result["n_train"], result["n_test"]) == (12, 8)
        train = load_manifest(result["train_manifest"], "train")
        test = load_manifest(result["test_manifest"], "test")
        assert len(train) == 12 and len(test) == 8
        assert train.n_uncategorized == 0
        assert train.records["label"].nunique() == 4
        with Image.open(train.records["path"][0]) as img:
            assert img.size == (24, 24) and img.mode == "L"

    def test_same_seed_same_bytes(self, tmp_path):
        generate_dataset(tmp_path / "a", n_classes=2, n_per_class=2, seed=11, size=16)
        generate_dataset(tmp_path / "b", n_classes=2, n_per_class=2, seed=11, size=16)
        assert _images(tmp_path / "a") == _images(tmp_path / "b")
        assert (tmp_path / "a" / "train.tsv").read_bytes() == (tmp_path / "b" / "train.tsv").read_bytes()

    def test_different_seed_different_pixels(self, tmp_path):
        generate_dataset(tmp_path / "a", n_classes=2, n_per_class=2, seed=1, size=16)
        generate_dataset(tmp_path / "b", n_classes=2, n_per_class=2, seed=2, size=16)
        a, b = _images(tmp_path / "a"), _images(tmp_path / "b")
        assert a.keys() == b.keys()
        assert a != b

    def test_codes_encode_family_in_t_axis(self):
        codes = [class_code(c) for c in range(144)]
        assert len({c.raw for c in codes}) == 144
        assert [c.axes[0][1] for c in codes[:4]] == ["1", "2", "3", "4"]
        assert codes[4].axes[0] == codes[0].axes[0]
        assert codes[4].axes[1] != codes[0].axes[1]

    def test_limits(self, tmp_path):
        with pytest.raises(DataError):
            generate_dataset(tmp_path, n_classes=145)
        with pytest.raises(DataError):
            generate_dataset(tmp_path, n_per_class=0)

    def test_pixels_in_range(self, tmp_path):
        result = generate_dataset(tmp_path, n_classes=4, n_per_class=1, seed=5, size=32)
        for path in load_manifest(result["train_manifest"]).records["path"]:
            pixels = np.asarray(Image.open(path))
            assert pixels.dtype == np.uint8 and pixels.max() > pixels.min()


class TestShapes:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_every_variant_has_its_own_geometry(self, family):
        shapes = set()
        for variant in range(MAX_VARIANTS):
            scale, aspect, angle = shape_geometry(family, variant)
            shapes.add((round(scale, 6), round(aspect, 6), round(angle % 180.0, 6)))
        assert len(shapes) == MAX_VARIANTS

    @pytest.mark.parametrize("family", FAMILIES)
    def test_variants_render_differently(self, family):
        # Same seed: jitter and noise are shared, only the geometry differs
        images = [render_shape(family, v, np.random.default_rng(0), 48) for v in range(MAX_VARIANTS)]
        for a in range(MAX_VARIANTS):
            for b in range(a + 1, MAX_VARIANTS):
                assert np.abs(images[a] - images[b]).max() > 0.05, (family, a, b)

    def test_bar_does_not_repeat_after_nine(self):
        first = render_shape("bar", 0, np.random.default_rng(0), 48)
        tenth = render_shape("bar", 9, np.random.default_rng(0), 48)
        assert np.abs(first - tenth).max() > 0.05

    def test_unknown_family_or_variant(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DataError):
            render_shape("star", 0, rng, 16)
        with pytest.raises(DataError):
            shape_geometry("disk", MAX_VARIANTS)
