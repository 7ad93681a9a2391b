import logging

import numpy as np
import pytest

from src import retrieval
from src.errors import DuplicateId, FingerprintMismatch, LengthMismatch, UnknownClass
from src.retrieval import build_index, hamming, query, query_global
from utils import bit_utils

FP = "00112233aabbccdd"


def _records(rng, n_classes=3, per_class=10, n_bits=100):
    records = []
    for c in range(n_classes):
        for i in range(per_class):
            records.append((f"img-{c}-{i}", f"class{c}", rng.integers(0, 2, n_bits, dtype=np.uint8)))
    return records


class TestBitUtils:
    def test_popcount_known_words(self):
        words = np.array([0, 0xFFFFFFFFFFFFFFFF, 0x5555555555555555, 1 << 63], dtype=np.uint64)
        np.testing.assert_array_equal(bit_utils.popcount64(words), [0, 64, 32, 1])

    def test_pack_is_lsb_first(self):
        packed = bit_utils.pack_bits(np.array([1, 0, 0, 0, 0, 0, 0, 0, 1], dtype=np.uint8))
        np.testing.assert_array_equal(packed, [1, 1])
        np.testing.assert_array_equal(bit_utils.unpack_bits(packed, 9), [1, 0, 0, 0, 0, 0, 0, 0, 1])

    def test_words_are_zero_padded(self):
        words = bit_utils.to_words(np.array([[0xFF, 0x01]], dtype=np.uint8))
        assert words.shape == (1, 1)
        assert int(words[0, 0]) == 0x01FF


class TestMetric:
    def test_axioms_on_random_triples(self, rng):
        n, n_bits = 10_000, 77
        a, b, c = (rng.integers(0, 2, (n, n_bits), dtype=np.uint8) for _ in range(3))
        wa, wb, wc = (bit_utils.to_words(bit_utils.pack_bits(x)) for x in (a, b, c))

        def dist(x, y):
            return bit_utils.popcount64(x ^ y).sum(axis=1)

        d_ab, d_ba, d_bc, d_ac = dist(wa, wb), dist(wb, wa), dist(wb, wc), dist(wa, wc)
        np.testing.assert_array_equal(d_ab, d_ba)
        assert not dist(wa, wa).any()
        assert (d_ac <= d_ab + d_bc).all()
        np.testing.assert_array_equal(d_ab, (a != b).sum(axis=1))

    def test_packed_matches_naive_loop(self, rng):
        for _ in range(1000):
            n_bits = int(rng.integers(1, 200))
            a = rng.integers(0, 2, n_bits, dtype=np.uint8)
            b = rng.integers(0, 2, n_bits, dtype=np.uint8)
            naive = sum(1 for x, y in zip(a, b) if x != y)
            assert hamming(a, b) == naive

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            hamming(np.zeros(8, np.uint8), np.zeros(9, np.uint8))


class TestIndex:
    def test_buckets_sorted_and_ordered(self, rng):
        records = _records(rng)
        index = build_index(reversed(records), FP)
        assert index.labels() == ["class0", "class1", "class2"]
        assert index.n_records == 30
        assert index.buckets["class0"].ids[0] == "img-0-9"

    def test_duplicate_id(self, rng):
        records = _records(rng, 1, 2)
        with pytest.raises(DuplicateId):
            build_index(records + records[:1], FP)

    def test_length_mismatch(self, rng):
        records = _records(rng, 1, 2)
        records.append(("odd", "class0", np.zeros(5, np.uint8)))
        with pytest.raises(LengthMismatch):
            build_index(records, FP)

    def test_buckets_are_immutable(self, rng):
        index = build_index(_records(rng), FP)
        with pytest.raises(TypeError):
            index.buckets["new"] = None
        with pytest.raises(ValueError):
            index.buckets["class0"].words[0, 0] = 0


class TestQuery:
    def test_matches_exhaustive_scan(self, rng):
        records = _records(rng, 2, 25)
        index = build_index(records, FP)
        target = rng.integers(0, 2, 100, dtype=np.uint8)
        in_class = [(int((bits != target).sum()), pos, image_id)
                    for pos, (image_id, label, bits) in enumerate(r for r in records if r[1] == "class1")]
        expected = [image_id for _, _, image_id in sorted(in_class)[:5]]
        got = query(index, "class1", target, k=5)
        assert [n.image_id for n in got] == expected
        assert [n.distance for n in got] == [d for d, _, _ in sorted(in_class)[:5]]
        assert all(n.label == "class1" for n in got)

    def test_ties_keep_insertion_order(self):
        bits = np.zeros(16, np.uint8)
        index = build_index([("b", "x", bits), ("a", "x", bits), ("c", "x", bits)], FP)
        assert [n.image_id for n in query(index, "x", bits, k=3)] == ["b", "a", "c"]

    def test_only_predicted_bucket_is_scanned(self, rng, monkeypatch):
        index = build_index(_records(rng, 4, 10), FP)
        scanned = []
        original = bit_utils.hamming_to_many

        def counting(query_words, table_words):
            scanned.append(table_words.shape[0])
            return original(query_words, table_words)

        monkeypatch.setattr(retrieval.bit_utils, "hamming_to_many", counting)
        query(index, "class2", rng.integers(0, 2, 100, dtype=np.uint8), k=3)
        assert scanned == [10]

    def test_self_retrieval(self, rng):
        records = _records(rng)
        index = build_index(records, FP)
        for image_id, label, bits in records:
            top = query(index, label, bits, k=1)[0]
            assert (top.image_id, top.distance) == (image_id, 0)

    def test_k_larger_than_bucket(self, rng, caplog):
        index = build_index(_records(rng, 2, 3), FP)
        with caplog.at_level(logging.WARNING):
            got = query(index, "class0", rng.integers(0, 2, 100, dtype=np.uint8), k=10)
        assert len(got) == 3
        assert "exceeds bucket size" in caplog.text

    def test_unknown_class(self, rng):
        index = build_index(_records(rng), FP)
        with pytest.raises(UnknownClass) as err:
            query(index, "nope", np.zeros(100, np.uint8))
        assert err.value.label == "nope"

    def test_fingerprint_checked(self, rng):
        index = build_index(_records(rng), FP)
        with pytest.raises(FingerprintMismatch):
            query(index, "class0", np.zeros(100, np.uint8), fingerprint="ffffffffffffffff")

    def test_global_scan(self, rng):
        records = _records(rng, 3, 5)
        index = build_index(records, FP)
        target = records[7][2]
        got = query_global(index, target, k=4)
        assert got[0].image_id == records[7][0]
        assert got[0].label == records[7][1]
        everything = sorted(int((bits != target).sum()) for _, _, bits in records)
        assert [n.distance for n in got] == everything[:4]
