"""
Class-partitioned barcode index with exact Hamming k-NN.

Only the bucket of the predicted class is scanned; inside it the scan is a
linear pass over 64-bit words with a SWAR popcount.
"""
import logging
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from src.errors import (DataError, DuplicateId, FingerprintMismatch, LengthMismatch,
                        UnknownClass)
from utils import bit_utils

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Bucket:
    ids: tuple
    packed: np.ndarray  # (m, n_bytes) uint8
    words: np.ndarray  # (m, n_words) uint64

    def __len__(self):
        return len(self.ids)


@dataclass(frozen=True, eq=False)
class ClassIndex:
    buckets: MappingProxyType  # label -> Bucket, labels sorted
    code_len_bits: int
    fingerprint: str

    @property
    def n_classes(self):
        return len(self.buckets)

    @property
    def n_records(self):
        return sum(len(b) for b in self.buckets.values())

    def labels(self):
        return list(self.buckets.keys())


@dataclass(frozen=True)
class Neighbor:
    image_id: str
    distance: int
    label: str


def _as_bits(code):
    bits = getattr(code, "bits", code)
    return np.asarray(bits, dtype=np.uint8).ravel()


def hamming(a, b):
    """Number of differing positions between two equal-length bit vectors"""
    a, b = _as_bits(a), _as_bits(b)
    if a.size != b.size:
        raise LengthMismatch(f"bit vectors differ in length: {a.size} vs {b.size}")
    words_a = bit_utils.to_words(bit_utils.pack_bits(a))
    words_b = bit_utils.to_words(bit_utils.pack_bits(b))
    return int(bit_utils.hamming_to_many(words_a[0], words_b)[0])


def _make_bucket(ids, packed_rows):
    packed = np.ascontiguousarray(np.vstack(packed_rows), dtype=np.uint8)
    packed.flags.writeable = False
    words = bit_utils.to_words(packed)
    words.flags.writeable = False
    return Bucket(ids=tuple(ids), packed=packed, words=words)


def build_index(records, fingerprint, code_len_bits=None) -> ClassIndex:
    """
    Partition barcodes by class label

    Args:
        records: Iterable of (image_id, label, bits) with bits a 0/1 vector or barcode
        fingerprint: Extraction-parameter fingerprint of the barcodes
        code_len_bits: Expected code length; inferred from the first record if None

    Returns:
        Immutable ClassIndex; each bucket keeps input order
    """
    grouped = {}
    seen = set()
    for image_id, label, code in records:
        bits = _as_bits(code)
        if code_len_bits is None:
            code_len_bits = bits.size
        if bits.size != code_len_bits:
            raise LengthMismatch(f"{image_id}: code has {bits.size} bits, expected {code_len_bits}")
        if image_id in seen:
            raise DuplicateId(f"duplicate image id {image_id!r}")
        seen.add(image_id)
        ids, rows = grouped.setdefault(label, ([], []))
        ids.append(image_id)
        rows.append(bit_utils.pack_bits(bits))

    buckets = {label: _make_bucket(*grouped[label]) for label in sorted(grouped)}
    logger.info("Indexed %d codes in %d classes", len(seen), len(buckets))
    return ClassIndex(buckets=MappingProxyType(buckets), code_len_bits=code_len_bits or 0,
                      fingerprint=fingerprint)


def index_from_packed(buckets, code_len_bits, fingerprint) -> ClassIndex:
    """Rebuild an index from {label: (ids, packed rows)} as read from disk"""
    width = bit_utils.packed_len(code_len_bits)
    built = {}
    for label in sorted(buckets):
        ids, packed = buckets[label]
        packed = np.asarray(packed, dtype=np.uint8).reshape(len(ids), width)
        built[label] = _make_bucket(ids, [packed])
    return ClassIndex(buckets=MappingProxyType(built), code_len_bits=code_len_bits,
                      fingerprint=fingerprint)


def _check_query(index, code, k, fingerprint):
    if fingerprint is not None and fingerprint != index.fingerprint:
        raise FingerprintMismatch("query code", index.fingerprint, fingerprint)
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    bits = _as_bits(code)
    if bits.size != index.code_len_bits:
        raise LengthMismatch(f"query has {bits.size} bits, index holds {index.code_len_bits}")
    return bit_utils.to_words(bit_utils.pack_bits(bits))[0]


def _rank(words, table, k):
    distances = bit_utils.hamming_to_many(words, table)
    order = np.argsort(distances, kind="stable")[:k]
    return order, distances


def query(index: ClassIndex, predicted_class, code, k=1, fingerprint=None):
    """
    k nearest codes inside the predicted class

    Args:
        index: ClassIndex
        predicted_class: Label chosen by the classifier
        code: Query barcode (bit vector or barcode object)
        k: Neighbours to return
        fingerprint: Fingerprint of the query's extraction parameters, if known

    Returns:
        List of Neighbor ordered by (distance, bucket position)
    """
    words = _check_query(index, code, k, fingerprint)
    bucket = index.buckets.get(predicted_class)
    if bucket is None:
        raise UnknownClass(predicted_class)
    if k > len(bucket):
        logger.warning("k=%d exceeds bucket size %d for class %s", k, len(bucket), predicted_class)

    order, distances = _rank(words, bucket.words, k)
    return [Neighbor(bucket.ids[i], int(distances[i]), predicted_class) for i in order]


def query_global(index: ClassIndex, code, k=1, fingerprint=None):
    """k nearest codes over every bucket, scanned in label order"""
    words = _check_query(index, code, k, fingerprint)
    if index.n_classes == 0:
        return []
    labels, ids, tables = [], [], []
    for label, bucket in index.buckets.items():
        labels.extend([label] * len(bucket))
        ids.extend(bucket.ids)
        tables.append(bucket.words)
    order, distances = _rank(words, np.vstack(tables), k)
    return [Neighbor(ids[i], int(distances[i]), labels[i]) for i in order]
