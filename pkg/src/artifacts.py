"""
Binary artifact files: features (GRF1), barcodes (GRB1 / RBC1), SVM models
(SVM1) and class indexes (IDX1).

All formats are little-endian, start with a 4-byte magic, a u16 format
version and the 8-byte extraction fingerprint, and store strings as u16
length-prefixed UTF-8. Bits are packed LSB-first.
"""
import logging
import struct
from dataclasses import dataclass
from io import BytesIO
from pathlib import Path

import numpy as np

from src.errors import CorruptArtifact, FingerprintMismatch, MissingFile
from src.retrieval import ClassIndex, index_from_packed
from src.svm import BinaryModel, KernelSpec, MulticlassModel
from utils import bit_utils
from utils.constants import (BARCODE_MAGIC, FEATURE_MAGIC, FINGERPRINT_BYTES, FORMAT_VERSION,
                             INDEX_MAGIC, MODEL_MAGIC, RBC_MAGIC)

logger = logging.getLogger(__name__)

_PREAMBLE = struct.Struct(f"<4sH{FINGERPRINT_BYTES}s")
_TABLE_PARAMS = struct.Struct("<HHHHHII")  # U, V, d1, d2, n_angles, vector_dim, records
_KERNEL_CODES = {"rbf": 0, "polynomial": 1, "linear": 2}
_KERNEL_NAMES = {v: k for k, v in _KERNEL_CODES.items()}
_BARCODE_MAGICS = {"grbf": BARCODE_MAGIC, "rbc": RBC_MAGIC}


# ============================================================================
# TABLES
# ============================================================================

@dataclass(frozen=True, eq=False)
class FeatureTable:
    ids: list
    matrix: np.ndarray  # (n, vector_dim) float64 holding float32 values
    fingerprint: str
    params: dict  # U, V, d1, d2, n_angles


@dataclass(frozen=True, eq=False)
class BarcodeTable:
    ids: list
    packed: np.ndarray  # (n, ceil(code_len / 8)) uint8
    code_len: int
    fingerprint: str
    kind: str  # grbf | rbc
    params: dict

    def bits(self, row):
        return bit_utils.unpack_bits(self.packed[row], self.code_len)


# ============================================================================
# LOW-LEVEL HELPERS
# ============================================================================

class _Reader:
    def __init__(self, path, data):
        self.path = path
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptArtifact(self.path, "unexpected end of file")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st):
        return st.unpack(self.take(st.size))

    def scalar(self, fmt):
        return self.unpack(struct.Struct("<" + fmt))[0]

    def string(self):
        length = self.scalar("H")
        try:
            return bytes(self.take(length)).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptArtifact(self.path, f"bad string: {e}") from e

    def array(self, dtype, count):
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype).copy()

    def finish(self):
        if self.pos != len(self.data):
            raise CorruptArtifact(self.path, f"{len(self.data) - self.pos} trailing bytes")


def _put_string(buf, text):
    encoded = text.encode("utf-8")
    buf.write(struct.pack("<H", len(encoded)))
    buf.write(encoded)


def _put_preamble(buf, magic, fingerprint):
    buf.write(_PREAMBLE.pack(magic, FORMAT_VERSION, bytes.fromhex(fingerprint)))


def _open(path, magics):
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"artifact not found: {path}")
    reader = _Reader(path, path.read_bytes())
    magic, version, fingerprint = reader.unpack(_PREAMBLE)
    if magic not in magics:
        raise CorruptArtifact(path, f"bad magic {bytes(magic)!r}, expected one of "
                                    f"{sorted(m.decode() for m in magics)}")
    if version != FORMAT_VERSION:
        raise CorruptArtifact(path, f"unsupported format version {version}")
    return reader, bytes(magic), fingerprint.hex()


def _write(path, buf):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(buf.getvalue())
    logger.debug("Wrote %s (%d bytes)", path, len(buf.getvalue()))
    return path


def check_fingerprint(what, expected, found):
    if expected != found:
        raise FingerprintMismatch(what, expected, found)


def _table_params(params, vector_dim, count):
    return _TABLE_PARAMS.pack(params.get("U", 0), params.get("V", 0), params.get("d1", 0),
                              params.get("d2", 0), params.get("n_angles", 0), vector_dim, count)


def _read_table_params(reader):
    U, V, d1, d2, n_angles, vector_dim, count = reader.unpack(_TABLE_PARAMS)
    return {"U": U, "V": V, "d1": d1, "d2": d2, "n_angles": n_angles}, vector_dim, count


# ============================================================================
# FEATURE AND BARCODE FILES
# ============================================================================

def write_features(path, table: FeatureTable):
    matrix = np.asarray(table.matrix, dtype="<f4")
    width = matrix.shape[1] if matrix.ndim == 2 else matrix.size // max(len(table.ids), 1)
    matrix = matrix.reshape(len(table.ids), width)
    buf = BytesIO()
    _put_preamble(buf, FEATURE_MAGIC, table.fingerprint)
    buf.write(_table_params(table.params, matrix.shape[1], len(table.ids)))
    for image_id, row in zip(table.ids, matrix):
        _put_string(buf, image_id)
        buf.write(row.tobytes())
    return _write(path, buf)


def read_features(path) -> FeatureTable:
    reader, _, fingerprint = _open(path, {FEATURE_MAGIC})
    params, dim, count = _read_table_params(reader)
    ids, rows = [], []
    for _ in range(count):
        ids.append(reader.string())
        rows.append(reader.array("<f4", dim))
    reader.finish()
    matrix = np.vstack(rows).astype(np.float64) if rows else np.zeros((0, dim))
    return FeatureTable(ids=ids, matrix=matrix, fingerprint=fingerprint, params=params)


def write_barcodes(path, table: BarcodeTable):
    buf = BytesIO()
    _put_preamble(buf, _BARCODE_MAGICS[table.kind], table.fingerprint)
    buf.write(_table_params(table.params, table.code_len, len(table.ids)))
    width = bit_utils.packed_len(table.code_len)
    for image_id, row in zip(table.ids, np.asarray(table.packed, dtype=np.uint8).reshape(-1, width)):
        _put_string(buf, image_id)
        buf.write(row.tobytes())
    return _write(path, buf)


def read_barcodes(path) -> BarcodeTable:
    reader, magic, fingerprint = _open(path, set(_BARCODE_MAGICS.values()))
    kind = "grbf" if magic == BARCODE_MAGIC else "rbc"
    params, code_len, count = _read_table_params(reader)
    width = bit_utils.packed_len(code_len)
    ids, rows = [], []
    for _ in range(count):
        ids.append(reader.string())
        rows.append(reader.array(np.uint8, width))
    reader.finish()
    packed = np.vstack(rows) if rows else np.zeros((0, width), dtype=np.uint8)
    return BarcodeTable(ids=ids, packed=packed, code_len=code_len, fingerprint=fingerprint,
                        kind=kind, params=params)


# ============================================================================
# MODEL FILE
# ============================================================================

def write_model(path, model: MulticlassModel, fingerprint):
    dim = model.dim
    buf = BytesIO()
    _put_preamble(buf, MODEL_MAGIC, fingerprint)
    spec = model.kernel
    buf.write(struct.pack("<BdHdd", _KERNEL_CODES[spec.kind], spec.gamma, spec.degree,
                          spec.coef0, model.C))
    buf.write(struct.pack("<H", len(model.classes)))
    for label in model.classes:
        _put_string(buf, label)
    scaled = model.scale_min is not None
    buf.write(struct.pack("<IB", dim, int(scaled)))
    if scaled:
        buf.write(np.asarray(model.scale_min, dtype="<f8").tobytes())
        buf.write(np.asarray(model.scale_max, dtype="<f8").tobytes())

    position = {label: i for i, label in enumerate(model.classes)}
    buf.write(struct.pack("<I", len(model.binaries)))
    for binary in model.binaries:
        a, b = binary.class_pair
        n_sv = binary.alphas.size
        buf.write(struct.pack("<HHI", position[a], position[b], n_sv))
        buf.write(np.asarray(binary.support_vectors, dtype="<f4").reshape(n_sv, dim).tobytes())
        buf.write(np.asarray(binary.alphas, dtype="<f8").tobytes())
        buf.write(struct.pack("<d", binary.bias))
    return _write(path, buf)


def read_model(path):
    """
    Returns:
        Tuple (MulticlassModel, fingerprint)
    """
    reader, _, fingerprint = _open(path, {MODEL_MAGIC})
    kind_code, gamma, degree, coef0, C = reader.unpack(struct.Struct("<BdHdd"))
    if kind_code not in _KERNEL_NAMES:
        raise CorruptArtifact(reader.path, f"unknown kernel code {kind_code}")
    spec = KernelSpec(kind=_KERNEL_NAMES[kind_code], gamma=gamma, degree=degree, coef0=coef0)
    classes = tuple(reader.string() for _ in range(reader.scalar("H")))
    dim, scaled = reader.unpack(struct.Struct("<IB"))
    lo = hi = None
    if scaled:
        lo = reader.array("<f8", dim)
        hi = reader.array("<f8", dim)

    binaries = []
    for _ in range(reader.scalar("I")):
        a, b, n_sv = reader.unpack(struct.Struct("<HHI"))
        if a >= len(classes) or b >= len(classes):
            raise CorruptArtifact(reader.path, f"class pair ({a}, {b}) out of range")
        sv = reader.array("<f4", n_sv * dim).astype(np.float64).reshape(n_sv, dim)
        alphas = reader.array("<f8", n_sv)
        bias = reader.scalar("d")
        binaries.append(BinaryModel(support_vectors=sv, alphas=alphas, bias=bias,
                                    class_pair=(classes[a], classes[b])))
    reader.finish()
    model = MulticlassModel(classes=classes, binaries=binaries, kernel=spec, C=C,
                            scale_min=lo, scale_max=hi)
    return model, fingerprint


# ============================================================================
# INDEX FILE
# ============================================================================

def write_index(path, index: ClassIndex):
    buf = BytesIO()
    buf.write(struct.pack("<4sHII", INDEX_MAGIC, FORMAT_VERSION, index.code_len_bits,
                          index.n_classes))
    buf.write(bytes.fromhex(index.fingerprint))
    for label, bucket in index.buckets.items():
        _put_string(buf, label)
        buf.write(struct.pack("<I", len(bucket)))
        for image_id, row in zip(bucket.ids, bucket.packed):
            _put_string(buf, image_id)
            buf.write(row.tobytes())
    return _write(path, buf)


def read_index(path) -> ClassIndex:
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"artifact not found: {path}")
    reader = _Reader(path, path.read_bytes())
    magic, version, code_len, n_classes = reader.unpack(struct.Struct("<4sHII"))
    if bytes(magic) != INDEX_MAGIC:
        raise CorruptArtifact(path, f"bad magic {bytes(magic)!r}, expected {INDEX_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CorruptArtifact(path, f"unsupported format version {version}")
    fingerprint = bytes(reader.take(FINGERPRINT_BYTES)).hex()
    width = bit_utils.packed_len(code_len)

    buckets = {}
    for _ in range(n_classes):
        label = reader.string()
        ids, rows = [], []
        for _ in range(reader.scalar("I")):
            ids.append(reader.string())
            rows.append(reader.array(np.uint8, width))
        buckets[label] = (ids, np.vstack(rows) if rows else np.zeros((0, width), np.uint8))
    reader.finish()
    return index_from_packed(buckets, code_len, fingerprint)
