"""
Bit packing and word-level popcount helpers
"""
import numpy as np

m1 = np.uint64(0x5555555555555555)
m2 = np.uint64(0x3333333333333333)
m4 = np.uint64(0x0F0F0F0F0F0F0F0F)
h01 = np.uint64(0x0101010101010101)
WORD_BYTES = 8


def pack_bits(bits):
    """Pack a 0/1 vector (or rows of vectors) into bytes, LSB-first"""
    return np.packbits(np.asarray(bits, dtype=np.uint8), axis=-1, bitorder="little")


def unpack_bits(packed, n_bits):
    return np.unpackbits(np.asarray(packed, dtype=np.uint8), axis=-1, count=n_bits,
                         bitorder="little")


def packed_len(n_bits):
    return (n_bits + 7) // 8


def to_words(packed):
    """
    View packed bytes as little-endian 64-bit words, zero-padding each row

    Args:
        packed: (n_bytes,) or (rows, n_bytes) uint8 array

    Returns:
        (rows, n_words) uint64 array
    """
    packed = np.atleast_2d(np.asarray(packed, dtype=np.uint8))
    rows, n_bytes = packed.shape
    n_words = max(1, (n_bytes + WORD_BYTES - 1) // WORD_BYTES)
    padded = np.zeros((rows, n_words * WORD_BYTES), dtype=np.uint8)
    padded[:, :n_bytes] = packed
    return padded.view("<u8")


def popcount64(words):
    """SWAR population count of every uint64 element"""
    x = np.asarray(words, dtype=np.uint64).copy()
    x -= (x >> np.uint64(1)) & m1
    x = (x & m2) + ((x >> np.uint64(2)) & m2)
    x = (x + (x >> np.uint64(4))) & m4
    x *= h01
    x >>= np.uint64(56)
    return x


def hamming_to_many(query_words, table_words):
    """
    Hamming distances from one packed code to every row of a table

    Args:
        query_words: (n_words,) or (1, n_words) uint64
        table_words: (rows, n_words) uint64

    Returns:
        (rows,) int64 distances
    """
    xor = np.bitwise_xor(table_words, np.asarray(query_words, dtype=np.uint64).reshape(1, -1))
    return popcount64(xor).sum(axis=1, dtype=np.int64)
