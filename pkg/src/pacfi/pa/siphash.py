"""SipHash-2-4, the keyed PRF standing in for QARMA64.

SipHash takes a 128-bit key and produces a 64-bit tag, which is the shape the
PA model needs. The scalar path is the reference; the numpy path computes the
same function for 16-byte messages over arrays and is used by Monte-Carlo
code.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def _rotl(x: int, b: int) -> int:
    return ((x << b) | (x >> (64 - b))) & MASK64


def _round(v0: int, v1: int, v2: int, v3: int) -> tuple[int, int, int, int]:
    v0 = (v0 + v1) & MASK64
    v1 = _rotl(v1, 13) ^ v0
    v0 = _rotl(v0, 32)
    v2 = (v2 + v3) & MASK64
    v3 = _rotl(v3, 16) ^ v2
    v0 = (v0 + v3) & MASK64
    v3 = _rotl(v3, 21) ^ v0
    v2 = (v2 + v1) & MASK64
    v1 = _rotl(v1, 17) ^ v2
    v2 = _rotl(v2, 32)
    return v0, v1, v2, v3


def siphash24(key: int, data: bytes) -> int:
    """Return SipHash-2-4 of ``data`` under the 128-bit integer ``key``.

    The key is interpreted little-endian, i.e. ``key.to_bytes(16, "little")``
    is the 16-byte key of the reference implementation.
    """
    k0 = key & MASK64
    k1 = (key >> 64) & MASK64
    v0 = k0 ^ 0x736F6D6570736575
    v1 = k1 ^ 0x646F72616E646F6D
    v2 = k0 ^ 0x6C7967656E657261
    v3 = k1 ^ 0x7465646279746573

    n = len(data)
    end = n - (n % 8)
    for off in range(0, end, 8):
        m = int.from_bytes(data[off:off + 8], "little")
        v3 ^= m
        v0, v1, v2, v3 = _round(v0, v1, v2, v3)
        v0, v1, v2, v3 = _round(v0, v1, v2, v3)
        v0 ^= m
    last = ((n & 0xFF) << 56) | int.from_bytes(data[end:], "little")
    v3 ^= last
    v0, v1, v2, v3 = _round(v0, v1, v2, v3)
    v0, v1, v2, v3 = _round(v0, v1, v2, v3)
    v0 ^= last
    v2 ^= 0xFF
    for _ in range(4):
        v0, v1, v2, v3 = _round(v0, v1, v2, v3)
    return v0 ^ v1 ^ v2 ^ v3


def prf64(key: int, a: int, b: int) -> int:
    """PRF over two 64-bit words: SipHash-2-4 of ``a || b`` (little-endian)."""
    k0 = key & MASK64
    k1 = (key >> 64) & MASK64
    v0 = k0 ^ 0x736F6D6570736575
    v1 = k1 ^ 0x646F72616E646F6D
    v2 = k0 ^ 0x6C7967656E657261
    v3 = k1 ^ 0x7465646279746573
    for m in (a & MASK64, b & MASK64, 16 << 56):
        v3 ^= m
        v0, v1, v2, v3 = _round(v0, v1, v2, v3)
        v0, v1, v2, v3 = _round(v0, v1, v2, v3)
        v0 ^= m
    v2 ^= 0xFF
    for _ in range(4):
        v0, v1, v2, v3 = _round(v0, v1, v2, v3)
    return v0 ^ v1 ^ v2 ^ v3


def _np_rotl(x: np.ndarray, b: int) -> np.ndarray:
    return (x << np.uint64(b)) | (x >> np.uint64(64 - b))


def _np_round(v0, v1, v2, v3):
    v0 = v0 + v1
    v1 = _np_rotl(v1, 13) ^ v0
    v0 = _np_rotl(v0, 32)
    v2 = v2 + v3
    v3 = _np_rotl(v3, 16) ^ v2
    v0 = v0 + v3
    v3 = _np_rotl(v3, 21) ^ v0
    v2 = v2 + v1
    v1 = _np_rotl(v1, 17) ^ v2
    v2 = _np_rotl(v2, 32)
    return v0, v1, v2, v3


def prf64_batch(key: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorised :func:`prf64` over uint64 arrays ``a`` and ``b``."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    a, b = np.broadcast_arrays(a, b)
    k0 = np.uint64(key & MASK64)
    k1 = np.uint64((key >> 64) & MASK64)
    shape = a.shape
    v0 = np.full(shape, k0 ^ np.uint64(0x736F6D6570736575), dtype=np.uint64)
    v1 = np.full(shape, k1 ^ np.uint64(0x646F72616E646F6D), dtype=np.uint64)
    v2 = np.full(shape, k0 ^ np.uint64(0x6C7967656E657261), dtype=np.uint64)
    v3 = np.full(shape, k1 ^ np.uint64(0x7465646279746573), dtype=np.uint64)
    tail = np.full(shape, np.uint64(16 << 56), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for m in (a, b, tail):
            v3 = v3 ^ m
            v0, v1, v2, v3 = _np_round(v0, v1, v2, v3)
            v0, v1, v2, v3 = _np_round(v0, v1, v2, v3)
            v0 = v0 ^ m
        v2 = v2 ^ np.uint64(0xFF)
        for _ in range(4):
            v0, v1, v2, v3 = _np_round(v0, v1, v2, v3)
    return v0 ^ v1 ^ v2 ^ v3
