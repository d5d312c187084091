"""ChaCha20 stream cipher (IETF layout: 32-byte key, 32-bit counter, 12-byte nonce).

The scalar functions (:func:`quarter_round`, :func:`block`) follow the cipher
description word for word and are the reference path. :func:`keystream`
computes many blocks at once with numpy and is what :func:`xor_stream` uses;
the two are cross-checked in the test suite.
"""

from __future__ import annotations

import struct

import numpy as np

KEY_SIZE = 32
NONCE_SIZE = 12
BLOCK_SIZE = 64

MASK32 = 0xFFFFFFFF
# "expand 32-byte k"
CONSTANTS = (0x61707865, 0x3320646E, 0x79622D32, 0x6B206574)

_COLUMN_ROUNDS = ((0, 4, 8, 12), (1, 5, 9, 13), (2, 6, 10, 14), (3, 7, 11, 15))
_DIAGONAL_ROUNDS = ((0, 5, 10, 15), (1, 6, 11, 12), (2, 7, 8, 13), (3, 4, 9, 14))


class CipherError(ValueError):
    pass


def _check_key(key: bytes) -> None:
    if len(key) != KEY_SIZE:
        raise CipherError(f"key must be {KEY_SIZE} bytes, got {len(key)}")


def _check_nonce(nonce: bytes) -> None:
    if len(nonce) != NONCE_SIZE:
        raise CipherError(f"nonce must be {NONCE_SIZE} bytes, got {len(nonce)}")


def _rotl(v: int, n: int) -> int:
    return ((v << n) | (v >> (32 - n))) & MASK32


def quarter_round(state: list[int], a: int, b: int, c: int, d: int) -> list[int]:
    """Return a copy of ``state`` with words a, b, c, d quarter-rounded."""
    idx = (a, b, c, d)
    if any(not 0 <= i <= 15 for i in idx):
        raise CipherError(f"quarter-round index out of range: {idx}")
    if len(set(idx)) != 4:
        raise CipherError(f"quarter-round indices must be distinct: {idx}")
    x = list(state)
    x[a] = (x[a] + x[b]) & MASK32
    x[d] = _rotl(x[d] ^ x[a], 16)
    x[c] = (x[c] + x[d]) & MASK32
    x[b] = _rotl(x[b] ^ x[c], 12)
    x[a] = (x[a] + x[b]) & MASK32
    x[d] = _rotl(x[d] ^ x[a], 8)
    x[c] = (x[c] + x[d]) & MASK32
    x[b] = _rotl(x[b] ^ x[c], 7)
    return x


def initial_state(key: bytes, counter: int, nonce: bytes) -> list[int]:
    _check_key(key)
    _check_nonce(nonce)
    if not 0 <= counter <= MASK32:
        raise CipherError(f"counter out of u32 range: {counter}")
    return [
        *CONSTANTS,
        *struct.unpack("<8I", key),
        counter,
        *struct.unpack("<3I", nonce),
    ]


def block(key: bytes, counter: int, nonce: bytes) -> bytes:
    """One 64-byte keystream block: 10 column/diagonal double rounds plus feed-forward."""
    init = initial_state(key, counter, nonce)
    x = list(init)
    for _ in range(10):
        for q in _COLUMN_ROUNDS:
            x = quarter_round(x, *q)
        for q in _DIAGONAL_ROUNDS:
            x = quarter_round(x, *q)
    return struct.pack("<16I", *((w + i) & MASK32 for w, i in zip(x, init)))


def _rotl_vec(v: np.ndarray, n: int) -> np.ndarray:
    return (v << np.uint32(n)) | (v >> np.uint32(32 - n))


def keystream(key: bytes, nonce: bytes, initial_counter: int, nbytes: int) -> bytes:
    """Keystream of ``nbytes`` bytes starting at block ``initial_counter``."""
    _check_key(key)
    _check_nonce(nonce)
    if nbytes < 0:
        raise CipherError("negative keystream length")
    nblocks = -(-nbytes // BLOCK_SIZE)
    if nblocks == 0:
        return b""
    if initial_counter < 0 or initial_counter + nblocks - 1 > MASK32:
        raise CipherError("data too long for the 32-bit block counter")

    init = np.empty((16, nblocks), dtype=np.uint32)
    init[0:4] = np.array(CONSTANTS, dtype=np.uint32)[:, None]
    init[4:12] = np.frombuffer(key, dtype="<u4").astype(np.uint32)[:, None]
    init[12] = np.arange(initial_counter, initial_counter + nblocks, dtype=np.uint64).astype(np.uint32)
    init[13:16] = np.frombuffer(nonce, dtype="<u4").astype(np.uint32)[:, None]

    x = [init[i].copy() for i in range(16)]
    with np.errstate(over="ignore"):
        for _ in range(10):
            for a, b, c, d in _COLUMN_ROUNDS + _DIAGONAL_ROUNDS:
                x[a] += x[b]
                x[d] = _rotl_vec(x[d] ^ x[a], 16)
                x[c] += x[d]
                x[b] = _rotl_vec(x[b] ^ x[c], 12)
                x[a] += x[b]
                x[d] = _rotl_vec(x[d] ^ x[a], 8)
                x[c] += x[d]
                x[b] = _rotl_vec(x[b] ^ x[c], 7)
        out = np.stack(x) + init
    # column-major over blocks: block j is out[:, j]
    return out.T.astype("<u4").tobytes()[:nbytes]


def xor_stream(key: bytes, nonce: bytes, initial_counter: int, data: bytes) -> bytes:
    """Encrypt or decrypt ``data``; the operation is its own inverse."""
    data = bytes(data)
    ks = keystream(key, nonce, initial_counter, len(data))
    if not data:
        return b""
    out = np.frombuffer(data, dtype=np.uint8) ^ np.frombuffer(ks, dtype=np.uint8)
    return out.tobytes()
