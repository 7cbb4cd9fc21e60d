"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``TAPSPLIT_NO_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``) to force
the numpy path.  Both paths must return identical results; the test suite
runs them against each other.
"""

from __future__ import annotations

import os

import numpy as np

OP_XOR = 0
OP_AND = 1
OP_OR = 2
OP_NOT = 3

_ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = not (_env_flag("TAPSPLIT_NO_NUMBA") or _env_flag("NUMBA_DISABLE_JIT"))

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False


def xor_bytes(a: bytes, b: bytes) -> bytes:
    """Bytewise XOR of two equal-length strings."""
    n = len(a)
    if n != len(b):
        raise ValueError(f"length mismatch: {n} != {len(b)}")
    return (int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).to_bytes(n, "big")


def _eval_bitsliced_numpy(ops, in_a, in_b, out, wires):
    for g in range(ops.shape[0]):
        op = ops[g]
        x = wires[in_a[g]]
        if op == OP_XOR:
            wires[out[g]] = x ^ wires[in_b[g]]
        elif op == OP_AND:
            wires[out[g]] = x & wires[in_b[g]]
        elif op == OP_OR:
            wires[out[g]] = x | wires[in_b[g]]
        else:
            wires[out[g]] = x ^ _ALL_ONES
    return wires


if USE_NUMBA:

    @njit(cache=True, nogil=True)
    def _eval_bitsliced_numba(ops, in_a, in_b, out, wires):  # pragma: no cover - compiled
        n_words = wires.shape[1]
        ones = np.uint64(0xFFFFFFFFFFFFFFFF)
        for g in range(ops.shape[0]):
            op = ops[g]
            a = in_a[g]
            b = in_b[g]
            o = out[g]
            for w in range(n_words):
                if op == 0:
                    wires[o, w] = wires[a, w] ^ wires[b, w]
                elif op == 1:
                    wires[o, w] = wires[a, w] & wires[b, w]
                elif op == 2:
                    wires[o, w] = wires[a, w] | wires[b, w]
                else:
                    wires[o, w] = wires[a, w] ^ ones
        return wires

    _eval_bitsliced = _eval_bitsliced_numba
else:
    _eval_bitsliced = _eval_bitsliced_numpy


def eval_bitsliced(ops, in_a, in_b, out, wires, *, use_numba: bool | None = None):
    """Evaluate a gate list over bit-sliced wire values, in place.

    ``wires`` has shape ``(n_wires, n_words)`` and dtype uint64; bit ``j`` of
    word ``w`` belongs to input instance ``64*w + j``.  Input rows must be
    filled before the call.
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    if use_numba and USE_NUMBA:
        return _eval_bitsliced_numba(ops, in_a, in_b, out, wires)
    return _eval_bitsliced_numpy(ops, in_a, in_b, out, wires)


def pack_instances(bits: np.ndarray) -> np.ndarray:
    """(n_instances, n_bits) 0/1 matrix -> (n_bits, n_words) bit-sliced uint64."""
    bits = np.asarray(bits, dtype=np.uint8)
    n_inst, n_bits = bits.shape
    n_words = max(1, -(-n_inst // 64))
    padded = np.zeros((n_words * 64, n_bits), dtype=np.uint8)
    padded[:n_inst] = bits
    # little-endian bit order inside each 64-bit word
    packed = np.packbits(padded.T.reshape(n_bits, n_words, 64), axis=2, bitorder="little")
    packed = np.ascontiguousarray(packed.reshape(n_bits, n_words * 8))
    return packed.view("<u8").astype(np.uint64, copy=False)


def unpack_instances(words: np.ndarray, n_instances: int) -> np.ndarray:
    """Inverse of :func:`pack_instances`."""
    words = np.ascontiguousarray(words, dtype="<u8")
    n_bits = words.shape[0]
    raw = words.view(np.uint8).reshape(n_bits, -1)
    bits = np.unpackbits(raw, axis=1, bitorder="little")
    return bits[:, :n_instances].T.copy()


def bytes_to_bits(data: bytes) -> np.ndarray:
    """MSB-first bit expansion."""
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
