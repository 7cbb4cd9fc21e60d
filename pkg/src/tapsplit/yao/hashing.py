"""Fixed-key AES correlation-robust hash over 128-bit labels.

Labels are ``(n, 2)`` uint64 arrays (low word first, little-endian), so a
label's colour bit is ``labels[:, 0] & 1``.  The hash is
``H(x, t) = AES_K(K') ^ K'`` with ``K' = 2x ^ t``, evaluated for a whole
batch in one ECB call.
"""

from __future__ import annotations

import hashlib

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

_KEY = hashlib.sha256(b"tapsplit/fixed-key-aes").digest()[:16]
_CIPHER = Cipher(algorithms.AES(_KEY), modes.ECB())


def random_labels(data: bytes, n: int) -> np.ndarray:
    return np.frombuffer(data, dtype="<u8", count=2 * n).reshape(n, 2).copy()


def to_bytes(labels: np.ndarray) -> bytes:
    return np.ascontiguousarray(labels, dtype="<u8").tobytes()


def from_bytes(data: bytes) -> np.ndarray:
    if len(data) % 16:
        raise ValueError("label bytes not a multiple of 16")
    return np.frombuffer(data, dtype="<u8").reshape(-1, 2).copy()


def colour(labels: np.ndarray) -> np.ndarray:
    return (labels[:, 0] & np.uint64(1)).astype(np.uint8)


def double(x: np.ndarray) -> np.ndarray:
    """Shift left by one bit across the 128-bit value (top bit dropped)."""
    out = np.empty_like(x)
    out[:, 0] = x[:, 0] << np.uint64(1)
    out[:, 1] = (x[:, 1] << np.uint64(1)) | (x[:, 0] >> np.uint64(63))
    return out


def tccr(x: np.ndarray, tweak: np.ndarray) -> np.ndarray:
    k = x.copy()
    k[:, 1] ^= np.asarray(tweak, dtype=np.uint64)
    if k.shape[0] == 0:
        return k
    enc = _CIPHER.encryptor()
    y = np.frombuffer(enc.update(to_bytes(k)) + enc.finalize(), dtype="<u8").reshape(-1, 2)
    return y ^ k


def gate_hash(la: np.ndarray, lb: np.ndarray, gate_ids: np.ndarray) -> np.ndarray:
    return tccr(double(la) ^ double(double(lb)), gate_ids)
