"""Semi-honest 1-out-of-2 oblivious transfer.

Base OTs follow the Chou-Orlandi "simplest OT" pattern in the 2048-bit MODP
group (RFC 3526 group 14).  Bulk transfers use IKNP extension on top of
128 base OTs, which are run once per sender/receiver pair and reused with a
fresh PRG counter for every extension batch.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from tapsplit.crypto import Rng, default_rng
from tapsplit.kernels import xor_bytes
from tapsplit.metering import charge
from tapsplit.yao import hashing

MODP_P = gmpy2.mpz(
    "0xFFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74"
    "020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437"
    "4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05"
    "98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB"
    "9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718"
    "3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF",
    0,
)
GENERATOR = gmpy2.mpz(2)
ELEMENT_BYTES = 256
EXPONENT_BITS = 256
KAPPA = 128


class OTError(ValueError):
    pass


def _elem(x) -> bytes:
    return int(x).to_bytes(ELEMENT_BYTES, "big")


def _read_elem(data: bytes) -> gmpy2.mpz:
    x = gmpy2.mpz(int.from_bytes(data, "big"))
    if not 1 < x < MODP_P - 1:
        raise OTError("group element out of range")
    return x


def _kdf(n: int, *parts: bytes) -> bytes:
    h = hashlib.shake_256()
    for p in parts:
        h.update(len(p).to_bytes(4, "big"))
        h.update(p)
    return h.digest(n)


def _exponent(rng: Rng) -> gmpy2.mpz:
    return gmpy2.mpz(int.from_bytes(rng.bytes(EXPONENT_BITS // 8), "big") | 1)


# -- base OT ------------------------------------------------------------------


@dataclass
class BaseSender:
    """Holds ``n`` message pairs; speaks first."""

    pairs: list[tuple[bytes, bytes]]
    rng: Rng = field(default_factory=default_rng)

    def __post_init__(self):
        for m0, m1 in self.pairs:
            if len(m0) != len(m1):
                raise OTError("message lengths differ")
        self._a = _exponent(self.rng)
        self._A = gmpy2.powmod(GENERATOR, self._a, MODP_P)

    def first(self) -> bytes:
        return _elem(self._A)

    def finish(self, msg_b: bytes) -> bytes:
        n = len(self.pairs)
        if len(msg_b) != n * ELEMENT_BYTES:
            raise OTError("bad receiver message length")
        charge("base_ot", n)
        A_bytes = _elem(self._A)
        A_inv = gmpy2.invert(self._A, MODP_P)
        out = bytearray()
        for i, (m0, m1) in enumerate(self.pairs):
            B_bytes = msg_b[i * ELEMENT_BYTES:(i + 1) * ELEMENT_BYTES]
            B = _read_elem(B_bytes)
            k0 = gmpy2.powmod(B, self._a, MODP_P)
            k1 = gmpy2.powmod(B * A_inv % MODP_P, self._a, MODP_P)
            idx = i.to_bytes(4, "big")
            out += xor_bytes(m0, _kdf(len(m0), A_bytes, B_bytes, idx, _elem(k0)))
            out += xor_bytes(m1, _kdf(len(m1), A_bytes, B_bytes, idx, _elem(k1)))
        return bytes(out)


@dataclass
class BaseReceiver:
    choices: list[int]
    length: int
    rng: Rng = field(default_factory=default_rng)

    def respond(self, msg_a: bytes) -> bytes:
        if len(msg_a) != ELEMENT_BYTES:
            raise OTError("bad sender message length")
        self._A_bytes = msg_a
        A = _read_elem(msg_a)
        self._keys = []
        charge("base_ot", len(self.choices))
        out = bytearray()
        for c in self.choices:
            b = _exponent(self.rng)
            B = gmpy2.powmod(GENERATOR, b, MODP_P)
            if c & 1:
                B = B * A % MODP_P
            B_bytes = _elem(B)
            out += B_bytes
            self._keys.append((B_bytes, gmpy2.powmod(A, b, MODP_P)))
        return bytes(out)

    def finish(self, msg_e: bytes) -> list[bytes]:
        n, m = len(self.choices), self.length
        if len(msg_e) != 2 * n * m:
            raise OTError("bad sender ciphertext length")
        out = []
        for i, (c, (B_bytes, k)) in enumerate(zip(self.choices, self._keys)):
            off = (2 * i + (c & 1)) * m
            pad = _kdf(m, self._A_bytes, B_bytes, i.to_bytes(4, "big"), _elem(k))
            out.append(xor_bytes(msg_e[off:off + m], pad))
        return out


def ot_transfer(
    sender_messages: tuple[bytes, bytes],
    choice: int,
    rng: Rng | None = None,
    transcript: list[bytes] | None = None,
) -> bytes:
    """One complete base OT; the receiver's output is returned.

    Every message that crosses between the parties is appended to
    ``transcript`` when given.
    """
    m0, m1 = sender_messages
    if len(m0) != len(m1):
        raise OTError("message lengths differ")
    rng = rng or default_rng()
    sender = BaseSender([(m0, m1)], rng.child())
    receiver = BaseReceiver([choice], len(m0), rng.child())
    msgs = [sender.first()]
    msgs.append(receiver.respond(msgs[0]))
    msgs.append(sender.finish(msgs[1]))
    if transcript is not None:
        transcript.extend(msgs)
    return receiver.finish(msgs[2])[0]


# -- IKNP extension -----------------------------------------------------------


def _prg(key: bytes, counter: int, nbytes: int) -> np.ndarray:
    enc = Cipher(algorithms.AES(key), modes.CTR(counter.to_bytes(16, "big"))).encryptor()
    return np.frombuffer(enc.update(bytes(nbytes)), dtype=np.uint8)


def _rows(cols: np.ndarray, n: int) -> np.ndarray:
    """(KAPPA, nbytes) column matrix -> (n, KAPPA/8) row matrix."""
    bits = np.unpackbits(cols, axis=1)[:, :n]
    return np.packbits(bits.T, axis=1)


def _row_hash(i: int, counter: int, row: bytes, n: int) -> bytes:
    return hashlib.blake2b(
        counter.to_bytes(8, "big") + i.to_bytes(4, "big") + row, digest_size=n
    ).digest()


def _label_tweaks(counter: int, n: int) -> np.ndarray:
    return (np.uint64(counter) << np.uint64(32)) | np.arange(n, dtype=np.uint64)


def _as_labels(rows: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(rows).view("<u8").reshape(-1, 2)


class ExtSender:
    """Extension sender (holds message pairs); base-OT *receiver* with choices s."""

    def __init__(self, rng: Rng | None = None):
        self.rng = rng or default_rng()
        self._s_bytes = self.rng.bytes(KAPPA // 8)
        self._s_bits = np.unpackbits(np.frombuffer(self._s_bytes, dtype=np.uint8))
        self._seeds: list[bytes] | None = None
        self._base: BaseReceiver | None = None
        self.counter = 0

    @property
    def ready(self) -> bool:
        return self._seeds is not None

    def base_respond(self, msg_a: bytes) -> bytes:
        self._base = BaseReceiver([int(b) for b in self._s_bits], 16, self.rng.child())
        return self._base.respond(msg_a)

    def base_finish(self, msg_e: bytes) -> None:
        self._seeds = self._base.finish(msg_e)
        self._base = None

    def _q_rows(self, msg_u: bytes, n: int) -> np.ndarray:
        if not self.ready:
            raise OTError("base OTs not done")
        nbytes = -(-n // 8)
        if len(msg_u) != KAPPA * nbytes:
            raise OTError("bad extension matrix size")
        u = np.frombuffer(msg_u, dtype=np.uint8).reshape(KAPPA, nbytes)
        charge("ext_ot", n)
        self.counter += 1
        q = np.empty((KAPPA, nbytes), dtype=np.uint8)
        for j in range(KAPPA):
            q[j] = _prg(self._seeds[j], self.counter, nbytes)
            if self._s_bits[j]:
                q[j] ^= u[j]
        return _rows(q, n)

    def respond_labels(self, msg_u: bytes, zero: np.ndarray, one: np.ndarray) -> bytes:
        """Batch transfer of 16-byte labels (``(n, 2)`` uint64 arrays)."""
        n = zero.shape[0]
        rows = _as_labels(self._q_rows(msg_u, n))
        s = _as_labels(np.frombuffer(self._s_bytes, dtype=np.uint8)[None, :])
        tw = _label_tweaks(self.counter, n)
        y = np.empty((n, 2, 2), dtype=np.uint64)
        y[:, 0] = zero ^ hashing.tccr(rows, tw)
        y[:, 1] = one ^ hashing.tccr(rows ^ s, tw)
        return hashing.to_bytes(y.reshape(-1, 2))

    def respond(self, msg_u: bytes, pairs: list[tuple[bytes, bytes]]) -> bytes:
        n = len(pairs)
        rows = self._q_rows(msg_u, n)
        s = np.frombuffer(self._s_bytes, dtype=np.uint8)
        out = bytearray()
        for i, (m0, m1) in enumerate(pairs):
            if len(m0) != len(m1):
                raise OTError("message lengths differ")
            r0 = rows[i].tobytes()
            r1 = (rows[i] ^ s).tobytes()
            out += xor_bytes(m0, _row_hash(i, self.counter, r0, len(m0)))
            out += xor_bytes(m1, _row_hash(i, self.counter, r1, len(m1)))
        return bytes(out)


class ExtReceiver:
    """Extension receiver (holds choice bits); base-OT *sender* of seed pairs."""

    def __init__(self, rng: Rng | None = None):
        self.rng = rng or default_rng()
        self._seed_pairs = [(self.rng.bytes(16), self.rng.bytes(16)) for _ in range(KAPPA)]
        self._base: BaseSender | None = None
        self._done = False
        self.counter = 0

    @property
    def ready(self) -> bool:
        return self._done

    def base_start(self) -> bytes:
        self._base = BaseSender(self._seed_pairs, self.rng.child())
        return self._base.first()

    def base_send(self, msg_b: bytes) -> bytes:
        out = self._base.finish(msg_b)
        self._base = None
        self._done = True
        return out

    def request(self, choices) -> bytes:
        if not self.ready:
            raise OTError("base OTs not done")
        r = np.asarray(choices, dtype=np.uint8) & 1
        n = r.shape[0]
        nbytes = -(-n // 8)
        charge("ext_ot", n)
        r_packed = np.packbits(np.concatenate([r, np.zeros(nbytes * 8 - n, dtype=np.uint8)]))
        self.counter += 1
        t = np.empty((KAPPA, nbytes), dtype=np.uint8)
        u = np.empty((KAPPA, nbytes), dtype=np.uint8)
        for j, (k0, k1) in enumerate(self._seed_pairs):
            t[j] = _prg(k0, self.counter, nbytes)
            u[j] = t[j] ^ _prg(k1, self.counter, nbytes) ^ r_packed
        self._pending = (r, _rows(t, n))
        return u.tobytes()

    def finish(self, msg_y: bytes, length: int) -> list[bytes]:
        r, rows = self._pending
        n = r.shape[0]
        if len(msg_y) != 2 * n * length:
            raise OTError("bad extension response size")
        out = []
        for i in range(n):
            off = (2 * i + int(r[i])) * length
            out.append(xor_bytes(msg_y[off:off + length], _row_hash(i, self.counter, rows[i].tobytes(), length)))
        del self._pending
        return out

    def finish_labels(self, msg_y: bytes) -> np.ndarray:
        r, rows = self._pending
        del self._pending
        n = r.shape[0]
        if len(msg_y) != 2 * n * 16:
            raise OTError("bad extension response size")
        y = hashing.from_bytes(msg_y).reshape(n, 2, 2)
        chosen = y[np.arange(n), r.astype(np.int64)]
        return chosen ^ hashing.tccr(_as_labels(rows), _label_tweaks(self.counter, n))
