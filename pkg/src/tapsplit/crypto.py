"""Primitive schemes: XOR secret sharing, hybrid public-key encryption, signatures.

Every party holds one :class:`KeyPair` that bundles an X25519 key (for
encryption) with an Ed25519 key (for 64-byte signatures).  Encryption is
ECIES-style: ephemeral X25519 agreement, HKDF-SHA256, AES-256-GCM.
"""

from __future__ import annotations

import os
import random
import threading
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidSignature, InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from tapsplit import kernels
from tapsplit.metering import charge

SIGNATURE_SIZE = 64
PUBLIC_KEY_SIZE = 64
SECRET_KEY_SIZE = 64
_EPH = 32
_NONCE = 12
_TAG = 16
CIPHERTEXT_OVERHEAD = _EPH + _NONCE + _TAG

_RAW = serialization.Encoding.Raw
_RAW_PUB = serialization.PublicFormat.Raw
_RAW_PRIV = serialization.PrivateFormat.Raw
_NOENC = serialization.NoEncryption()


class CryptoError(Exception):
    pass


class ReconstructionError(CryptoError):
    pass


class DecryptionError(CryptoError):
    pass


class Rng:
    """Randomness source shared by every primitive.

    With no seed, draws come from the OS CSPRNG.  A seed switches to a
    deterministic stream so whole protocol runs can be replayed bit for bit;
    that mode is for tests and benchmarks only.
    """

    def __init__(self, seed: int | None = None):
        self.seed = seed
        self._lock = threading.Lock()
        self._det = random.Random(seed) if seed is not None else None

    @property
    def deterministic(self) -> bool:
        return self._det is not None

    def bytes(self, n: int) -> bytes:
        if n == 0:
            return b""
        if self._det is None:
            return os.urandom(n)
        with self._lock:
            return self._det.randbytes(n)

    def randbelow(self, n: int) -> int:
        return int.from_bytes(self.bytes(8), "big") % n

    def child(self) -> Rng:
        """An independent stream (deterministic iff this one is)."""
        if self._det is None:
            return Rng()
        return Rng(int.from_bytes(self.bytes(8), "big"))


_default_rng = Rng()


def default_rng() -> Rng:
    return _default_rng


def set_default_rng(rng: Rng) -> Rng:
    global _default_rng
    previous, _default_rng = _default_rng, rng
    return previous


# -- secret sharing ---------------------------------------------------------


def share(secret: bytes, rng: Rng | None = None) -> tuple[bytes, bytes]:
    """Split ``secret`` into two XOR shares; the first is uniformly random."""
    charge("share_bytes", len(secret))
    k = (rng or _default_rng).bytes(len(secret))
    return k, kernels.xor_bytes(k, secret)


def reconstruct(k: bytes, k2: bytes) -> bytes:
    if len(k) != len(k2):
        raise ReconstructionError(f"share lengths differ: {len(k)} != {len(k2)}")
    charge("reconstruct_bytes", len(k))
    return kernels.xor_bytes(k, k2)


# -- keys -------------------------------------------------------------------


@dataclass(frozen=True)
class KeyPair:
    public_key: bytes
    secret_key: bytes
    owner_id: str

    def __repr__(self) -> str:
        return f"KeyPair(owner_id={self.owner_id!r}, public_key={self.public_key.hex()[:16]}...)"


def generate_keypair(owner_id: str, rng: Rng | None = None) -> KeyPair:
    rng = rng or _default_rng
    x_sk = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    e_sk = Ed25519PrivateKey.from_private_bytes(rng.bytes(32))
    pk = x_sk.public_key().public_bytes(_RAW, _RAW_PUB) + e_sk.public_key().public_bytes(_RAW, _RAW_PUB)
    sk = x_sk.private_bytes(_RAW, _RAW_PRIV, _NOENC) + e_sk.private_bytes(_RAW, _RAW_PRIV, _NOENC)
    return KeyPair(pk, sk, owner_id)


def save_keypair(root: str | os.PathLike, kp: KeyPair) -> Path:
    d = Path(root) / kp.owner_id
    d.mkdir(parents=True, exist_ok=True)
    (d / "pk").write_bytes(kp.public_key)
    (d / "sk").write_bytes(kp.secret_key)
    return d


def load_keypair(root: str | os.PathLike, owner_id: str) -> KeyPair:
    d = Path(root) / owner_id
    return KeyPair((d / "pk").read_bytes(), (d / "sk").read_bytes(), owner_id)


def load_public_key(root: str | os.PathLike, owner_id: str) -> bytes:
    return (Path(root) / owner_id / "pk").read_bytes()


# -- public-key encryption ----------------------------------------------------


@dataclass(frozen=True)
class Ciphertext:
    data: bytes
    recipient: str = ""

    def __len__(self) -> int:
        return len(self.data)


def _kdf(shared: bytes, eph_pub: bytes, recipient_pub: bytes) -> bytes:
    return HKDF(
        algorithm=hashes.SHA256(),
        length=32,
        salt=None,
        info=b"tapsplit/ecies/v1" + eph_pub + recipient_pub,
    ).derive(shared)


def pk_encrypt(pk: bytes, m: bytes, rng: Rng | None = None, recipient: str = "") -> Ciphertext:
    charge("encrypt")
    rng = rng or _default_rng
    if len(pk) != PUBLIC_KEY_SIZE:
        raise CryptoError("malformed public key")
    recipient_pub = pk[:32]
    eph = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    eph_pub = eph.public_key().public_bytes(_RAW, _RAW_PUB)
    key = _kdf(eph.exchange(X25519PublicKey.from_public_bytes(recipient_pub)), eph_pub, recipient_pub)
    nonce = rng.bytes(_NONCE)
    return Ciphertext(eph_pub + nonce + AESGCM(key).encrypt(nonce, m, eph_pub), recipient)


def pk_decrypt(sk: bytes, ct: Ciphertext | bytes) -> bytes:
    charge("decrypt")
    data = ct.data if isinstance(ct, Ciphertext) else ct
    if len(data) < CIPHERTEXT_OVERHEAD or len(sk) != SECRET_KEY_SIZE:
        raise DecryptionError("ciphertext too short")
    x_sk = X25519PrivateKey.from_private_bytes(sk[:32])
    eph_pub, nonce, body = data[:_EPH], data[_EPH:_EPH + _NONCE], data[_EPH + _NONCE:]
    try:
        shared = x_sk.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    except ValueError as exc:  # low-order point
        raise DecryptionError("invalid ephemeral key") from exc
    key = _kdf(shared, eph_pub, x_sk.public_key().public_bytes(_RAW, _RAW_PUB))
    try:
        return AESGCM(key).decrypt(nonce, body, eph_pub)
    except InvalidTag as exc:
        raise DecryptionError("authentication failed") from exc


# -- signatures -------------------------------------------------------------


@dataclass(frozen=True)
class Signature:
    data: bytes
    signer: str = ""

    def __post_init__(self):
        if len(self.data) != SIGNATURE_SIZE:
            raise ValueError(f"signature must be {SIGNATURE_SIZE} bytes, got {len(self.data)}")


def sign(sk: bytes, m: bytes, signer: str = "") -> Signature:
    charge("sign")
    key = Ed25519PrivateKey.from_private_bytes(sk[32:64])
    return Signature(key.sign(m), signer)


def verify(pk: bytes, m: bytes, sig: Signature | bytes) -> bool:
    """True when ``sig`` is valid for ``m`` under ``pk``; False otherwise (never raises)."""
    charge("verify")
    data = sig.data if isinstance(sig, Signature) else sig
    if len(data) != SIGNATURE_SIZE or len(pk) != PUBLIC_KEY_SIZE:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(pk[32:]).verify(data, m)
    except (InvalidSignature, ValueError):
        return False
    return True
