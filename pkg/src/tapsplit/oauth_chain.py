"""Signed token chains linking a user's epoch-0 access token to the current one.

A chain is ``Enc(pk_issuer, at_0 || at_k || k)`` plus the issuer's signature
over ``ciphertext || k``.  The platform keeps only ciphertexts, so it can ask
the issuing service to refresh tokens while the user is offline without ever
seeing a plaintext token.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field

from tapsplit import crypto
from tapsplit.crypto import KeyPair, Rng, default_rng
from tapsplit.wire import DecodeError, Reader, Writer

TOKEN_BYTES = 32
NOTE_BYTES = 2 * TOKEN_BYTES + 4


class ChainCode(enum.IntEnum):
    BAD_SIGNATURE = 1
    BAD_TOKEN = 2
    EXPIRED = 3
    MALFORMED = 6


class ChainError(Exception):
    def __init__(self, code: ChainCode, msg: str):
        super().__init__(msg)
        self.code = ChainCode(code)


@dataclass
class EpochClock:
    epoch: int = 0
    epoch_length: float = 86400.0  # simulated seconds

    def advance(self, n: int = 1) -> int:
        if n < 0:
            raise ValueError("epochs never go backwards")
        self.epoch += n
        return self.epoch


@dataclass(frozen=True)
class TokenChain:
    ciphertext: bytes
    signature: bytes
    epoch: int

    def signed_bytes(self) -> bytes:
        return chain_message(self.ciphertext, self.epoch)

    def write(self, w: Writer, name: str | None = None) -> None:
        p = f"{name}/" if name else ""
        w.blob(self.ciphertext, p + "ct").raw(self.signature, p + "sig").u32(self.epoch, p + "epoch")

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> TokenChain:
        ct = r.blob()
        return cls(ct, r.raw(crypto.SIGNATURE_SIZE), r.u32())

    @classmethod
    def decode(cls, data: bytes) -> TokenChain:
        r = Reader(data)
        chain = cls.read(r)
        r.done()
        return chain


def chain_message(ciphertext: bytes, epoch: int) -> bytes:
    return b"tapsplit/chain" + ciphertext + struct.pack(">I", epoch)


def _seal(at_0: bytes, at_k: bytes, epoch: int, issuer: KeyPair, rng: Rng | None) -> TokenChain:
    if len(at_0) != TOKEN_BYTES or len(at_k) != TOKEN_BYTES:
        raise ValueError(f"tokens must be {TOKEN_BYTES} bytes")
    ct = crypto.pk_encrypt(issuer.public_key, at_0 + at_k + struct.pack(">I", epoch), rng, issuer.owner_id).data
    sig = crypto.sign(issuer.secret_key, chain_message(ct, epoch), issuer.owner_id).data
    return TokenChain(ct, sig, epoch)


def make_initial_chain(at_0: bytes, issuer: KeyPair, rng: Rng | None = None) -> TokenChain:
    return _seal(at_0, at_0, 0, issuer, rng)


def open_chain(chain: TokenChain, issuer: KeyPair) -> tuple[bytes, bytes]:
    """Check the issuer signature and return ``(at_0, at_k)``."""
    if not crypto.verify(issuer.public_key, chain.signed_bytes(), chain.signature):
        raise ChainError(ChainCode.BAD_SIGNATURE, "chain signature invalid")
    try:
        note = crypto.pk_decrypt(issuer.secret_key, chain.ciphertext)
    except crypto.DecryptionError as exc:
        raise ChainError(ChainCode.BAD_TOKEN, "chain does not decrypt") from exc
    if len(note) != NOTE_BYTES or struct.unpack(">I", note[-4:])[0] != chain.epoch:
        raise ChainError(ChainCode.BAD_TOKEN, "chain note inconsistent")
    return note[:TOKEN_BYTES], note[TOKEN_BYTES:2 * TOKEN_BYTES]


def _decrypt_token(issuer: KeyPair, ct: bytes) -> bytes:
    try:
        tok = crypto.pk_decrypt(issuer.secret_key, ct)
    except crypto.DecryptionError as exc:
        raise ChainError(ChainCode.BAD_TOKEN, "presented token does not decrypt") from exc
    if len(tok) != TOKEN_BYTES:
        raise ChainError(ChainCode.BAD_TOKEN, "presented token has wrong length")
    return tok


# -- issuing side -------------------------------------------------------------


@dataclass
class TokenRecord:
    kind: str  # "access" or "refresh"
    subject: str
    issued: int
    lifetime: int | None

    def expired(self, epoch: int) -> bool:
        return self.lifetime is not None and epoch >= self.issued + self.lifetime


@dataclass
class TokenStore:
    """What an OAuth issuer remembers about the tokens it handed out."""

    access_lifetime: int | None = None
    refresh_lifetime: int | None = None
    records: dict[bytes, TokenRecord] = field(default_factory=dict)
    pairs: dict[bytes, bytes] = field(default_factory=dict)  # refresh -> access

    def issue(self, subject: str, epoch: int, rng: Rng | None = None) -> tuple[bytes, bytes]:
        rng = rng or default_rng()
        at, rt = rng.bytes(TOKEN_BYTES), rng.bytes(TOKEN_BYTES)
        self.records[at] = TokenRecord("access", subject, epoch, self.access_lifetime)
        self.records[rt] = TokenRecord("refresh", subject, epoch, self.refresh_lifetime)
        self.pairs[rt] = at
        return at, rt

    def check(self, token: bytes, kind: str, epoch: int) -> TokenRecord:
        rec = self.records.get(token)
        if rec is None or rec.kind != kind:
            raise ChainError(ChainCode.BAD_TOKEN, f"unknown {kind} token")
        if rec.expired(epoch):
            raise ChainError(ChainCode.EXPIRED, f"{kind} token expired")
        return rec


def resolve_token(presented_ct: bytes, issuer: KeyPair, store: TokenStore, clock: EpochClock) -> bytes:
    """No chain: the presented token itself must be live."""
    at = _decrypt_token(issuer, presented_ct)
    store.check(at, "access", clock.epoch)
    return at


def verify_and_resolve(
    chain: TokenChain,
    presented_ct: bytes,
    issuer: KeyPair,
    clock: EpochClock,
    store: TokenStore | None = None,
    *,
    access_lifetime: int | None = None,
) -> bytes:
    """The current access token, if the chain is genuine, matches, and is live."""
    at_0, at_k = open_chain(chain, issuer)
    if _decrypt_token(issuer, presented_ct) != at_0:
        raise ChainError(ChainCode.BAD_TOKEN, "chain does not match the installed token")
    lifetime = access_lifetime if store is None else store.access_lifetime
    if lifetime is not None and clock.epoch >= chain.epoch + lifetime:
        raise ChainError(ChainCode.EXPIRED, f"chain for epoch {chain.epoch} expired at epoch {clock.epoch}")
    if store is not None:
        store.check(at_k, "access", clock.epoch)
    return at_k


def advance_chain(
    chain: TokenChain,
    at_k: bytes,
    rt_k: bytes,
    issuer: KeyPair,
    store: TokenStore,
    clock: EpochClock,
    rng: Rng | None = None,
) -> tuple[bytes, bytes, TokenChain]:
    """Refresh: new tokens for epoch ``k+1`` and the chain linking them to ``at_0``."""
    at_0, chained = open_chain(chain, issuer)
    if chained != at_k:
        raise ChainError(ChainCode.BAD_TOKEN, "chain token does not match presented access token")
    rec = store.check(rt_k, "refresh", clock.epoch)
    if store.pairs.get(rt_k) != at_k:
        raise ChainError(ChainCode.BAD_TOKEN, "refresh token not paired with access token")
    nxt = chain.epoch + 1
    at_new, rt_new = store.issue(rec.subject, nxt, rng)
    del store.pairs[rt_k]  # single use
    return at_new, rt_new, _seal(at_0, at_new, nxt, issuer, rng)


def refresh_encrypted(
    chain: TokenChain,
    c_at: bytes,
    c_rt: bytes,
    issuer: KeyPair,
    store: TokenStore,
    clock: EpochClock,
    rng: Rng | None = None,
) -> tuple[bytes, bytes, TokenChain]:
    """:func:`advance_chain` with tokens kept encrypted to the issuer on both sides."""
    at_k = _decrypt_token(issuer, c_at)
    rt_k = _decrypt_token(issuer, c_rt)
    at_new, rt_new, nxt = advance_chain(chain, at_k, rt_k, issuer, store, clock, rng)
    enc = lambda t: crypto.pk_encrypt(issuer.public_key, t, rng, issuer.owner_id).data  # noqa: E731
    return enc(at_new), enc(rt_new), nxt


def decode_chain(data: bytes) -> TokenChain:
    try:
        return TokenChain.decode(data)
    except DecodeError as exc:
        raise ChainError(ChainCode.MALFORMED, str(exc)) from exc
