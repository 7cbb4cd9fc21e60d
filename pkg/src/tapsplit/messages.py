"""Protocol messages and their canonical encodings.

Every request is ``[type:1][body]``; replies are ``[0x00][payload]`` or
``[0xFF][code:1]``.  Signed structures travel as ``[body blob][signature
blob]`` and receivers verify the signature over the raw body bytes before
parsing the body, so a flipped byte inside a signed body always surfaces as a
signature failure and a flipped length prefix always as a malformed message.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass

from tapsplit import crypto
from tapsplit.crypto import SIGNATURE_SIZE
from tapsplit.oauth_chain import TokenChain
from tapsplit.stringsub import KeyedShareMap
from tapsplit.wire import DecodeError, Reader, Writer

ID_BYTES = 16


class MsgType(enum.IntEnum):
    OK = 0x00
    TRIGGER = 0x01
    TOUT = 0x02
    TEE_GENERATE = 0x03
    YAO = 0x04
    ACTION = 0x05
    REFRESH = 0x06
    CHAIN_UPDATE = 0x07
    SIGN_T = 0x08
    INSTALL = 0x09
    NOSEC_TRIGGER = 0x10
    NOSEC_ACTION = 0x11
    ERROR = 0xFF


class Code(enum.IntEnum):
    BAD_SIGNATURE = 1
    BAD_TOKEN = 2
    EXPIRED = 3
    REPLAY = 4
    PROOF_FAIL = 5
    MALFORMED = 6
    MISMATCH = 7


class Rejected(Exception):
    """A party refused a message; ``party`` names who and ``code`` why."""

    def __init__(self, code: int, msg: str = "", party: str = ""):
        super().__init__(msg or Code(code).name.lower())
        self.code = Code(code)
        self.party = party

    def __str__(self) -> str:
        where = f"{self.party}: " if self.party else ""
        return f"{where}{self.code.name.lower()} ({self.args[0]})"


# -- framing ------------------------------------------------------------------


def ok(payload: bytes = b"") -> bytes:
    return bytes([MsgType.OK]) + payload


def error(code: int) -> bytes:
    return bytes([MsgType.ERROR, int(code)])


def parse_reply(data: bytes, party: str = "") -> bytes:
    """Payload of an OK reply; raises :class:`Rejected` for error replies."""
    if not data:
        raise Rejected(Code.MALFORMED, "empty reply", party)
    if data[0] == MsgType.OK:
        return data[1:]
    if data[0] == MsgType.ERROR and len(data) == 2 and data[1] in Code._value2member_map_:
        raise Rejected(data[1], "rejected", party)
    raise Rejected(Code.MALFORMED, "unrecognised reply", party)


def split_type(data: bytes) -> tuple[int, bytes]:
    if not data:
        raise Rejected(Code.MALFORMED, "empty message")
    return data[0], data[1:]


def _writer(t: MsgType) -> Writer:
    w = Writer()
    w.u8(t, "type")
    return w


def _strict(fn):
    """Turn decode failures into MALFORMED rejections."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (DecodeError, ValueError, KeyError, UnicodeDecodeError) as exc:
            raise Rejected(Code.MALFORMED, str(exc) or type(exc).__name__) from exc

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _read_id(r: Reader) -> bytes:
    return r.raw(ID_BYTES)


# -- trigger request ----------------------------------------------------------

T_DOMAIN = b"tapsplit/T"
TOUT_DOMAIN = b"tapsplit/tout"
AIN_DOMAIN = b"tapsplit/ain"


@dataclass(frozen=True)
class TriggerRequest:
    endpoint: str
    c_at: bytes
    c_trig_inp: bytes
    tid: bytes

    def encode(self) -> bytes:
        w = Writer()
        w.text(self.endpoint, "endpoint").blob(self.c_at, "c_at").blob(self.c_trig_inp, "c_trig_inp").raw(self.tid, "tid")
        return w.getvalue()

    @classmethod
    @_strict
    def decode(cls, data: bytes) -> TriggerRequest:
        r = Reader(data)
        t = cls(r.text(), r.blob(), r.blob(), _read_id(r))
        r.done()
        return t


def sign_body(domain: bytes, kp: crypto.KeyPair, body: bytes) -> bytes:
    return crypto.sign(kp.secret_key, domain + body, kp.owner_id).data


def verify_body(domain: bytes, pk: bytes, body: bytes, sig: bytes) -> bool:
    return crypto.verify(pk, domain + body, sig)


def write_chain_field(w: Writer, chain: bytes) -> None:
    """Length-prefixed chain with per-field spans under ``chain/``."""
    with w.scope("chain"):
        w.u32(len(chain), "chain#len")
        if chain:
            TokenChain.decode(chain).write(w)


def trigger_message(t_body: bytes, sig: bytes, chain: bytes) -> Writer:
    w = _writer(MsgType.TRIGGER)
    w.blob(t_body, "T").blob(sig, "sig_T")
    write_chain_field(w, chain)
    return w


@_strict
def read_trigger_message(body: bytes) -> tuple[bytes, bytes, bytes]:
    r = Reader(body)
    out = r.blob(), r.blob(), r.blob()
    r.done()
    return out


# -- trigger output -----------------------------------------------------------


@dataclass(frozen=True)
class TriggerOutput:
    rid: bytes
    tid: bytes
    shares: KeyedShareMap

    def encode(self) -> bytes:
        w = Writer()
        w.raw(self.rid, "rid").raw(self.tid, "tid")
        self.shares.write(w, "shares")
        return w.getvalue()

    @classmethod
    @_strict
    def decode(cls, data: bytes) -> TriggerOutput:
        r = Reader(data)
        t = cls(_read_id(r), _read_id(r), KeyedShareMap.read(r))
        r.done()
        return t


def signed_blob(w: Writer, body: bytes, sig: bytes, name: str) -> Writer:
    """``[body blob][sig blob]`` with spans ``name`` and ``sig``."""
    with w.scope(name):
        w.blob(body, "body").blob(sig, "sig")
    return w


@_strict
def read_signed(data: bytes) -> tuple[bytes, bytes]:
    r = Reader(data)
    body, sig = r.blob(), r.blob()
    r.done()
    if sig and len(sig) != SIGNATURE_SIZE:
        raise Rejected(Code.MALFORMED, "bad signature length")
    return body, sig


# -- action request -----------------------------------------------------------


@dataclass(frozen=True)
class ActionRequest:
    rid: bytes
    action_endpoint: str
    c_at: bytes
    shares: KeyedShareMap

    def encode(self) -> bytes:
        w = Writer()
        w.raw(self.rid, "rid").text(self.action_endpoint, "endpoint").blob(self.c_at, "c_at")
        self.shares.write(w, "shares")
        return w.getvalue()

    @classmethod
    @_strict
    def decode(cls, data: bytes) -> ActionRequest:
        r = Reader(data)
        a = cls(_read_id(r), r.text(), r.blob(), KeyedShareMap.read(r))
        r.done()
        return a


@dataclass(frozen=True)
class TeeProof:
    server: int
    index: int
    sig: bytes

    def write(self, w: Writer, name: str) -> None:
        with w.scope(name):
            w.u8(self.server, "server").u8(self.index, "index").raw(self.sig, "sig")

    @classmethod
    def read(cls, r: Reader) -> TeeProof:
        return cls(r.u8(), r.u8(), r.raw(SIGNATURE_SIZE))

    def encode(self) -> bytes:
        w = Writer()
        self.write(w, "proof")
        return w.getvalue()

    @classmethod
    @_strict
    def decode(cls, data: bytes) -> TeeProof:
        r = Reader(data)
        p = cls.read(r)
        r.done()
        return p


@dataclass(frozen=True)
class ActionSubmission:
    server: int
    tee_index: int
    ain: bytes  # encoded ActionRequest, exactly the bytes the TEEs signed
    proofs: tuple[TeeProof, ...]
    chain: bytes  # encoded TokenChain or empty

    def writer(self) -> Writer:
        w = _writer(MsgType.ACTION)
        w.u8(self.server, "server").u8(self.tee_index, "tee_index").blob(self.ain, "ain")
        w.u32(len(self.proofs), "proofs#len")
        for k, p in enumerate(self.proofs):
            p.write(w, f"proof{k}")
        write_chain_field(w, self.chain)
        return w

    def encode(self) -> bytes:
        return self.writer().getvalue()

    @classmethod
    @_strict
    def decode_body(cls, body: bytes) -> ActionSubmission:
        r = Reader(body)
        server, idx, ain = r.u8(), r.u8(), r.blob()
        n = r.u32()
        if n > 16:
            raise Rejected(Code.MALFORMED, "too many proofs")
        proofs = tuple(TeeProof.read(r) for _ in range(n))
        chain = r.blob()
        r.done()
        return cls(server, idx, ain, proofs, chain)


# -- refresh --------------------------------------------------------------------


@dataclass(frozen=True)
class RefreshRequest:
    tag: str
    c_at: bytes
    c_rt: bytes
    chain: bytes

    def writer(self) -> Writer:
        w = _writer(MsgType.REFRESH)
        w.text(self.tag, "tag").blob(self.c_at, "c_at").blob(self.c_rt, "c_rt")
        write_chain_field(w, self.chain)
        return w

    @classmethod
    @_strict
    def decode_body(cls, body: bytes) -> RefreshRequest:
        r = Reader(body)
        m = cls(r.text(), r.blob(), r.blob(), r.blob())
        r.done()
        return m


@dataclass(frozen=True)
class RefreshReply:
    c_at: bytes
    c_rt: bytes
    chain: bytes

    def encode(self) -> bytes:
        return Writer().blob(self.c_at).blob(self.c_rt).blob(self.chain).getvalue()

    @classmethod
    @_strict
    def decode(cls, data: bytes) -> RefreshReply:
        r = Reader(data)
        m = cls(r.blob(), r.blob(), r.blob())
        r.done()
        return m


def chain_update(tag: str, service: str, chain: bytes) -> bytes:
    return _writer(MsgType.CHAIN_UPDATE).text(tag).text(service).blob(chain).getvalue()


@_strict
def read_chain_update(body: bytes) -> tuple[str, str, bytes]:
    r = Reader(body)
    out = r.text(), r.text(), r.blob()
    r.done()
    return out


# -- platform-internal --------------------------------------------------------


def tee_generate(applet_id: str, tout: bytes) -> Writer:
    w = _writer(MsgType.TEE_GENERATE)
    w.text(applet_id, "applet").blob(tout, "tout_msg")
    return w


@_strict
def read_tee_generate(body: bytes) -> tuple[str, bytes]:
    r = Reader(body)
    out = r.text(), r.blob()
    r.done()
    return out


def generate_reply(ain: bytes, proof: TeeProof) -> bytes:
    w = Writer().blob(ain)
    proof.write(w, "proof")
    return w.getvalue()


@_strict
def read_generate_reply(data: bytes) -> tuple[bytes, TeeProof]:
    r = Reader(data)
    ain, proof = r.blob(), TeeProof.read(r)
    r.done()
    return ain, proof


NO_TEE = 0xFF


def yao_message(tee_index: int, frame: bytes) -> bytes:
    return _writer(MsgType.YAO).u8(tee_index).blob(frame).getvalue()


@_strict
def read_yao(body: bytes) -> tuple[int, bytes]:
    r = Reader(body)
    out = r.u8(), r.blob()
    r.done()
    return out


def install_message(applet_id: str, app: bytes) -> bytes:
    return _writer(MsgType.INSTALL).text(applet_id).blob(app).getvalue()


@_strict
def read_install(body: bytes) -> tuple[str, bytes]:
    r = Reader(body)
    out = r.text(), r.blob()
    r.done()
    return out


# -- baseline (no security) ----------------------------------------------------


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def json_message(t: MsgType, obj) -> bytes:
    return bytes([t]) + canonical_json(obj)


@_strict
def read_json(body: bytes):
    return json.loads(body.decode("utf-8"))
