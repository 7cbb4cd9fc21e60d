"""Mock trigger and action services with the platform-facing crypto shim.

The shim is what a service adds to its ordinary API: decrypting tokens and
trigger inputs, sharing and signing trigger outputs, checking TEE proofs,
reconstructing action inputs, rejecting replays, and refreshing tokens
through signed chains.  The underlying APIs are tiny mocks: a weather
trigger and an email action.
"""

from __future__ import annotations

import json
import os
import threading
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

from tapsplit import crypto, oauth_chain
from tapsplit import messages as msg
from tapsplit.blocks import DEFAULT_POLICY, BlockError, PaddingPolicy, reconstruct_value, share_value
from tapsplit.crypto import KeyPair, Rng, default_rng
from tapsplit.messages import Code, MsgType, Rejected
from tapsplit.oauth_chain import ChainError, EpochClock, TokenChain, TokenStore
from tapsplit.stringsub import KeyedShareMap
from tapsplit.transport import Network

TriggerFn = Callable[[Mapping[str, str]], dict[str, str]]
ActionFn = Callable[[Mapping[str, str]], dict]


# -- mock APIs ----------------------------------------------------------------


@dataclass
class WeatherTrigger:
    """Reports the current weather type; tests set :attr:`weather` directly."""

    weather: str = "sunny"

    def __call__(self, trig_inp: Mapping[str, str]) -> dict[str, str]:
        return {"new_weather_type": self.weather}


@dataclass
class Outbox:
    """Action effects, one canonical-JSON entry each; optionally file-backed."""

    path: Path | None = None
    entries: list[bytes] = field(default_factory=list)

    def __post_init__(self):
        if self.path is not None and self.path.exists():
            self.entries = [ln for ln in self.path.read_bytes().split(b"\n") if ln]

    def append(self, effect: bytes) -> None:
        self.entries.append(effect)
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "ab") as f:
                f.write(effect + b"\n")

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class EmailAction:
    outbox: Outbox = field(default_factory=Outbox)

    def __call__(self, act_inp: Mapping[str, str]) -> dict:
        return {"kind": "email", **act_inp}


def effect_bytes(endpoint: str, fields: Mapping[str, str]) -> bytes:
    return msg.canonical_json({"endpoint": endpoint, "fields": dict(fields)})


class RidStore:
    """Seen request ids; append-only file so replays stay rejected across restarts."""

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._seen: set[bytes] = set()
        if self.path is not None and self.path.exists():
            data = self.path.read_bytes()
            self._seen = {data[i:i + msg.ID_BYTES] for i in range(0, len(data), msg.ID_BYTES)}

    def __contains__(self, rid: bytes) -> bool:
        return rid in self._seen

    def __len__(self) -> int:
        return len(self._seen)

    def add(self, rid: bytes) -> bool:
        """Atomically record ``rid``; False if it was already present."""
        with self._lock:
            if rid in self._seen:
                return False
            self._seen.add(rid)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "ab") as f:
                    f.write(rid)
            return True


# -- common service machinery ------------------------------------------------------


@dataclass
class ServiceConfig:
    active: bool = True
    chains: bool = False
    policy: PaddingPolicy = DEFAULT_POLICY


class Service:
    def __init__(
        self,
        name: str,
        keys: KeyPair,
        network: Network,
        clock: EpochClock,
        *,
        tokens: TokenStore | None = None,
        config: ServiceConfig | None = None,
        rng: Rng | None = None,
    ):
        self.name = name
        self.keys = keys
        self.net = network
        self.clock = clock
        self.tokens = TokenStore() if tokens is None else tokens
        self.config = ServiceConfig() if config is None else config
        self.rng = rng or default_rng()
        self.rejections: list[Rejected] = []
        self.transcript: list[bytes] = []
        network.register(name, self.handle)

    # OAuth authorisation happens out of band, before the user goes offline.
    def issue_tokens(self, subject: str) -> tuple[bytes, bytes, TokenChain]:
        at, rt = self.tokens.issue(subject, self.clock.epoch, self.rng)
        return at, rt, oauth_chain.make_initial_chain(at, self.keys, self.rng)

    def handle(self, src: str, data: bytes) -> bytes:
        self.transcript.append(data)
        try:
            t, body = msg.split_type(data)
            return self.dispatch(src, t, body)
        except Rejected as exc:
            return self.reject(exc)
        except (BlockError, ValueError, KeyError, TypeError) as exc:
            # anything that slipped past the strict decoders is still malformed input
            return self.reject(Rejected(Code.MALFORMED, str(exc) or type(exc).__name__))

    def reject(self, exc: Rejected) -> bytes:
        exc.party = self.name
        self.rejections.append(exc)
        return msg.error(exc.code)

    def dispatch(self, src: str, t: int, body: bytes) -> bytes:
        if t == MsgType.REFRESH:
            return self._refresh(body)
        raise Rejected(Code.MALFORMED, f"unexpected message type {t}")

    def resolve(self, c_at: bytes, chain: bytes) -> bytes:
        try:
            if chain:
                return oauth_chain.verify_and_resolve(oauth_chain.decode_chain(chain), c_at, self.keys, self.clock, self.tokens)
            return oauth_chain.resolve_token(c_at, self.keys, self.tokens, self.clock)
        except ChainError as exc:
            raise Rejected(int(exc.code), str(exc)) from exc

    def _refresh(self, body: bytes) -> bytes:
        req = msg.RefreshRequest.decode_body(body)
        try:
            chain = oauth_chain.decode_chain(req.chain)
            c_at, c_rt, nxt = oauth_chain.refresh_encrypted(
                chain, req.c_at, req.c_rt, self.keys, self.tokens, self.clock, self.rng
            )
        except ChainError as exc:
            raise Rejected(int(exc.code), str(exc)) from exc
        new_chain = nxt.encode()
        self.net.post(self.name, "M1", msg.chain_update(req.tag, self.name, new_chain))
        return msg.ok(msg.RefreshReply(c_at, c_rt, new_chain).encode())


# -- trigger service ----------------------------------------------------------------


class TriggerService(Service):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.endpoints: dict[str, TriggerFn] = {}

    def register_endpoint(self, endpoint: str, fn: TriggerFn) -> None:
        self.endpoints[endpoint] = fn

    def dispatch(self, src: str, t: int, body: bytes) -> bytes:
        if t == MsgType.SIGN_T:
            return self._sign_request(body)
        if t == MsgType.TRIGGER:
            return self._trigger(body)
        if t == MsgType.NOSEC_TRIGGER:
            return self._nosec(body)
        return super().dispatch(src, t, body)

    def _sign_request(self, body: bytes) -> bytes:
        """Setup: the user asks TS to sign its trigger request (T with TID)."""
        t = msg.TriggerRequest.decode(body)
        if t.endpoint not in self.endpoints:
            raise Rejected(Code.MALFORMED, f"unknown endpoint {t.endpoint!r}")
        return msg.ok(msg.sign_body(msg.T_DOMAIN, self.keys, body))

    def _trigger(self, body: bytes) -> bytes:
        t_body, sig, chain = msg.read_trigger_message(body)
        if self.config.active and not msg.verify_body(msg.T_DOMAIN, self.keys.public_key, t_body, sig):
            raise Rejected(Code.BAD_SIGNATURE, "trigger request signature invalid")
        t = msg.TriggerRequest.decode(t_body)
        fn = self.endpoints.get(t.endpoint)
        if fn is None:
            raise Rejected(Code.MALFORMED, f"unknown endpoint {t.endpoint!r}")
        self.resolve(t.c_at, chain)
        try:
            trig_inp = json.loads(crypto.pk_decrypt(self.keys.secret_key, t.c_trig_inp))
        except (crypto.DecryptionError, ValueError) as exc:
            raise Rejected(Code.MALFORMED, "trigger input does not decrypt") from exc
        trig_out = fn(trig_inp)
        halves: list[dict] = [{}, {}]
        for k, v in trig_out.items():
            halves[0][k], halves[1][k] = share_value(v, self.config.policy, self.rng, literal_only=True)
        rid = self.rng.bytes(msg.ID_BYTES)
        halves_out = []
        for b, t_type in ((0, MsgType.OK), (1, MsgType.TOUT)):
            tout = msg.TriggerOutput(rid, t.tid, KeyedShareMap(halves[b])).encode()
            sig_b = msg.sign_body(msg.TOUT_DOMAIN, self.keys, tout) if self.config.active else b""
            w = msg.Writer().u8(t_type, "type")
            if b == 1:
                w.raw(t.tid, "route")  # lets M1 route the half without parsing the signed part
            halves_out.append(msg.signed_blob(w, tout, sig_b, "tout"))
        # M1's half goes straight to M1; M0's half is the reply.
        self.net.post(self.name, "M1", halves_out[1].getvalue(), halves_out[1].spans)
        return halves_out[0].getvalue(), halves_out[0].spans

    def _nosec(self, body: bytes) -> bytes:
        req = msg.read_json(body)
        try:
            fn = self.endpoints[req["endpoint"]]
            self.tokens.check(bytes.fromhex(req["token"]), "access", self.clock.epoch)
        except KeyError as exc:
            raise Rejected(Code.MALFORMED, "unknown endpoint") from exc
        except ChainError as exc:
            raise Rejected(int(exc.code), str(exc)) from exc
        return msg.ok(msg.canonical_json(fn(req["trig_inp"])))


# -- action service ---------------------------------------------------------------------


@dataclass
class _Pending:
    sub: msg.ActionSubmission
    ain: msg.ActionRequest
    arrival: int


class ActionService(Service):
    def __init__(
        self,
        *args,
        tee_keys: Mapping[tuple[int, int], bytes] | None = None,
        rids: RidStore | None = None,
        outbox: Outbox | None = None,
        **kwargs,
    ):
        super().__init__(*args, **kwargs)
        self.tee_keys = dict(tee_keys or {})
        self.rids = RidStore() if rids is None else rids
        self.outbox = Outbox() if outbox is None else outbox
        self.endpoints: dict[str, ActionFn] = {}
        self.pending: dict[tuple[str, bytes], _Pending] = {}
        self.timeouts: list[bytes] = []
        self.tick = 0
        self._lock = threading.Lock()

    def register_endpoint(self, endpoint: str, fn: ActionFn) -> None:
        self.endpoints[endpoint] = fn

    def dispatch(self, src: str, t: int, body: bytes) -> bytes:
        if t == MsgType.ACTION:
            return self._action(body)
        if t == MsgType.NOSEC_ACTION:
            return self._nosec(body)
        return super().dispatch(src, t, body)

    def check_proofs(self, sub: msg.ActionSubmission) -> None:
        if len(sub.proofs) != 3:
            raise Rejected(Code.PROOF_FAIL, f"expected 3 proofs, got {len(sub.proofs)}")
        for i, p in enumerate(sub.proofs):
            pk = self.tee_keys.get((p.server, p.index))
            if p.server != sub.server or p.index != i or pk is None:
                raise Rejected(Code.PROOF_FAIL, f"proof {i} is not from TEE ({sub.server}, {i})")
            if not msg.verify_body(msg.AIN_DOMAIN, pk, sub.ain, p.sig):
                raise Rejected(Code.PROOF_FAIL, f"proof from TEE ({p.server}, {p.index}) does not verify")

    def _action(self, body: bytes) -> bytes:
        sub = msg.ActionSubmission.decode_body(body)
        if sub.server not in (0, 1) or sub.tee_index not in (0, 1, 2):
            raise Rejected(Code.MALFORMED, "server or TEE index out of range")
        if self.config.active:
            self.check_proofs(sub)
        elif sub.proofs:
            raise Rejected(Code.MALFORMED, "unexpected proofs")
        ain = msg.ActionRequest.decode(sub.ain)
        if ain.rid in self.rids:
            raise Rejected(Code.REPLAY, "request id already executed")
        self.resolve(ain.c_at, sub.chain)
        with self._lock:
            key = (ain.action_endpoint, ain.c_at)
            other = self.pending.pop(key, None)
            if other is None:
                self.pending[key] = _Pending(sub, ain, self.tick)
                return msg.ok(b"\x00")
        if other.sub.server == sub.server:
            raise Rejected(Code.MISMATCH, "both halves from the same server")
        if other.ain.rid != ain.rid or other.sub.tee_index != sub.tee_index:
            raise Rejected(Code.MISMATCH, "halves disagree on request id or TEE index")
        if not self.rids.add(ain.rid):
            raise Rejected(Code.REPLAY, "request id already executed")
        pair = {other.sub.server: (other.sub, other.ain), sub.server: (sub, ain)}
        (s0, a0), (s1, a1) = pair[0], pair[1]
        if a0.c_at != a1.c_at or a0.action_endpoint != a1.action_endpoint:
            raise Rejected(Code.MISMATCH, "halves address different actions")
        fn = self.endpoints.get(a0.action_endpoint)
        if fn is None:
            raise Rejected(Code.MALFORMED, f"unknown endpoint {a0.action_endpoint!r}")
        if set(a0.shares) != set(a1.shares):
            raise Rejected(Code.MALFORMED, "halves carry different keys")
        try:
            act_inp = {k: reconstruct_value(a0.shares[k], a1.shares[k]) for k in a0.shares}
        except BlockError as exc:
            raise Rejected(Code.MALFORMED, str(exc)) from exc
        self.outbox.append(effect_bytes(a0.action_endpoint, fn(act_inp)))
        return msg.ok(b"\x01")

    def expire_pending(self, max_age: int = 0) -> list[bytes]:
        """Drop halves whose partner never arrived; returns their request ids."""
        dropped = []
        for key, p in list(self.pending.items()):
            if self.tick - p.arrival >= max_age:
                del self.pending[key]
                dropped.append(p.ain.rid)
        self.timeouts.extend(dropped)
        return dropped

    def _nosec(self, body: bytes) -> bytes:
        req = msg.read_json(body)
        try:
            fn = self.endpoints[req["endpoint"]]
            self.tokens.check(bytes.fromhex(req["token"]), "access", self.clock.epoch)
        except KeyError as exc:
            raise Rejected(Code.MALFORMED, "unknown endpoint") from exc
        except ChainError as exc:
            raise Rejected(int(exc.code), str(exc)) from exc
        self.outbox.append(effect_bytes(req["endpoint"], fn(req["act_inp"])))
        return msg.ok(b"\x01")
