"""The two-server platform: client setup, machines, TEEs and the applet cycle.

Server ``b`` runs an untrusted machine ``M_b`` and, when integrity is on,
three TEEs ``T_b.0..2`` from different vendors.  Everything talks through the
metered :class:`~tapsplit.transport.Network`; a cycle is refresh (token
chains only), poll, generate, action.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

from tapsplit import crypto
from tapsplit import messages as msg
from tapsplit.blocks import DEFAULT_POLICY, PaddingPolicy, share_value
from tapsplit.crypto import KeyPair, Rng
from tapsplit.filtercode import FilterCode, FilterCodeError, FilterKind
from tapsplit.messages import Code, MsgType, Rejected
from tapsplit.oauth_chain import EpochClock, TokenStore
from tapsplit.services import ActionService, EmailAction, Outbox, RidStore, ServiceConfig, TriggerService, WeatherTrigger
from tapsplit.stringsub import KeyedShareMap, string_sub
from tapsplit.transport import Dropped, Network
from tapsplit.wire import DecodeError, Reader, Writer
from tapsplit.yao.filters import CompiledFilter, compile_generate
from tapsplit.yao.protocol import Evaluator, Garbler, ProtocolAbort, session_id

VENDORS = ("TEE-A", "TEE-B", "TEE-C")
TEES_PER_SERVER = len(VENDORS)


@dataclass(frozen=True)
class Variant:
    name: str
    confidential: bool
    string_sub: bool
    integrity: bool
    chains: bool


# Each rung adds one mechanism to the one before it.
VARIANTS = {
    "nosec": Variant("NoSec", False, False, False, False),
    "w-yao": Variant("W-Yao", True, False, False, False),
    "w-c": Variant("W-C", True, True, False, False),
    "w-i": Variant("W-I", True, True, True, False),
    "w": Variant("W", True, True, True, True),
}


def get_variant(name: str | Variant) -> Variant:
    if isinstance(name, Variant):
        return name
    try:
        return VARIANTS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; choose from {', '.join(VARIANTS)}") from None


class PlatformError(RuntimeError):
    pass


# -- applets ---------------------------------------------------------------------


@dataclass
class AppletSpec:
    applet_id: str
    trigger_endpoint: str
    trig_inp: dict[str, str]
    action_endpoint: str
    templates: dict[str, str]
    fc: FilterCode
    title: str = ""

    def __post_init__(self):
        reserved = set(self.fc.case_keys()) if self.fc.kind is FilterKind.CUSTOM_SELECT else set()
        if self.fc.kind is not FilterKind.STRING_SUB:
            reserved.add(self.fc.output_key)
        clash = reserved & set(self.templates)
        if clash:
            raise FilterCodeError(f"templates use keys owned by the filter code: {sorted(clash)}")

    def all_templates(self) -> dict[str, str]:
        """Every actInp template the client shares, including filter-owned ones."""
        out = dict(self.templates)
        if self.fc.kind is FilterKind.PASS_AROUND:
            out[self.fc.output_key] = "{{" + self.fc.key + "}}"
        elif self.fc.kind is FilterKind.CUSTOM_SELECT:
            out.update(self.fc.case_templates())
        return out

    def output_keys(self) -> list[str]:
        keys = set(self.templates)
        if self.fc.kind is not FilterKind.STRING_SUB:
            keys.add(self.fc.output_key)
        return sorted(keys)

    def to_json(self) -> dict:
        return {
            "applet_id": self.applet_id,
            "title": self.title,
            "trigger": {"endpoint": self.trigger_endpoint, "input": self.trig_inp},
            "action": {"endpoint": self.action_endpoint, "templates": self.templates},
            "filter": self.fc.to_json(),
        }

    @classmethod
    def from_json(cls, d: Mapping) -> AppletSpec:
        return cls(
            applet_id=d["applet_id"],
            title=d.get("title", ""),
            trigger_endpoint=d["trigger"]["endpoint"],
            trig_inp=dict(d["trigger"].get("input", {})),
            action_endpoint=d["action"]["endpoint"],
            templates=dict(d["action"].get("templates", {})),
            fc=FilterCode.from_json(d["filter"]),
        )


@dataclass(frozen=True)
class AppletShare:
    """``App_b``: what server ``b`` stores for one applet."""

    applet_id: str
    t_body: bytes
    sig_t: bytes
    pk_ts: bytes
    action_endpoint: str
    c_at_as: bytes
    sh_act_inp: KeyedShareMap
    fc: FilterCode
    chain_ts: bytes = b""
    chain_as: bytes = b""
    c_rt_ts: bytes = b""  # refresh tokens and the mask key live on server 0 only
    c_rt_as: bytes = b""
    mask_key: bytes = b""

    @property
    def trigger(self) -> msg.TriggerRequest:
        return msg.TriggerRequest.decode(self.t_body)

    def encode(self) -> bytes:
        w = Writer()
        w.text(self.applet_id).blob(self.t_body).blob(self.sig_t).blob(self.pk_ts)
        w.text(self.action_endpoint).blob(self.c_at_as)
        self.sh_act_inp.write(w)
        w.blob(self.fc.encode()).blob(self.chain_ts).blob(self.chain_as)
        w.blob(self.c_rt_ts).blob(self.c_rt_as).blob(self.mask_key)
        return w.getvalue()

    @classmethod
    def decode(cls, data: bytes) -> AppletShare:
        r = Reader(data)
        head = (r.text(), r.blob(), r.blob(), r.blob(), r.text(), r.blob())
        shares = KeyedShareMap.read(r)
        fc = FilterCode.decode(r.blob())
        tail = (r.blob(), r.blob(), r.blob(), r.blob(), r.blob())
        r.done()
        return cls(*head, shares, fc, *tail)


@dataclass(frozen=True)
class TeeIdentity:
    server: int
    index: int
    vendor: str
    keys: KeyPair

    @property
    def name(self) -> str:
        return tee_name(self.server, self.index)


def tee_name(b: int, i: int) -> str:
    return f"T{b}.{i}"


# -- action generation -------------------------------------------------------------


def output_mask(mask_key: bytes, rid: bytes, n: int) -> bytes:
    """Garbler output mask, a PRF of the request id so all TEE pairs agree."""
    return hashlib.shake_256(b"tapsplit/mask" + mask_key + rid).digest(n)


class Generator:
    """GenerateAI for one party: local substitution plus an optional Yao session."""

    def __init__(self, variant: Variant, policy: PaddingPolicy):
        self.variant = variant
        self.policy = policy
        self._circuits: dict[tuple, CompiledFilter] = {}

    def yao_keys(self, app: AppletShare) -> list[str]:
        case = set(app.fc.case_keys()) if app.fc.kind is FilterKind.CUSTOM_SELECT else set()
        if not self.variant.string_sub:
            keys = {k for k in app.sh_act_inp if k not in case}
            if app.fc.kind is FilterKind.CUSTOM_SELECT:
                keys.add(app.fc.output_key)
            return sorted(keys)
        return [app.fc.output_key] if app.fc.kind is FilterKind.CUSTOM_SELECT else []

    def local_keys(self, app: AppletShare) -> list[str]:
        case = set(app.fc.case_keys()) if app.fc.kind is FilterKind.CUSTOM_SELECT else set()
        yao = set(self.yao_keys(app))
        return sorted(k for k in app.sh_act_inp if k not in case and k not in yao)

    def circuit(self, app: AppletShare, sh_trig: Mapping, keys: list[str]) -> CompiledFilter:
        shape = tuple(
            (src, k, tuple((blk.kind, len(blk.data)) for blk in vec))
            for src, m in (("t", sh_trig), ("a", app.sh_act_inp))
            for k, vec in sorted(m.items())
        )
        key = (app.applet_id, tuple(keys), shape)
        if key not in self._circuits:
            if len(self._circuits) > 256:
                self._circuits.clear()
            self._circuits[key] = compile_generate(app.fc, sh_trig, app.sh_act_inp, keys=keys, policy=self.policy)
        return self._circuits[key]

    def generate(self, app: AppletShare, tout: msg.TriggerOutput, yao) -> KeyedShareMap:
        """``yao(compiled, party_input, session_tag) -> share bytes`` runs this side's half."""
        sh_trig = tout.shares
        out = dict(string_sub(sh_trig, {k: app.sh_act_inp[k] for k in self.local_keys(app)}))
        keys = self.yao_keys(app)
        if keys:
            compiled = self.circuit(app, sh_trig, keys)
            share = yao(compiled, compiled.party_input(sh_trig, app.sh_act_inp))
            out.update(compiled.split_output(share))
        return KeyedShareMap(out)


def _yao_session(app: AppletShare, rid: bytes, tee_index: int) -> bytes:
    return session_id(app.applet_id.encode(), rid, bytes([tee_index]))


def _guard(fn):
    """Handler wrapper: protocol failures become one-byte error replies."""

    def handler(src: str, data: bytes):
        try:
            return fn(src, data)
        except Rejected as exc:
            return msg.error(exc.code)
        except (ProtocolAbort, DecodeError, ValueError, KeyError) as exc:
            return msg.error(Code.MALFORMED)

    return handler


# -- TEEs ------------------------------------------------------------------------------


class Tee:
    """A TEE: reachable only through its message interface."""

    def __init__(self, ident: TeeIdentity, deployment: Deployment):
        self.ident = ident
        self.dep = deployment
        self.name = ident.name
        self.apps: dict[str, AppletShare] = {}
        self.generator = Generator(deployment.variant, deployment.policy)
        rng = deployment.rng.child()
        self.garbler = Garbler(self.name, rng=rng) if ident.server == 0 else None
        self.evaluator = Evaluator(self.name, rng=rng) if ident.server == 1 else None
        self.rejections: list[Rejected] = []
        deployment.net.register(self.name, _guard(self.handle))

    @property
    def public_key(self) -> bytes:
        return self.ident.keys.public_key

    def reject(self, code: Code, why: str) -> Rejected:
        exc = Rejected(code, why, self.name)
        self.rejections.append(exc)
        return exc

    def handle(self, src: str, data: bytes) -> bytes:
        t, body = msg.split_type(data)
        if t == MsgType.INSTALL:
            applet_id, app = msg.read_install(body)
            self.apps[applet_id] = AppletShare.decode(app)
            return msg.ok()
        if t == MsgType.TEE_GENERATE:
            return self._generate(body)
        if t == MsgType.YAO and self.garbler is not None:
            _, frame = msg.read_yao(body)
            return msg.ok(self.garbler.handle(frame))
        raise self.reject(Code.MALFORMED, f"unexpected message type {t}")

    def _generate(self, body: bytes) -> bytes:
        try:
            applet_id, signed = msg.read_tee_generate(body)
            tout_body, sig = msg.read_signed(signed)
        except Rejected as exc:
            raise self.reject(exc.code, "generate request does not parse") from exc
        app = self.apps.get(applet_id)
        if app is None:
            raise self.reject(Code.MISMATCH, f"applet {applet_id!r} not installed here")
        if not msg.verify_body(msg.TOUT_DOMAIN, app.pk_ts, tout_body, sig):
            raise self.reject(Code.BAD_SIGNATURE, "trigger output not signed by the trigger service")
        try:
            tout = msg.TriggerOutput.decode(tout_body)
        except Rejected as exc:
            raise self.reject(exc.code, "trigger output does not parse") from exc
        if tout.tid != app.trigger.tid:
            raise self.reject(Code.MISMATCH, "trigger output belongs to another applet")
        i = self.ident.index
        session = _yao_session(app, tout.rid, i)

        def yao(compiled: CompiledFilter, party_input: bytes) -> bytes:
            n = len(compiled.circuit.outputs) // 8
            if self.garbler is not None:
                mask = output_mask(app.mask_key, tout.rid, n)
                self.garbler.prepare(session, compiled.circuit, party_input, mask)
                return mask

            def call(frame: bytes) -> bytes:
                reply = self.dep.net.request(self.name, f"M{self.ident.server}", msg.yao_message(i, frame))
                return msg.parse_reply(reply, f"M{self.ident.server}")

            return self.evaluator.run(session, compiled.circuit, party_input, call)

        shares = self.generator.generate(app, tout, yao)
        ain = msg.ActionRequest(tout.rid, app.action_endpoint, app.c_at_as, shares).encode()
        proof = msg.TeeProof(self.ident.server, i, msg.sign_body(msg.AIN_DOMAIN, self.ident.keys, ain))
        return msg.ok(msg.generate_reply(ain, proof))


# -- untrusted machines ------------------------------------------------------------------


@dataclass
class Pending:
    tout: bytes = b""  # [tout blob][sig blob], as signed by the trigger service
    ain: bytes = b""
    proofs: tuple[msg.TeeProof, ...] = ()


class Machine:
    def __init__(self, b: int, deployment: Deployment, store_dir: Path | None = None):
        self.b = b
        self.name = f"M{b}"
        self.dep = deployment
        self.net = deployment.net
        self.store_dir = store_dir
        self.apps: dict[str, AppletShare] = {}
        self.nosec_apps: dict[str, dict] = {}
        self.by_tid: dict[bytes, str] = {}
        self.pending: dict[str, Pending] = {}
        self.chains: dict[str, dict[str, bytes]] = {}
        self.tokens: dict[str, dict[str, tuple[bytes, bytes]]] = {}  # M0: current (c_at, c_rt) per service
        self.generator = Generator(deployment.variant, deployment.policy)
        rng = deployment.rng.child()
        self.garbler = Garbler(self.name, rng=rng) if b == 0 else None
        self.evaluator = Evaluator(self.name, rng=rng) if b == 1 else None
        self.net.register(self.name, _guard(self.handle))

    # -- message handling ------------------------------------------------------

    def handle(self, src: str, data: bytes) -> bytes:
        t, body = msg.split_type(data)
        if t == MsgType.INSTALL:
            applet_id, app = msg.read_install(body)
            self.install(applet_id, app)
            return msg.ok()
        if t == MsgType.TOUT:
            # routing header is the TID; the signed part is passed on untouched
            r = Reader(body)
            tid = r.raw(msg.ID_BYTES)
            applet_id = self.by_tid.get(tid)
            if applet_id is None:
                raise Rejected(Code.MISMATCH, "no applet for trigger id")
            self.pending.setdefault(applet_id, Pending()).tout = body[msg.ID_BYTES:]
            return msg.ok()
        if t == MsgType.CHAIN_UPDATE:
            tag, service, chain = msg.read_chain_update(body)
            if tag in self.chains:
                self.chains[tag][service] = chain
            return msg.ok()
        if t == MsgType.YAO:
            tee_index, frame = msg.read_yao(body)
            if self.b == 1:
                return self.net.request(self.name, "M0", data)
            if tee_index == msg.NO_TEE:
                return msg.ok(self.garbler.handle(frame))
            if tee_index >= TEES_PER_SERVER:
                raise Rejected(Code.MALFORMED, "no such TEE")
            return self.net.request(self.name, tee_name(0, tee_index), data)
        raise Rejected(Code.MALFORMED, f"unexpected message type {t}")

    def install(self, applet_id: str, data: bytes) -> None:
        if not self.dep.variant.confidential:
            self.nosec_apps[applet_id] = json.loads(data)
        else:
            app = AppletShare.decode(data)
            self.apps[applet_id] = app
            self.by_tid[app.trigger.tid] = applet_id
            self.chains[applet_id] = {"TS": app.chain_ts, "AS": app.chain_as}
            if self.b == 0:
                self.tokens[applet_id] = {"TS": (app.trigger.c_at, app.c_rt_ts), "AS": (app.c_at_as, app.c_rt_as)}
        if self.store_dir is not None:
            self.store_dir.mkdir(parents=True, exist_ok=True)
            (self.store_dir / f"{applet_id}.app").write_bytes(data)

    def call(self, dst: str, data: bytes, spans=None) -> bytes:
        return msg.parse_reply(self.net.request(self.name, dst, data, spans), dst)

    # -- cycle steps -------------------------------------------------------------

    def refresh(self, applet_id: str) -> int:
        """Server 0 only: advance every stale chain; returns how many were refreshed."""
        done = 0
        for service in ("TS", "AS"):
            chain = self.chains[applet_id][service]
            if not chain:
                continue
            epoch = int.from_bytes(chain[-4:], "big")
            if epoch >= self.dep.clock.epoch:
                continue
            c_at, c_rt = self.tokens[applet_id][service]
            w = msg.RefreshRequest(applet_id, c_at, c_rt, chain).writer()
            reply = msg.RefreshReply.decode(self.call(service, w.getvalue(), w.spans))
            self.tokens[applet_id][service] = (reply.c_at, reply.c_rt)
            self.chains[applet_id][service] = reply.chain
            done += 1
        return done

    def poll(self, applet_id: str) -> None:
        if not self.dep.variant.confidential:
            a = self.nosec_apps[applet_id]
            req = {"endpoint": a["trigger_endpoint"], "token": a["at_ts"], "trig_inp": a["trig_inp"]}
            self.pending[applet_id] = Pending(tout=self.call("TS", msg.json_message(MsgType.NOSEC_TRIGGER, req)))
            return
        app = self.apps[applet_id]
        w = msg.trigger_message(app.t_body, app.sig_t, self.chains[applet_id]["TS"])
        self.pending.setdefault(applet_id, Pending()).tout = self.call("TS", w.getvalue(), w.spans)

    def generate(self, applet_id: str) -> None:
        p = self.pending.get(applet_id)
        if p is None or not p.tout:
            raise PlatformError(f"{self.name}: no trigger output for {applet_id}")
        if not self.dep.variant.confidential:
            a = self.nosec_apps[applet_id]
            fc = FilterCode.from_json(a["filter"])
            p.ain = msg.canonical_json(fc.evaluate(a["templates"], json.loads(p.tout)))
            return
        app = self.apps[applet_id]
        if self.dep.variant.integrity:
            replies = []
            for i in range(TEES_PER_SERVER):
                w = msg.tee_generate(applet_id, p.tout)
                replies.append(msg.read_generate_reply(self.call(tee_name(self.b, i), w.getvalue(), w.spans)))
            p.ain = replies[self.dep.forward_index][0]
            p.proofs = tuple(proof for _, proof in replies)
            return
        tout_body, _ = msg.read_signed(p.tout)
        tout = msg.TriggerOutput.decode(tout_body)
        session = _yao_session(app, tout.rid, msg.NO_TEE)

        def yao(compiled: CompiledFilter, party_input: bytes) -> bytes:
            if self.garbler is not None:
                mask = output_mask(app.mask_key, tout.rid, len(compiled.circuit.outputs) // 8)
                self.garbler.prepare(session, compiled.circuit, party_input, mask)
                return mask
            call = lambda frame: self.call("M0", msg.yao_message(msg.NO_TEE, frame))  # noqa: E731
            return self.evaluator.run(session, compiled.circuit, party_input, call)

        shares = self.generator.generate(app, tout, yao)
        p.ain = msg.ActionRequest(tout.rid, app.action_endpoint, app.c_at_as, shares).encode()

    def submission(self, applet_id: str) -> Writer:
        p = self.pending[applet_id]
        if not self.dep.variant.confidential:
            a = self.nosec_apps[applet_id]
            req = {"endpoint": a["action_endpoint"], "token": a["at_as"], "act_inp": json.loads(p.ain)}
            w = Writer().raw(msg.json_message(MsgType.NOSEC_ACTION, req))
            return w
        sub = msg.ActionSubmission(self.b, self.dep.forward_index, p.ain, p.proofs, self.chains[applet_id]["AS"])
        return sub.writer()

    def submit(self, applet_id: str) -> bool:
        """Send this server's half; True if the action executed on this call."""
        w = self.submission(applet_id)
        try:
            return self.call("AS", w.getvalue(), w.spans) == b"\x01"
        finally:
            self.pending.pop(applet_id, None)


# -- the client ---------------------------------------------------------------------------


class Client:
    """The user's device: encrypts, shares and installs an applet, then goes offline."""

    def __init__(self, deployment: Deployment, name: str = "user"):
        self.dep = deployment
        self.name = name
        self.rng = deployment.rng.child()
        deployment.net.register(name, lambda src, data: msg.ok())

    def setup_applet(self, spec: AppletSpec) -> tuple[bytes, bytes]:
        dep = self.dep
        ts, as_ = dep.ts, dep.as_
        at_ts, rt_ts, chain_ts = ts.issue_tokens(self.name)
        at_as, rt_as, chain_as = as_.issue_tokens(self.name)
        if not dep.variant.confidential:
            app = {
                "trigger_endpoint": spec.trigger_endpoint,
                "trig_inp": spec.trig_inp,
                "action_endpoint": spec.action_endpoint,
                "templates": spec.templates,
                "filter": spec.fc.to_json(),
                "at_ts": at_ts.hex(),
                "at_as": at_as.hex(),
            }
            data = msg.canonical_json(app)
            self._install(0, spec.applet_id, data)
            return data, b""

        enc = lambda pk, m: crypto.pk_encrypt(pk, m, self.rng).data  # noqa: E731
        t = msg.TriggerRequest(
            spec.trigger_endpoint,
            enc(ts.keys.public_key, at_ts),
            enc(ts.keys.public_key, msg.canonical_json(spec.trig_inp)),
            self.rng.bytes(msg.ID_BYTES),
        ).encode()
        sig_t = b""
        if dep.variant.integrity:
            reply = dep.net.request(self.name, "TS", bytes([MsgType.SIGN_T]) + t)
            sig_t = msg.parse_reply(reply, "TS")

        halves: list[dict] = [{}, {}]
        for key, template in spec.all_templates().items():
            halves[0][key], halves[1][key] = share_value(template, dep.policy, self.rng)
        c_at_as = enc(as_.keys.public_key, at_as)
        chains = (chain_ts.encode(), chain_as.encode()) if dep.variant.chains else (b"", b"")
        common = dict(
            applet_id=spec.applet_id,
            t_body=t,
            sig_t=sig_t,
            pk_ts=ts.keys.public_key,
            action_endpoint=spec.action_endpoint,
            c_at_as=c_at_as,
            fc=spec.fc.public_view(),
            chain_ts=chains[0],
            chain_as=chains[1],
        )
        app0 = AppletShare(
            **common,
            sh_act_inp=KeyedShareMap(halves[0]),
            c_rt_ts=enc(ts.keys.public_key, rt_ts),
            c_rt_as=enc(as_.keys.public_key, rt_as),
            mask_key=self.rng.bytes(32),
        ).encode()
        app1 = AppletShare(**common, sh_act_inp=KeyedShareMap(halves[1])).encode()
        for b, data in ((0, app0), (1, app1)):
            self._install(b, spec.applet_id, data)
        return app0, app1

    def _install(self, b: int, applet_id: str, data: bytes) -> None:
        m = msg.install_message(applet_id, data)
        targets = [f"M{b}"]
        if self.dep.variant.integrity:
            targets += [tee_name(b, i) for i in range(TEES_PER_SERVER)]
        for dst in targets:
            msg.parse_reply(self.dep.net.request(self.name, dst, m), dst)


# -- deployment ------------------------------------------------------------------------------


@dataclass
class CycleResult:
    applet_id: str
    executed: bool = False
    effects: list[bytes] = field(default_factory=list)
    abort: str = ""  # "", "rejected", "dropped", "timeout", "error"
    code: int | None = None
    party: str = ""
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.executed and not self.abort

    def to_json(self) -> dict:
        return {
            "applet_id": self.applet_id,
            "executed": self.executed,
            "effects": [e.decode() for e in self.effects],
            "abort": self.abort,
            "code": self.code,
            "party": self.party,
            "detail": self.detail,
        }


class Deployment:
    """One platform with its two services, wired onto a fresh network."""

    def __init__(
        self,
        variant: str | Variant = "w",
        *,
        seed: int | None = None,
        clock: str = "modeled",
        policy: PaddingPolicy = DEFAULT_POLICY,
        forward_index: int = 0,
        store_dir: str | Path | None = None,
        access_lifetime: int | None = None,
        refresh_lifetime: int | None = None,
    ):
        self.variant = get_variant(variant)
        if not 0 <= forward_index < TEES_PER_SERVER:
            raise ValueError("forward_index must name one of the three TEEs")
        self.rng = Rng(seed)
        self.net = Network(clock=clock)
        self.clock = EpochClock()
        self.policy = policy
        self.forward_index = forward_index
        store = Path(store_dir) if store_dir is not None else None
        if self.variant.chains:
            access_lifetime = 1 if access_lifetime is None else access_lifetime
            refresh_lifetime = 2 if refresh_lifetime is None else refresh_lifetime
        cfg = ServiceConfig(active=self.variant.integrity, chains=self.variant.chains, policy=policy)
        keys = lambda owner: crypto.generate_keypair(owner, self.rng)  # noqa: E731

        self.tee_ids = {}
        if self.variant.integrity:
            for b in (0, 1):
                for i, vendor in enumerate(VENDORS):
                    self.tee_ids[(b, i)] = TeeIdentity(b, i, vendor, keys(tee_name(b, i)))
        self.ts = TriggerService(
            "TS", keys("TS"), self.net, self.clock,
            tokens=TokenStore(access_lifetime, refresh_lifetime), config=cfg, rng=self.rng.child(),
        )
        self.outbox = Outbox(store / "outbox.jsonl" if store else None)
        self.as_ = ActionService(
            "AS", keys("AS"), self.net, self.clock,
            tokens=TokenStore(access_lifetime, refresh_lifetime), config=cfg, rng=self.rng.child(),
            tee_keys={bi: t.keys.public_key for bi, t in self.tee_ids.items()},
            rids=RidStore(store / "rids.bin" if store else None),
            outbox=self.outbox,
        )
        self.weather = WeatherTrigger()
        self.email = EmailAction(self.outbox)
        self.machines = [Machine(b, self, store / f"S{b}" if store else None) for b in (0, 1)]
        self.tees = {bi: Tee(ident, self) for bi, ident in self.tee_ids.items()}
        self.client = Client(self)
        self.specs: dict[str, AppletSpec] = {}
        self.app_sizes: dict[str, tuple[int, int]] = {}

    def install(self, spec: AppletSpec) -> tuple[bytes, bytes]:
        if spec.applet_id in self.specs:
            raise PlatformError(f"applet {spec.applet_id!r} already installed")
        self.ts.register_endpoint(spec.trigger_endpoint, self.weather)
        self.as_.register_endpoint(spec.action_endpoint, self.email)
        with self.net.phase("setup"), self.net.running(self.client.name):
            app0, app1 = self.client.setup_applet(spec)
        self.specs[spec.applet_id] = spec
        self.app_sizes[spec.applet_id] = (len(app0), len(app1))
        return app0, app1

    def run_cycle(self, applet_id: str) -> CycleResult:
        if applet_id not in self.specs:
            raise PlatformError(f"unknown applet {applet_id!r}")
        res = CycleResult(applet_id)
        before = len(self.outbox)
        m0, m1 = self.machines
        try:
            if self.variant.chains:
                with self.net.phase("refresh"), self.net.running("M0"):
                    m0.refresh(applet_id)
            with self.net.phase("poll"), self.net.running("M0"):
                m0.poll(applet_id)
            with self.net.phase("generate"):
                for m in (m0, m1) if self.variant.confidential else (m0,):
                    with self.net.running(m.name):
                        m.generate(applet_id)
            with self.net.phase("action"):
                dropped = None
                # each server submits on its own; a lost half does not stop the other
                for m in (m0, m1) if self.variant.confidential else (m0,):
                    try:
                        with self.net.running(m.name):
                            res.executed |= m.submit(applet_id)
                    except Dropped as exc:
                        dropped = exc
                if dropped is not None:
                    raise dropped
        except Rejected as exc:
            res.abort, res.code, res.party, res.detail = "rejected", int(exc.code), exc.party, str(exc)
        except Dropped as exc:
            res.abort, res.detail = "dropped", str(exc)
        except PlatformError as exc:
            res.abort, res.detail = "error", str(exc)
        finally:
            for m in self.machines:
                m.pending.pop(applet_id, None)
            timed_out = self.as_.expire_pending()
            if timed_out and res.abort in ("", "dropped"):
                # the partner half never arrived, so the action service gave up on it
                res.abort, res.party = "timeout", "AS"
        res.effects = self.outbox.entries[before:]
        return res
