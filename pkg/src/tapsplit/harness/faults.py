"""Fault injection against an active-mode deployment.

Faults are network interceptors (a tampering or dropping link, or a machine
deviating from the protocol on its own outgoing messages) plus replays of
recorded action submissions.  Every fault is checked for the one property
that matters: no action effect, and a rejection by the expected party with
the expected code.
"""

from __future__ import annotations

import random
from collections.abc import Callable
from dataclasses import dataclass, field

from tapsplit import crypto
from tapsplit import messages as msg
from tapsplit.blocks import ShareBlock, ShareVector
from tapsplit.harness.workloads import Workload, load_workload
from tapsplit.messages import Code
from tapsplit.platform import CycleResult, Deployment, get_variant
from tapsplit.stringsub import KeyedShareMap
from tapsplit.transport import Envelope


@dataclass(frozen=True)
class Target:
    """Where a tamper lands: one message, and the span prefixes inside it."""

    phase: str
    src: str
    dst: str
    prefixes: tuple[str, ...]
    code: Code  # for flips outside a length prefix
    party: str


TARGETS = {
    "T": Target("poll", "M0", "TS", ("T", "sig_T"), Code.BAD_SIGNATURE, "TS"),
    "chain": Target("poll", "M0", "TS", ("chain/ct", "chain/sig", "chain/epoch"), Code.BAD_SIGNATURE, "TS"),
    "chain_as": Target("action", "M0", "AS", ("chain/ct", "chain/sig", "chain/epoch"), Code.BAD_SIGNATURE, "AS"),
    "tout0": Target("poll", "TS", "M0", ("tout",), Code.BAD_SIGNATURE, "T0.0"),
    "tout1": Target("poll", "TS", "M1", ("tout",), Code.BAD_SIGNATURE, "T1.0"),
    "ain0": Target("action", "M0", "AS", ("ain",), Code.PROOF_FAIL, "AS"),
    "ain1": Target("action", "M1", "AS", ("ain",), Code.PROOF_FAIL, "AS"),
    "proof": Target("action", "M0", "AS", ("proof0", "proof1", "proof2"), Code.PROOF_FAIL, "AS"),
}

MALICIOUS_SCRIPTS = ("i", "ii", "iii", "iv", "v")


@dataclass
class FaultReport:
    fault: str
    expected_code: int | None
    expected_party: str
    code: int | None
    party: str
    abort: str
    effects: int
    detail: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def no_effect(self) -> bool:
        return self.effects == 0

    @property
    def passed(self) -> bool:
        if not self.no_effect:
            return False  # a fault that produced an effect is a security failure
        if self.expected_code is None:
            return self.abort in ("dropped", "timeout") or self.code is not None
        return self.code == self.expected_code and (not self.expected_party or self.party == self.expected_party)

    def to_json(self) -> dict:
        return {
            "fault": self.fault,
            "expected_code": self.expected_code,
            "expected_party": self.expected_party,
            "code": self.code,
            "party": self.party,
            "abort": self.abort,
            "effects": self.effects,
            "passed": self.passed,
            "detail": self.detail,
            **self.extra,
        }


# -- helpers --------------------------------------------------------------------


def innermost_span(spans, offset: int) -> str | None:
    best = None
    for name, a, b in spans:
        if a <= offset < b and (best is None or b - a < best[1]):
            best = (name, b - a)
    return best[0] if best else None


def expected_code_for(span: str, target: Target) -> Code:
    leaf = span.rsplit("/", 1)[-1]
    if leaf.endswith("#len") or leaf.endswith("#count") or leaf.endswith("#key"):
        return Code.MALFORMED
    return target.code


def _region(spans, prefixes) -> list[int]:
    offs = set()
    for name, a, b in spans:
        if any(name == p or name.startswith(p + "/") for p in prefixes):
            offs.update(range(a, b))
    return sorted(offs)


def fresh(variant: str = "w", workload: str | Workload = "string-sub", seed: int = 0, **kw) -> tuple[Deployment, Workload]:
    wl = workload if isinstance(workload, Workload) else load_workload(workload)
    dep = Deployment(get_variant(variant), seed=seed, **kw)
    dep.install(wl.spec)
    return dep, wl


def _cycle(dep: Deployment, wl: Workload, interceptor: Callable | None = None) -> CycleResult:
    if interceptor is not None:
        dep.net.interceptors.append(interceptor)
    try:
        return dep.run_cycle(wl.spec.applet_id)
    finally:
        if interceptor is not None:
            dep.net.interceptors.remove(interceptor)


def _report(name: str, res: CycleResult, code, party, **extra) -> FaultReport:
    return FaultReport(
        name, None if code is None else int(code), party, res.code, res.party, res.abort, len(res.effects), res.detail, extra
    )


# -- fault kinds ------------------------------------------------------------------


def tamper(dep: Deployment, wl: Workload, target: str, rnd: random.Random) -> FaultReport:
    """Flip one random byte inside ``target`` in transit."""
    t = TARGETS[target]
    seen: dict = {}

    def flip(env: Envelope):
        if seen or not (env.phase == t.phase and env.src == t.src and env.dst == t.dst):
            return env.data
        region = _region(env.spans, t.prefixes)
        if not region:
            return env.data
        off = rnd.choice(region)
        bit = 1 << rnd.randrange(8)
        seen.update(offset=off, span=innermost_span(env.spans, off), bit=bit)
        data = bytearray(env.data)
        data[off] ^= bit
        return bytes(data)

    res = _cycle(dep, wl, flip)
    if not seen:
        return _report(f"tamper:{target}", res, None, "", missed=True)
    code = expected_code_for(seen["span"], t)
    return _report(f"tamper:{target}", res, code, t.party, offset=seen["offset"], span=seen["span"])


def drop(dep: Deployment, wl: Workload, target: str) -> FaultReport:
    t = TARGETS[target]

    def dropper(env: Envelope):
        if env.phase == t.phase and env.src == t.src and env.dst == t.dst:
            return None
        return env.data

    return _report(f"drop:{target}", _cycle(dep, wl, dropper), None, "")


def capture_actions(dep: Deployment, since: int = 0) -> list[tuple[bytes, bytes]]:
    """(M0 half, M1 half) of every action submission recorded after ``since``."""
    sent = {}
    pairs = []
    for env in dep.net.transcript[since:]:
        if env.kind == "request" and env.dst == "AS" and env.phase == "action":
            sent[env.src] = env.data
            if len(sent) == 2:
                pairs.append((sent["M0"], sent["M1"]))
                sent = {}
    return pairs


def replay(dep: Deployment, wl: Workload) -> FaultReport:
    """Fire once, then resubmit both recorded halves verbatim."""
    mark = len(dep.net.transcript)
    first = _cycle(dep, wl)
    pairs = capture_actions(dep, mark)
    if not first.ok or not pairs:
        return _report("replay", first, Code.REPLAY, "AS", setup_failed=True)
    before = len(dep.outbox)
    codes = []
    with dep.net.phase("replay"):
        for src, data in zip(("M0", "M1"), pairs[-1]):
            with dep.net.running(src):
                reply = dep.net.request(src, "AS", data)
            try:
                msg.parse_reply(reply, "AS")
                codes.append(None)
            except msg.Rejected as exc:
                codes.append(int(exc.code))
    dep.as_.expire_pending()
    res = CycleResult(wl.spec.applet_id, effects=dep.outbox.entries[before:])
    bad = [c for c in codes if c != Code.REPLAY]
    res.abort, res.party = "rejected", "AS"
    res.code = int(Code.REPLAY) if not bad else (bad[0] if bad[0] is not None else -1)
    return _report("replay", res, Code.REPLAY, "AS", codes=codes)


def _rewrite_submission(env: Envelope, fn: Callable[[msg.ActionSubmission], msg.ActionSubmission]) -> bytes:
    sub = msg.ActionSubmission.decode_body(env.data[1:])
    return fn(sub).encode()


def proof_fault(dep: Deployment, wl: Workload, server: int, index: int, mode: str) -> FaultReport:
    """Remove TEE ``(server, index)``'s proof, or replace it with a non-TEE signature."""
    if mode not in ("remove", "forge"):
        raise ValueError("mode is 'remove' or 'forge'")
    rogue = crypto.generate_keypair("rogue", dep.rng.child())

    def edit(sub: msg.ActionSubmission) -> msg.ActionSubmission:
        proofs = list(sub.proofs)
        if mode == "remove":
            del proofs[index]
        else:
            proofs[index] = msg.TeeProof(server, index, msg.sign_body(msg.AIN_DOMAIN, rogue, sub.ain))
        return msg.ActionSubmission(sub.server, sub.tee_index, sub.ain, tuple(proofs), sub.chain)

    def icpt(env: Envelope):
        if env.phase == "action" and env.src == f"M{server}" and env.dst == "AS":
            return _rewrite_submission(env, edit)
        return env.data

    return _report(f"proof:{mode}:{server}.{index}", _cycle(dep, wl, icpt), Code.PROOF_FAIL, "AS")


def malicious(dep: Deployment, wl: Workload, script: str, rnd: random.Random) -> FaultReport:
    """A machine deviating from the protocol in one of five ways.

    i    M0 corrupts the trigger request before sending it
    ii   M0 alters trigger-output shares before handing them to its TEEs
    iii  M0 computes its action input itself and submits that
    iv   M0 rewrites the request id of the submission it sends
    v    M0 and M1 replay an earlier request to the action service
    """
    if script == "v":
        rep = replay(dep, wl)
        rep.fault = "malicious:v"
        return rep

    def flip_in(data: bytes, a: int, b: int) -> bytes:
        out = bytearray(data)
        out[rnd.randrange(a, b)] ^= 1 << rnd.randrange(8)
        return bytes(out)

    def span(env: Envelope, name: str) -> tuple[int, int]:
        for n, a, b in env.spans:
            if n == name:
                return a, b
        raise KeyError(name)

    def other_shares(shares: KeyedShareMap) -> KeyedShareMap:
        out = {}
        for k, vec in shares.items():
            blocks = [ShareBlock(blk.kind, bytes(x ^ 0x20 for x in blk.data)) for blk in vec]
            out[k] = ShareVector(tuple(blocks))
        return KeyedShareMap(out)

    if script == "i":
        code, party = Code.BAD_SIGNATURE, "TS"

        def icpt(env):
            if env.phase == "poll" and env.src == "M0" and env.dst == "TS":
                return flip_in(env.data, *span(env, "T"))
            return env.data

    elif script == "ii":
        code, party = Code.BAD_SIGNATURE, "T0.0"

        def icpt(env):
            if env.phase == "generate" and env.src == "M0" and env.dst.startswith("T0."):
                applet, signed = msg.read_tee_generate(env.data[1:])
                body, sig = msg.read_signed(signed)
                tout = msg.TriggerOutput.decode(body)
                forged = msg.TriggerOutput(tout.rid, tout.tid, other_shares(tout.shares)).encode()
                return msg.tee_generate(applet, msg.signed_blob(msg.Writer(), forged, sig, "tout").getvalue()).getvalue()
            return env.data

    elif script in ("iii", "iv"):
        code, party = Code.PROOF_FAIL, "AS"

        def edit(sub: msg.ActionSubmission) -> msg.ActionSubmission:
            ain = msg.ActionRequest.decode(sub.ain)
            if script == "iii":
                ain = msg.ActionRequest(ain.rid, ain.action_endpoint, ain.c_at, other_shares(ain.shares))
            else:
                ain = msg.ActionRequest(bytes(rnd.randrange(256) for _ in range(16)), ain.action_endpoint, ain.c_at, ain.shares)
            return msg.ActionSubmission(sub.server, sub.tee_index, ain.encode(), sub.proofs, sub.chain)

        def icpt(env):
            if env.phase == "action" and env.src == "M0" and env.dst == "AS":
                return _rewrite_submission(env, edit)
            return env.data

    else:
        raise ValueError(f"unknown script {script!r}; choose from {', '.join(MALICIOUS_SCRIPTS)}")
    return _report(f"malicious:{script}", _cycle(dep, wl, icpt), code, party)


def inject_fault(
    kind: str,
    target: str = "",
    *,
    variant: str = "w",
    workload: str | Workload = "string-sub",
    count: int = 1,
    seed: int = 0,
    deployment: Deployment | None = None,
) -> list[FaultReport]:
    """Run ``count`` faulted cycles and report each.

    kinds: ``tamper`` (target in :data:`TARGETS`), ``drop`` (same targets),
    ``replay``, ``proof`` (target ``remove:b.i`` or ``forge:b.i``),
    ``malicious`` (target ``i``..``v``).
    """
    if deployment is None:
        dep, wl = fresh(variant, workload, seed)
    else:
        dep, wl = deployment, workload if isinstance(workload, Workload) else load_workload(workload)
    if not dep.variant.integrity and kind in ("tamper", "proof", "malicious"):
        raise ValueError(f"{kind} faults need an active-mode variant")
    rnd = random.Random(f"fault/{kind}/{target}/{seed}")
    out = []
    for _ in range(count):
        dep.weather.weather = rnd.choice(wl.value_pool or ["sunny"])
        if kind == "tamper":
            out.append(tamper(dep, wl, target, rnd))
        elif kind == "drop":
            out.append(drop(dep, wl, target))
        elif kind == "replay":
            out.append(replay(dep, wl))
        elif kind == "proof":
            mode, _, who = target.partition(":")
            b, _, i = who.partition(".")
            out.append(proof_fault(dep, wl, int(b), int(i), mode))
        elif kind == "malicious":
            out.append(malicious(dep, wl, target, rnd))
        else:
            raise ValueError(f"unknown fault kind {kind!r}")
    return out
