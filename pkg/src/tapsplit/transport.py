"""Deterministic in-process transport with byte and CPU accounting.

Every party registers a handler.  :meth:`Network.request` delivers a message
and returns the handler's reply (both directions are metered);
:meth:`Network.post` is one-way; :meth:`Network.send` is a bare metered link
used for garbled-circuit frames between two parties that drive each other
directly.

Meters are kept per directed channel and per ``(phase, src, dst)``, so a
report can say how many bytes crossed between the two servers during action
generation.  Interceptors see every envelope before delivery and can rewrite
or drop it; that is how faults are injected.

CPU is attributed to whichever party is currently handling a message.  The
modeled clock prices each primitive operation from a fixed table, which makes
reports reproducible bit for bit; the measured clock uses process time.
"""

from __future__ import annotations

import time
from collections import Counter, defaultdict
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field

from tapsplit.metering import MODELED_COST, accounting

Handler = Callable[[str, bytes], "bytes | None"]

SERVER_OF = {"M0": 0, "M1": 1, **{f"T{b}.{i}": b for b in (0, 1) for i in range(3)}}
PLATFORM_PARTIES = frozenset(SERVER_OF)


def server_of(party: str) -> int | None:
    return SERVER_OF.get(party)


class TransportError(RuntimeError):
    pass


class Dropped(TransportError):
    pass


@dataclass
class ChannelMeter:
    bytes: int = 0
    messages: int = 0

    def add(self, n: int) -> None:
        self.bytes += n
        self.messages += 1


@dataclass
class Envelope:
    phase: str
    src: str
    dst: str
    kind: str  # request, reply, post, send
    data: bytes
    spans: list[tuple[str, int, int]] = field(default_factory=list)
    seq: int = 0


Interceptor = Callable[[Envelope], "bytes | None"]


class Network:
    def __init__(self, *, clock: str = "modeled", record: bool = True):
        if clock not in ("modeled", "measured"):
            raise ValueError(f"unknown clock {clock!r}")
        self.clock = clock
        self.record = record
        self.handlers: dict[str, Handler] = {}
        self.meters: dict[tuple[str, str], ChannelMeter] = defaultdict(ChannelMeter)
        self.phase_meters: dict[tuple[str, str, str], ChannelMeter] = defaultdict(ChannelMeter)
        self.transcript: list[Envelope] = []
        self.interceptors: list[Interceptor] = []
        self.cpu: dict[str, float] = defaultdict(float)
        self.ops: dict[str, Counter] = defaultdict(Counter)
        self.current_phase = "setup"
        self._stack: list[str] = []
        self._mark = 0.0
        self._seq = 0

    # -- registration and phases ------------------------------------------------

    def register(self, party: str, handler: Handler) -> None:
        self.handlers[party] = handler

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        prev, self.current_phase = self.current_phase, name
        try:
            yield
        finally:
            self.current_phase = prev

    # -- CPU accounting ---------------------------------------------------------

    def _charge(self, op: str, amount: int) -> None:
        party = self._stack[-1] if self._stack else "harness"
        self.ops[party][op] += amount
        if self.clock == "modeled":
            self.cpu[party] += MODELED_COST.get(op, 0.0) * amount

    @contextmanager
    def running(self, party: str) -> Iterator[None]:
        """Attribute work done inside the block to ``party``."""
        now = time.process_time()
        if self._stack and self.clock == "measured":
            self.cpu[self._stack[-1]] += now - self._mark
        self._stack.append(party)
        self._mark = now
        self._charge("message", 1)
        try:
            with accounting(self._charge):
                yield
        finally:
            now = time.process_time()
            if self.clock == "measured":
                self.cpu[party] += now - self._mark
            self._stack.pop()
            self._mark = now

    # -- delivery ---------------------------------------------------------------

    def _deliver(self, src: str, dst: str, kind: str, data: bytes, spans) -> bytes:
        self._seq += 1
        env = Envelope(self.current_phase, src, dst, kind, bytes(data), list(spans or ()), self._seq)
        for icpt in list(self.interceptors):
            out = icpt(env)
            if out is None:
                raise Dropped(f"{kind} {src}->{dst} dropped")
            env.data = bytes(out)
        self.meters[(src, dst)].add(len(env.data))
        self.phase_meters[(env.phase, src, dst)].add(len(env.data))
        if self.record:
            self.transcript.append(env)
        return env.data

    def _handler(self, dst: str) -> Handler:
        try:
            return self.handlers[dst]
        except KeyError:
            raise TransportError(f"no party {dst!r}") from None

    def request(self, src: str, dst: str, data: bytes, spans=None) -> bytes:
        handler = self._handler(dst)
        delivered = self._deliver(src, dst, "request", data, spans)
        with self.running(dst):
            reply = handler(src, delivered)
        if reply is None:
            raise TransportError(f"{dst} sent no reply")
        if isinstance(reply, tuple):
            reply, reply_spans = reply
        else:
            reply_spans = None
        return self._deliver(dst, src, "reply", reply, reply_spans)

    def post(self, src: str, dst: str, data: bytes, spans=None) -> None:
        handler = self._handler(dst)
        delivered = self._deliver(src, dst, "post", data, spans)
        with self.running(dst):
            handler(src, delivered)

    def send(self, src: str, dst: str, data: bytes) -> bytes:
        return self._deliver(src, dst, "send", data, None)

    # -- summaries --------------------------------------------------------------

    @property
    def total_bytes(self) -> int:
        return sum(m.bytes for m in self.meters.values())

    def bytes_where(self, pred: Callable[[str, str, str], bool]) -> int:
        return sum(m.bytes for (ph, s, d), m in self.phase_meters.items() if pred(ph, s, d))

    def inter_server_bytes(self, phase: str | None = None) -> int:
        def cross(ph, s, d):
            bs, bd = server_of(s), server_of(d)
            return (phase is None or ph == phase) and bs is not None and bd is not None and bs != bd

        return self.bytes_where(cross)

    def platform_bytes(self, *, exclude_phases: tuple[str, ...] = ("setup",)) -> int:
        """Bytes sent or received by any platform machine or TEE."""
        return self.bytes_where(
            lambda ph, s, d: ph not in exclude_phases and (s in PLATFORM_PARTIES or d in PLATFORM_PARTIES)
        )

    def channel_bytes(self, src: str, dst: str, phase: str | None = None) -> int:
        return self.bytes_where(lambda ph, s, d: s == src and d == dst and (phase is None or ph == phase))

    def reset_meters(self) -> None:
        self.meters.clear()
        self.phase_meters.clear()
        self.transcript.clear()
        self.cpu.clear()
        self.ops.clear()
