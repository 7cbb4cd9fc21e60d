"""Two-party evaluation of a garbled circuit over an accounted link.

Frame layout: ``[session id:16][phase:1][payload length:4][payload]``.
"""

from __future__ import annotations

import hashlib
import struct
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from tapsplit.crypto import Rng, default_rng
from tapsplit.kernels import bits_to_bytes, bytes_to_bits
from tapsplit.wire import DecodeError, Reader, Writer
from tapsplit.yao import hashing
from tapsplit.yao.circuit import Circuit, CircuitError
from tapsplit.yao.garble import (
    LABEL_BYTES,
    GarbledCircuit,
    GarblerSecrets,
    decode_outputs,
    evaluate_garbled,
    garble,
)
from tapsplit.yao.ot import ExtReceiver, ExtSender

PHASE_BASE_A = 1
PHASE_BASE_B = 2
PHASE_BASE_E = 3
PHASE_CIRCUIT = 4
PHASE_OT_U = 5
PHASE_OT_Y = 6

HEADER = struct.Struct(">16sBI")


class ProtocolAbort(RuntimeError):
    pass


class Link(Protocol):
    def send(self, src: str, dst: str, data: bytes) -> bytes: ...


@dataclass
class LocalLink:
    """Loopback link that just counts bytes per direction."""

    sent: dict[tuple[str, str], int] = field(default_factory=dict)
    messages: int = 0

    def send(self, src: str, dst: str, data: bytes) -> bytes:
        self.sent[(src, dst)] = self.sent.get((src, dst), 0) + len(data)
        self.messages += 1
        return data

    @property
    def total(self) -> int:
        return sum(self.sent.values())


def frame(session: bytes, phase: int, payload: bytes) -> bytes:
    return HEADER.pack(session, phase, len(payload)) + payload


def unframe(data: bytes, session: bytes, phase: int) -> bytes:
    if len(data) < HEADER.size:
        raise ProtocolAbort("short frame")
    sid, ph, n = HEADER.unpack_from(data)
    if sid != session or ph != phase or n != len(data) - HEADER.size:
        raise ProtocolAbort(f"unexpected frame (phase {ph}, wanted {phase})")
    return data[HEADER.size:]


class Garbler:
    """Garbler side of a session dialogue.

    The evaluator drives: it sends one request frame per step and
    :meth:`handle` answers it.  Sessions are registered with :meth:`prepare`
    before the evaluator starts.
    """

    def __init__(self, name: str = "garbler", ot: ExtSender | None = None, rng: Rng | None = None, *, free_xor: bool = True):
        self.name = name
        self.rng = rng or default_rng()
        self.ot = ot or ExtSender(self.rng.child())
        self.free_xor = free_xor
        self._sessions: dict[bytes, tuple[Circuit, np.ndarray, GarblerSecrets | None]] = {}

    def prepare(self, session: bytes, c: Circuit, garbler_input: bytes, mask: bytes) -> None:
        bits = np.concatenate([bytes_to_bits(garbler_input), bytes_to_bits(mask)])
        data_wires, mask_wires = c.data_inputs, c.mask_inputs
        if len(bits) != len(data_wires) + len(mask_wires):
            raise CircuitError("garbler input width does not match circuit")
        values = np.zeros(c.n_wires, dtype=np.uint8)
        values[np.concatenate([data_wires, mask_wires]).astype(np.int64)] = bits
        values[c.const_wires.astype(np.int64)] = c.const_values
        self._sessions[session] = (c, values, None)

    def handle(self, data: bytes) -> bytes:
        if len(data) < HEADER.size:
            raise ProtocolAbort("short frame")
        session, phase, _ = HEADER.unpack_from(data)
        payload = unframe(data, session, phase)
        if phase == PHASE_BASE_A:
            return frame(session, PHASE_BASE_B, self.ot.base_respond(payload))
        if phase == PHASE_BASE_E:
            self.ot.base_finish(payload)
            return frame(session, PHASE_BASE_E, b"")
        if session not in self._sessions:
            raise ProtocolAbort("unknown session")
        c, values, secrets = self._sessions[session]
        if phase == PHASE_CIRCUIT and secrets is None:
            gc, secrets = garble(c, self.rng, free_xor=self.free_xor)
            self._sessions[session] = (c, values, secrets)
            wires = np.concatenate([c.garbler_inputs, c.const_wires]).astype(np.int64)
            labels = hashing.to_bytes(secrets.select(wires, values[wires]))
            w = Writer()
            w.blob(gc.tables).blob(gc.decode_bits).u8(int(gc.free_xor)).blob(labels)
            return frame(session, PHASE_CIRCUIT, w.getvalue())
        if phase == PHASE_OT_U and secrets is not None:
            del self._sessions[session]
            ev = c.evaluator_inputs.astype(np.int64)
            try:
                y = self.ot.respond_labels(payload, secrets.zero[ev], secrets.one[ev])
            except ValueError as exc:
                raise ProtocolAbort(str(exc)) from exc
            return frame(session, PHASE_OT_Y, y)
        raise ProtocolAbort(f"unexpected phase {phase}")


class Evaluator:
    def __init__(self, name: str = "evaluator", ot: ExtReceiver | None = None, rng: Rng | None = None):
        self.name = name
        self.rng = rng or default_rng()
        self.ot = ot or ExtReceiver(self.rng.child())

    def run(self, session: bytes, c: Circuit, evaluator_input: bytes, call: Callable[[bytes], bytes]) -> bytes:
        """Drive one session; ``call`` delivers a request frame and returns the reply."""
        e_bits = bytes_to_bits(evaluator_input)
        if len(e_bits) != len(c.evaluator_inputs):
            raise CircuitError("evaluator input width does not match circuit")

        def step(phase: int, payload: bytes, reply: int) -> bytes:
            return unframe(call(frame(session, phase, payload)), session, reply)

        try:
            if not self.ot.ready:
                msg_b = step(PHASE_BASE_A, self.ot.base_start(), PHASE_BASE_B)
                step(PHASE_BASE_E, self.ot.base_send(msg_b), PHASE_BASE_E)
            r = Reader(step(PHASE_CIRCUIT, b"", PHASE_CIRCUIT))
            tables, decode, free_xor, labels = r.blob(), r.blob(), r.u8(), r.blob()
            r.done()
            g_wires = len(c.garbler_inputs) + len(c.const_wires)
            if len(labels) != LABEL_BYTES * g_wires or len(decode) != len(c.outputs):
                raise ProtocolAbort("garbled circuit message does not match circuit")
            gc = GarbledCircuit(tables, decode, bool(free_xor))
            ot_labels = self.ot.finish_labels(step(PHASE_OT_U, self.ot.request(e_bits), PHASE_OT_Y))
            g_labels = hashing.from_bytes(labels)
            n_g = len(c.garbler_inputs)
            ordered = np.concatenate([g_labels[:n_g], ot_labels, g_labels[n_g:]])
            out = decode_outputs(gc, evaluate_garbled(c, gc, ordered))
        except (DecodeError, ValueError) as exc:
            if isinstance(exc, ProtocolAbort):
                raise
            raise ProtocolAbort(str(exc)) from exc
        return bits_to_bytes(np.array(out, dtype=np.uint8))


def session_id(*parts: bytes) -> bytes:
    h = hashlib.blake2b(digest_size=16, person=b"tapsplit-yao")
    for p in parts:
        h.update(len(p).to_bytes(4, "big"))
        h.update(p)
    return h.digest()


def two_party_eval(
    circuit: Circuit,
    garbler_input: bytes,
    evaluator_input: bytes,
    link: Link,
    *,
    mask: bytes | None = None,
    garbler: Garbler | None = None,
    evaluator: Evaluator | None = None,
    session: bytes | None = None,
) -> tuple[bytes, bytes]:
    """Run one garbler/evaluator session; returns ``(garbler_share, evaluator_share)``.

    The circuit's outputs are XOR-masked by the garbler's mask bits, so the
    evaluator decodes only its share and the garbler's share is the mask
    itself.  Every byte between the two parties crosses ``link``.
    """
    garbler = garbler or Garbler()
    evaluator = evaluator or Evaluator()
    n_out = len(circuit.outputs)
    if n_out % 8 or len(circuit.mask_inputs) != n_out:
        raise CircuitError("circuit outputs must be byte aligned and fully masked")
    if mask is None:
        mask = garbler.rng.bytes(n_out // 8)
    if len(mask) * 8 != n_out:
        raise CircuitError("mask width does not match outputs")
    session = session or garbler.rng.bytes(16)
    g, e = garbler.name, evaluator.name
    garbler.prepare(session, circuit, garbler_input, mask)

    def call(req: bytes) -> bytes:
        return link.send(g, e, garbler.handle(link.send(e, g, req)))

    return mask, evaluator.run(session, circuit, evaluator_input, call)
