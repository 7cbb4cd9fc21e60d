"""Point-and-permute garbling with optional free-XOR.

Labels are 128-bit values whose low bit is the colour (permute) bit, held
as ``(n, 2)`` uint64 arrays.  Table gates (AND, OR, and XOR when free-XOR is
off) carry four 16-byte rows ordered by the colour bits of the two input
labels.  NOT gates are free in both modes: the output wire reuses the input
labels swapped.

Gates are processed one depth layer at a time so each layer costs a single
batched AES call.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from tapsplit.crypto import Rng, default_rng
from tapsplit.kernels import OP_AND, OP_NOT, OP_OR, OP_XOR
from tapsplit.metering import charge
from tapsplit.yao import hashing
from tapsplit.yao.circuit import Circuit, CircuitError

LABEL_BYTES = 16
ROW_BYTES = LABEL_BYTES
TABLE_BYTES = 4 * ROW_BYTES

# truth[op, 2*a + b]
_TRUTH = np.zeros((4, 4), dtype=np.uint8)
_TRUTH[OP_AND] = (0, 0, 0, 1)
_TRUTH[OP_OR] = (0, 1, 1, 1)
_TRUTH[OP_XOR] = (0, 1, 1, 0)


class EvaluationError(CircuitError):
    pass


def table_gate_count(c: Circuit, free_xor: bool) -> int:
    return int(np.count_nonzero(_table_mask(c, free_xor)))


def _table_mask(c: Circuit, free_xor: bool) -> np.ndarray:
    m = (c.ops == OP_AND) | (c.ops == OP_OR)
    if not free_xor:
        m |= c.ops == OP_XOR
    return m


def _input_wires(c: Circuit) -> np.ndarray:
    return np.concatenate([c.garbler_inputs, c.evaluator_inputs, c.const_wires]).astype(np.int64)


@dataclass
class GarbledCircuit:
    """What the garbler ships to the evaluator (plus the public circuit)."""

    tables: bytes
    decode_bits: bytes  # colour bit of the 0-label, one byte per output wire
    free_xor: bool

    def size(self) -> int:
        return len(self.tables) + len(self.decode_bits)


@dataclass
class GarblerSecrets:
    """Kept by the garbler: both labels of every wire."""

    zero: np.ndarray
    one: np.ndarray
    delta: int | None

    def label(self, wire: int, bit: int) -> int:
        arr = self.one if bit else self.zero
        return int(arr[wire, 0]) | (int(arr[wire, 1]) << 64)

    def pair(self, wire: int) -> tuple[int, int]:
        return self.label(wire, 0), self.label(wire, 1)

    def select(self, wires, bits) -> np.ndarray:
        wires = np.asarray(wires, dtype=np.int64)
        bits = np.asarray(bits, dtype=bool)
        return np.where(bits[:, None], self.one[wires], self.zero[wires])


def garble(c: Circuit, rng: Rng | None = None, *, free_xor: bool = True) -> tuple[GarbledCircuit, GarblerSecrets]:
    rng = rng or default_rng()
    n = c.n_wires
    zero = hashing.random_labels(rng.bytes(16 * n), n)
    if free_xor:
        delta = hashing.random_labels(rng.bytes(16), 1)[0]
        delta[0] |= np.uint64(1)
        one = zero ^ delta
    else:
        delta = None
        one = hashing.random_labels(rng.bytes(16 * n), n)
        one[:, 0] = (one[:, 0] & ~np.uint64(1)) | ((zero[:, 0] & np.uint64(1)) ^ np.uint64(1))

    is_table = _table_mask(c, free_xor)
    ordinal = np.cumsum(is_table) - 1
    n_tables = int(is_table.sum())
    tables = np.zeros((n_tables, 4, 2), dtype=np.uint64)
    ops, ia, ib, io = c.ops, c.in_a.astype(np.int64), c.in_b.astype(np.int64), c.out.astype(np.int64)

    for layer in c.layers():
        op = ops[layer]
        a, b, o = ia[layer], ib[layer], io[layer]
        m = op == OP_NOT
        if m.any():
            za = zero[a[m]]
            zero[o[m]], one[o[m]] = one[a[m]], za
        if free_xor:
            m = op == OP_XOR
            if m.any():
                zero[o[m]] = zero[a[m]] ^ zero[b[m]]
                one[o[m]] = zero[o[m]] ^ delta
        m = is_table[layer]
        if not m.any():
            continue
        g, a, b, o, op = layer[m], a[m], b[m], o[m], op[m]
        ca, cb = hashing.colour(zero[a]), hashing.colour(zero[b])
        tw = g.astype(np.uint64)
        for r in range(4):
            va = (r >> 1) ^ ca
            vb = (r & 1) ^ cb
            la = np.where(va[:, None] == 1, one[a], zero[a])
            lb = np.where(vb[:, None] == 1, one[b], zero[b])
            bit = _TRUTH[op, 2 * va + vb]
            lo = np.where(bit[:, None] == 1, one[o], zero[o])
            tables[ordinal[g], r] = hashing.gate_hash(la, lb, tw) ^ lo

    charge("garble_table_gates", n_tables)
    charge("garble_free_gates", c.n_gates - n_tables)
    decode = hashing.colour(zero[c.outputs.astype(np.int64)]).tobytes()
    d = None if delta is None else int(delta[0]) | (int(delta[1]) << 64)
    return GarbledCircuit(hashing.to_bytes(tables.reshape(-1, 2)), decode, free_xor), GarblerSecrets(zero, one, d)


def _label_array(c: Circuit, input_labels) -> np.ndarray:
    lab = np.zeros((c.n_wires, 2), dtype=np.uint64)
    wires = _input_wires(c)
    if isinstance(input_labels, Mapping):
        for w in wires.tolist():
            try:
                v = int(input_labels[w])
            except KeyError:
                raise EvaluationError(f"missing label for input wire {w}") from None
            lab[w] = (v & 0xFFFFFFFFFFFFFFFF, v >> 64)
        return lab
    arr = np.asarray(input_labels, dtype=np.uint64)
    if arr.shape != (len(wires), 2):
        raise EvaluationError(f"expected {len(wires)} input labels, got {arr.shape[0] if arr.ndim else 0}")
    lab[wires] = arr
    return lab


def evaluate_garbled(c: Circuit, gc: GarbledCircuit, input_labels) -> np.ndarray:
    """Evaluate with exactly one label per input wire; returns output labels.

    ``input_labels`` is either a mapping wire -> int label, or an array of
    labels in input order (garbler inputs, evaluator inputs, constants).
    """
    lab = _label_array(c, input_labels)
    is_table = _table_mask(c, gc.free_xor)
    ordinal = np.cumsum(is_table) - 1
    n_tables = int(is_table.sum())
    if len(gc.tables) != n_tables * TABLE_BYTES:
        raise EvaluationError("garbled table size does not match circuit")
    tables = hashing.from_bytes(gc.tables).reshape(n_tables, 4, 2)
    ops, ia, ib, io = c.ops, c.in_a.astype(np.int64), c.in_b.astype(np.int64), c.out.astype(np.int64)
    for layer in c.layers():
        op = ops[layer]
        a, b, o = ia[layer], ib[layer], io[layer]
        m = op == OP_NOT
        if m.any():
            lab[o[m]] = lab[a[m]]
        if gc.free_xor:
            m = op == OP_XOR
            if m.any():
                lab[o[m]] = lab[a[m]] ^ lab[b[m]]
        m = is_table[layer]
        if not m.any():
            continue
        g, a, b, o = layer[m], a[m], b[m], o[m]
        la, lb = lab[a], lab[b]
        row = 2 * hashing.colour(la) + hashing.colour(lb)
        lab[o] = tables[ordinal[g], row] ^ hashing.gate_hash(la, lb, g.astype(np.uint64))
    charge("eval_table_gates", n_tables)
    charge("eval_free_gates", c.n_gates - n_tables)
    return lab[c.outputs.astype(np.int64)]


def decode_outputs(gc: GarbledCircuit, labels) -> list[int]:
    labels = np.asarray(labels, dtype=np.uint64).reshape(-1, 2)
    if labels.shape[0] != len(gc.decode_bits):
        raise EvaluationError("output count mismatch")
    d = np.frombuffer(gc.decode_bits, dtype=np.uint8)
    return (hashing.colour(labels) ^ d).tolist()
