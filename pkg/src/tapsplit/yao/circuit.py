"""Boolean circuits and their plaintext (bit-sliced) evaluation."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from tapsplit import kernels
from tapsplit.kernels import OP_AND, OP_NOT, OP_OR, OP_XOR

OP_NAMES = {OP_XOR: "XOR", OP_AND: "AND", OP_OR: "OR", OP_NOT: "NOT"}


class CircuitError(ValueError):
    pass


@dataclass
class Circuit:
    """Topologically ordered gate list over integer wire ids.

    Input wires are partitioned into garbler inputs, evaluator inputs and
    constants (fixed bits that the garbler supplies).  ``mask_inputs`` are
    the garbler inputs holding the output re-sharing mask, one per output.
    """

    n_wires: int
    ops: np.ndarray
    in_a: np.ndarray
    in_b: np.ndarray
    out: np.ndarray
    garbler_inputs: np.ndarray
    evaluator_inputs: np.ndarray
    outputs: np.ndarray
    const_wires: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int32))
    const_values: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.uint8))
    mask_inputs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int32))

    def layers(self) -> list[np.ndarray]:
        """Gate indices grouped by depth; gates within one layer are independent."""
        cached = self.__dict__.get("_layers")
        if cached is not None:
            return cached
        depth = [0] * self.n_wires
        gdepth = np.empty(self.n_gates, dtype=np.int32)
        for g, (a, b, o) in enumerate(zip(self.in_a.tolist(), self.in_b.tolist(), self.out.tolist())):
            d = max(depth[a], depth[b]) + 1
            depth[o] = d
            gdepth[g] = d
        order = np.argsort(gdepth, kind="stable")
        bounds = np.flatnonzero(np.diff(gdepth[order])) + 1
        self.__dict__["_layers"] = [a for a in np.split(order, bounds) if a.size]
        return self.__dict__["_layers"]

    @property
    def n_gates(self) -> int:
        return int(self.ops.shape[0])

    def census(self) -> Counter:
        c = Counter()
        for op, n in zip(*np.unique(self.ops, return_counts=True)):
            c[OP_NAMES[int(op)]] = int(n)
        return c

    @property
    def data_inputs(self) -> np.ndarray:
        """Garbler inputs other than the mask bits."""
        if self.mask_inputs.size == 0:
            return self.garbler_inputs
        masked = set(self.mask_inputs.tolist())
        return np.array([w for w in self.garbler_inputs.tolist() if w not in masked], dtype=np.int32)

    def evaluate_batch(self, garbler_bits, evaluator_bits, *, use_numba: bool | None = None) -> np.ndarray:
        """Plaintext evaluation of many instances at once.

        ``garbler_bits`` is ``(n, len(garbler_inputs))`` and ``evaluator_bits``
        ``(n, len(evaluator_inputs))``; returns ``(n, len(outputs))`` uint8.
        """
        g = np.asarray(garbler_bits, dtype=np.uint8).reshape(-1, len(self.garbler_inputs))
        e = np.asarray(evaluator_bits, dtype=np.uint8).reshape(-1, len(self.evaluator_inputs))
        if g.shape[0] != e.shape[0]:
            raise CircuitError("instance counts differ")
        n = g.shape[0]
        n_words = max(1, -(-n // 64))
        wires = np.zeros((self.n_wires, n_words), dtype=np.uint64)
        if len(self.garbler_inputs):
            wires[self.garbler_inputs] = kernels.pack_instances(g)
        if len(self.evaluator_inputs):
            wires[self.evaluator_inputs] = kernels.pack_instances(e)
        if len(self.const_wires):
            ones = np.uint64(0xFFFFFFFFFFFFFFFF)
            wires[self.const_wires] = np.where(self.const_values[:, None] == 1, ones, np.uint64(0))
        kernels.eval_bitsliced(self.ops, self.in_a, self.in_b, self.out, wires, use_numba=use_numba)
        return kernels.unpack_instances(wires[self.outputs], n)

    def evaluate(self, garbler_bits, evaluator_bits) -> np.ndarray:
        return self.evaluate_batch(np.asarray(garbler_bits)[None, :], np.asarray(evaluator_bits)[None, :])[0]


def evaluate_reference(c: Circuit, garbler_bits, evaluator_bits) -> list[int]:
    """Gate-by-gate scalar evaluation with Python ints (independent of kernels)."""
    val = [0] * c.n_wires
    for w, b in zip(c.garbler_inputs.tolist(), list(garbler_bits)):
        val[w] = int(b) & 1
    for w, b in zip(c.evaluator_inputs.tolist(), list(evaluator_bits)):
        val[w] = int(b) & 1
    for w, b in zip(c.const_wires.tolist(), c.const_values.tolist()):
        val[w] = b
    for op, a, b, o in zip(c.ops.tolist(), c.in_a.tolist(), c.in_b.tolist(), c.out.tolist()):
        if op == OP_XOR:
            val[o] = val[a] ^ val[b]
        elif op == OP_AND:
            val[o] = val[a] & val[b]
        elif op == OP_OR:
            val[o] = val[a] | val[b]
        else:
            val[o] = val[a] ^ 1
    return [val[w] for w in c.outputs.tolist()]


class CircuitBuilder:
    def __init__(self):
        self.n_wires = 0
        self._gates: list[tuple[int, int, int, int]] = []
        self._garbler: list[int] = []
        self._evaluator: list[int] = []
        self._mask: list[int] = []
        self._outputs: list[int] = []
        self._consts: dict[int, int] = {}

    def _wire(self) -> int:
        w = self.n_wires
        self.n_wires += 1
        return w

    def garbler_input(self, n: int) -> list[int]:
        ws = [self._wire() for _ in range(n)]
        self._garbler.extend(ws)
        return ws

    def evaluator_input(self, n: int) -> list[int]:
        ws = [self._wire() for _ in range(n)]
        self._evaluator.extend(ws)
        return ws

    def mask_input(self, n: int) -> list[int]:
        ws = self.garbler_input(n)
        self._mask.extend(ws)
        return ws

    def const(self, bit: int) -> int:
        bit = int(bit) & 1
        for w, v in self._consts.items():
            if v == bit:
                return w
        w = self._wire()
        self._consts[w] = bit
        return w

    def _gate(self, op: int, a: int, b: int) -> int:
        o = self._wire()
        self._gates.append((op, a, b, o))
        return o

    def xor(self, a: int, b: int) -> int:
        return self._gate(OP_XOR, a, b)

    def and_(self, a: int, b: int) -> int:
        return self._gate(OP_AND, a, b)

    def or_(self, a: int, b: int) -> int:
        return self._gate(OP_OR, a, b)

    def not_(self, a: int) -> int:
        return self._gate(OP_NOT, a, a)

    def xor_vec(self, a: list[int], b: list[int]) -> list[int]:
        if len(a) != len(b):
            raise CircuitError(f"width mismatch {len(a)} != {len(b)}")
        return [self.xor(x, y) for x, y in zip(a, b)]

    def and_tree(self, ws: list[int]) -> int:
        if not ws:
            return self.const(1)
        layer = list(ws)
        while len(layer) > 1:
            nxt = [self.and_(layer[i], layer[i + 1]) for i in range(0, len(layer) - 1, 2)]
            if len(layer) % 2:
                nxt.append(layer[-1])
            layer = nxt
        return layer[0]

    def equal(self, a: list[int], b: list[int]) -> int:
        """n XOR, n NOT, n-1 AND."""
        return self.and_tree([self.not_(d) for d in self.xor_vec(a, b)])

    def equal_const(self, a: list[int], bits) -> int:
        """Compare wires against a public bit pattern: NOTs where the constant is 0."""
        bits = list(bits)
        if len(bits) != len(a):
            raise CircuitError("constant width mismatch")
        return self.and_tree([w if b else self.not_(w) for w, b in zip(a, bits)])

    def mux(self, sel: int, if_true: int, if_false: int) -> int:
        return self.xor(if_false, self.and_(sel, self.xor(if_true, if_false)))

    def output(self, ws: list[int]) -> None:
        self._outputs.extend(ws)

    def build(self) -> Circuit:
        if self._gates:
            g = np.array(self._gates, dtype=np.int32)
            ops, a, b, o = (np.ascontiguousarray(g[:, i]) for i in range(4))
        else:
            ops = a = b = o = np.zeros(0, dtype=np.int32)
        consts = sorted(self._consts)
        return Circuit(
            n_wires=self.n_wires,
            ops=ops.astype(np.uint8),
            in_a=a,
            in_b=b,
            out=o,
            garbler_inputs=np.array(self._garbler, dtype=np.int32),
            evaluator_inputs=np.array(self._evaluator, dtype=np.int32),
            outputs=np.array(self._outputs, dtype=np.int32),
            const_wires=np.array(consts, dtype=np.int32),
            const_values=np.array([self._consts[w] for w in consts], dtype=np.uint8),
            mask_inputs=np.array(self._mask, dtype=np.int32),
        )


def random_circuit(n_gates: int, n_garbler: int, n_evaluator: int, n_outputs: int, rng: np.random.Generator) -> Circuit:
    """Random well-formed circuit; used by the garbling oracle tests and benchmarks."""
    b = CircuitBuilder()
    pool = b.garbler_input(n_garbler) + b.evaluator_input(n_evaluator)
    ops = [OP_XOR, OP_AND, OP_OR, OP_NOT]
    for _ in range(n_gates):
        op = ops[int(rng.integers(len(ops)))]
        x = pool[int(rng.integers(len(pool)))]
        if op == OP_NOT:
            pool.append(b.not_(x))
        else:
            y = pool[int(rng.integers(len(pool)))]
            pool.append(b._gate(op, x, y))
    b.output(pool[-n_outputs:])
    return b.build()
