"""Compile filterCode into garbled-circuit form.

Both servers hold share vectors of identical shape, so each can build the
same circuit from its own half.  Every literal share block becomes a *slot*:
the garbler feeds its share bits, the evaluator feeds its share bits, and
the circuit XORs them back together before doing any work.  Outputs are one
literal block per actInp key, re-masked by the garbler.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from tapsplit.blocks import (
    DEFAULT_POLICY,
    BlockKind,
    PaddingPolicy,
    ShareBlock,
    ShareVector,
    coalesce,
    encode_payload,
    split_blocks,
    split_literal_text,
)
from tapsplit.filtercode import FilterCode, FilterKind
from tapsplit.kernels import bytes_to_bits
from tapsplit.stringsub import KeyedShareMap, MissingKeyError
from tapsplit.yao.circuit import Circuit, CircuitBuilder, CircuitError

MAX_VALUE_BYTES = 4096


@dataclass(frozen=True)
class Slot:
    source: str  # "trig" or "act"
    key: str
    index: int
    width: int


@dataclass
class CompiledFilter:
    circuit: Circuit
    slots: list[Slot]
    outputs: list[tuple[str, int]]  # (actInp key, byte width)

    def party_input(self, sh_trig_out: Mapping[str, ShareVector], sh_act_inp: Mapping[str, ShareVector]) -> bytes:
        src = {"trig": sh_trig_out, "act": sh_act_inp}
        parts = []
        for s in self.slots:
            data = src[s.source][s.key].blocks[s.index].data
            if len(data) != s.width:
                raise CircuitError(f"slot {s.source}:{s.key}[{s.index}] width changed")
            parts.append(data)
        return b"".join(parts)

    def split_output(self, share: bytes) -> KeyedShareMap:
        out = {}
        off = 0
        for key, width in self.outputs:
            out[key] = ShareVector((ShareBlock(BlockKind.LITERAL, share[off:off + width]),))
            off += width
        return KeyedShareMap(out)


class _Compiler:
    def __init__(self):
        self.b = CircuitBuilder()
        self.slots: list[Slot] = []
        self._rec: dict[tuple[str, str, int], list[int]] = {}

    def slot(self, source: str, key: str, index: int, width: int) -> list[int]:
        k = (source, key, index)
        if k not in self._rec:
            g = self.b.garbler_input(width * 8)
            e = self.b.evaluator_input(width * 8)
            self._rec[k] = self.b.xor_vec(g, e)
            self.slots.append(Slot(source, key, index, width))
        return self._rec[k]

    def value(self, trig: Mapping[str, ShareVector], key: str) -> list[int]:
        if key not in trig:
            raise MissingKeyError(key)
        vec = trig[key]
        if len(vec) == 0:
            return []
        if len(vec) != 1 or vec.blocks[0].is_placeholder:
            raise CircuitError(f"trigger output {key!r} is not a single literal block")
        width = len(vec.blocks[0].data)
        if width > MAX_VALUE_BYTES:
            raise CircuitError(f"value {key!r} is {width} bytes, limit {MAX_VALUE_BYTES}")
        return self.slot("trig", key, 0, width)

    def substitution(self, trig: Mapping[str, ShareVector], vec: ShareVector, act_key: str) -> list[int]:
        bits: list[int] = []
        for i, blk in enumerate(vec):
            if blk.is_placeholder:
                bits += self.value(trig, blk.key)
            else:
                bits += self.slot("act", act_key, i, len(blk.data))
        return bits

    def select(self, value_bits: list[int], constants: list[bytes | None], candidates: list[list[int]]) -> list[int]:
        """First case whose constant equals the value wins; last candidate is the default."""
        width = max(len(c) for c in candidates)
        zero = self.b.const(0) if any(len(c) < width for c in candidates) else None

        def padded(c: list[int]) -> list[int]:
            return c + [zero] * (width - len(c))

        out = padded(candidates[-1])
        for const, cand in reversed(list(zip(constants, candidates[:-1]))):
            if const is None or len(const) * 8 != len(value_bits):
                continue  # can never match at this width
            eq = self.b.equal_const(value_bits, bytes_to_bits(const).tolist())
            out = [self.b.mux(eq, t, f) for t, f in zip(padded(cand), out)]
        return out

    def finish(self, outputs: list[tuple[str, list[int]]]) -> CompiledFilter:
        total = sum(len(bits) for _, bits in outputs)
        mask = self.b.mask_input(total)
        flat = [w for _, bits in outputs for w in bits]
        self.b.output([self.b.xor(w, m) for w, m in zip(flat, mask)])
        return CompiledFilter(self.b.build(), self.slots, [(k, len(bits) // 8) for k, bits in outputs])


def match_payload(match: str, policy: PaddingPolicy = DEFAULT_POLICY) -> bytes:
    blocks = coalesce(split_literal_text(match), policy)
    return encode_payload(blocks[0]) if blocks else b""


def compile_generate(
    fc: FilterCode,
    sh_trig_out: Mapping[str, ShareVector],
    sh_act_inp: Mapping[str, ShareVector],
    *,
    keys: list[str] | None = None,
    policy: PaddingPolicy = DEFAULT_POLICY,
) -> CompiledFilter:
    """Circuit computing the requested actInp keys from share shapes.

    ``keys`` defaults to every output key; a custom-select output key is
    computed with the selector, all others by substitution.
    """
    comp = _Compiler()
    case_keys = set(fc.case_keys()) if fc.kind is FilterKind.CUSTOM_SELECT else set()
    if keys is None:
        keys = sorted(k for k in sh_act_inp if k not in case_keys)
        if fc.kind is FilterKind.CUSTOM_SELECT:
            keys = sorted({*keys, fc.output_key})
    outputs = []
    for key in keys:
        if fc.kind is FilterKind.CUSTOM_SELECT and key == fc.output_key:
            value = comp.value(sh_trig_out, fc.key)
            cands = [comp.substitution(sh_trig_out, sh_act_inp[ck], ck) for ck in fc.case_keys()]
            consts = [match_payload(m, policy) for m, _ in fc.cases]
            outputs.append((key, comp.select(value, consts, cands)))
        else:
            outputs.append((key, comp.substitution(sh_trig_out, sh_act_inp[key], key)))
    return comp.finish(outputs)


def build_select_circuit(
    desc: FilterCode,
    value_length: int,
    policy: PaddingPolicy = DEFAULT_POLICY,
) -> CompiledFilter:
    """Selector circuit for a plaintext descriptor at a given value payload width.

    Template shapes follow from the descriptor's templates, so no shares are
    needed; placeholders other than the compared key are not supported here.
    """
    if desc.kind is not FilterKind.CUSTOM_SELECT:
        raise CircuitError("build_select_circuit needs a custom-select descriptor")
    if value_length > MAX_VALUE_BYTES:
        raise CircuitError(f"value length {value_length} exceeds limit {MAX_VALUE_BYTES}")
    trig = {desc.key: ShareVector((ShareBlock(BlockKind.LITERAL, bytes(value_length)),)) if value_length else ShareVector()}
    act = {}
    for ck, template in desc.case_templates().items():
        blocks = []
        for blk in coalesce(split_blocks(template), policy):
            if blk.is_placeholder:
                if blk.key != desc.key:
                    raise MissingKeyError(blk.key)
                blocks.append(ShareBlock(BlockKind.PLACEHOLDER, blk.content))
            else:
                blocks.append(ShareBlock(BlockKind.LITERAL, bytes(len(encode_payload(blk)))))
        act[ck] = ShareVector(tuple(blocks))
    return compile_generate(desc, trig, act, keys=[desc.output_key], policy=policy)


def build_raw_select_circuit(value_width: int, constants: list[bytes], template_widths: list[int]) -> Circuit:
    """Selector over raw byte slots: value, then one template per case plus default.

    Slot order (for both parties' inputs): value bytes, then templates in order.
    """
    if len(template_widths) != len(constants) + 1:
        raise CircuitError("need one template per case plus a default")
    comp = _Compiler()
    value = comp.slot("trig", "value", 0, value_width)
    cands = [comp.slot("act", f"t{i}", 0, w) for i, w in enumerate(template_widths)]
    return comp.finish([("out", comp.select(value, list(constants), cands))]).circuit
