import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tapsplit.blocks import coalesce, encode_payload, split_literal_text
from tapsplit.crypto import Rng
from tapsplit.kernels import bits_to_bytes, bytes_to_bits
from tapsplit.yao import ot
from tapsplit.yao.circuit import CircuitBuilder, CircuitError, evaluate_reference, random_circuit
from tapsplit.yao.filters import build_raw_select_circuit
from tapsplit.yao.garble import decode_outputs, evaluate_garbled, garble
from tapsplit.yao.protocol import Evaluator, Garbler, LocalLink, ProtocolAbort, two_party_eval


def garbled_eval(c, g_bits, e_bits, seed=0):
    gc, sec = garble(c, Rng(seed))
    wires = np.concatenate([c.garbler_inputs, c.evaluator_inputs, c.const_wires]).astype(np.int64)
    bits = np.concatenate([g_bits, e_bits, c.const_values]).astype(np.uint8)
    labels = sec.select(wires, bits)
    order = {w: i for i, w in enumerate(wires.tolist())}
    ordered = labels[[order[w] for w in np.concatenate([c.garbler_inputs, c.evaluator_inputs, c.const_wires]).tolist()]]
    return decode_outputs(gc, evaluate_garbled(c, gc, ordered))


@pytest.mark.parametrize("seed", range(3))
def test_garbled_matches_plaintext_on_random_circuits(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(400, 12, 12, 10, rng)
    for _ in range(10):
        g = rng.integers(0, 2, 12, dtype=np.uint8)
        e = rng.integers(0, 2, 12, dtype=np.uint8)
        assert garbled_eval(c, g, e, seed) == evaluate_reference(c, g, e)


def test_builder_gates():
    b = CircuitBuilder()
    x, y = b.garbler_input(1)[0], b.evaluator_input(1)[0]
    b.output([b.xor(x, y), b.and_(x, y), b.or_(x, y), b.not_(x), b.mux(x, y, b.const(1))])
    c = b.build()
    for gx in (0, 1):
        for ey in (0, 1):
            expect = [gx ^ ey, gx & ey, gx | ey, 1 - gx, ey if gx else 1]
            assert evaluate_reference(c, [gx], [ey]) == expect
            assert c.evaluate([gx], [ey]).tolist() == expect


@given(st.binary(min_size=1, max_size=24), st.binary(min_size=1, max_size=24), st.integers(0, 1))
@settings(max_examples=15)
def test_base_ot(m0, m1, choice):
    n = min(len(m0), len(m1))
    m0, m1 = m0[:n], m1[:n]
    transcript = []
    got = ot.ot_transfer((m0, m1), choice, Rng(1), transcript)
    assert got == (m0, m1)[choice]
    assert all(m0 not in t and m1 not in t for t in transcript if n >= 8)


def test_ot_rejects_unequal_lengths():
    with pytest.raises(ot.OTError):
        ot.ot_transfer((b"a", b"bb"), 0)


def test_ot_extension_many_transfers():
    sender, receiver = ot.ExtSender(Rng(2)), ot.ExtReceiver(Rng(3))
    sender.base_finish(receiver.base_send(sender.base_respond(receiver.base_start())))
    rnd = Rng(4)
    pairs = [(rnd.bytes(16), rnd.bytes(16)) for _ in range(300)]
    choices = [b % 2 for b in rnd.bytes(300)]
    got = receiver.finish(sender.respond(receiver.request(choices), pairs), 16)
    assert got == [p[c] for p, c in zip(pairs, choices)]


def select_oracle(value, constants, templates):
    width = max(len(t) for t in templates)
    for const, t in zip(constants, templates):
        if value == const:
            return t.ljust(width, b"\x00")
    return templates[-1].ljust(width, b"\x00")


def test_two_party_select_small():
    constants = [b"\x10", b"\x20"]
    templates = [b"aa", b"bbb", b"c"]
    c = build_raw_select_circuit(1, constants, [len(t) for t in templates])
    garbler, evaluator, link = Garbler(rng=Rng(5)), Evaluator(rng=Rng(6)), LocalLink()
    rnd = Rng(7)
    for v in (0x10, 0x20, 0x33):
        s0 = rnd.bytes(1 + 6)
        plain = bytes([v]) + b"".join(templates)
        s1 = bytes(a ^ b for a, b in zip(s0, plain))
        m, e = two_party_eval(c, s0, s1, link, garbler=garbler, evaluator=evaluator)
        out = bytes(a ^ b for a, b in zip(m, e))
        assert out == select_oracle(bytes([v]), constants, templates)


def test_evaluator_aborts_on_tampered_frames():
    c = random_circuit(50, 8, 8, 8, np.random.default_rng(0))
    b = CircuitBuilder()
    g = b.garbler_input(8)
    e = b.evaluator_input(8)
    out = b.xor_vec(g, e)
    m = b.mask_input(8)
    b.output([b.xor(x, y) for x, y in zip(out, m)])
    c = b.build()

    class Flipper(LocalLink):
        def send(self, src, dst, data):
            data = super().send(src, dst, data)
            if src == "garbler" and len(data) > 40:
                data = data[:20] + bytes([data[20] ^ 1]) + data[21:]
            return data

    with pytest.raises((ProtocolAbort, CircuitError, ValueError)):
        two_party_eval(c, b"\x01", b"\x02", Flipper(), garbler=Garbler(rng=Rng(1)), evaluator=Evaluator(rng=Rng(2)))


def test_mask_is_garbler_share():
    b = CircuitBuilder()
    g, e = b.garbler_input(8), b.evaluator_input(8)
    m = b.mask_input(8)
    b.output([b.xor(b.and_(x, y), z) for x, y, z in zip(g, e, m)])
    c = b.build()
    m_share, e_share = two_party_eval(c, b"\xf0", b"\x3c", LocalLink(), mask=b"\xaa")
    assert m_share == b"\xaa"
    assert bytes([m_share[0] ^ e_share[0]]) == b"\x30"


def test_bits_helpers_are_msb_first():
    assert bytes_to_bits(b"\x80").tolist() == [1, 0, 0, 0, 0, 0, 0, 0]
    assert bits_to_bytes(np.array([0, 0, 0, 0, 0, 0, 0, 1], dtype=np.uint8)) == b"\x01"


def test_payload_widths_are_padded():
    blk = coalesce(split_literal_text("sunny"))[0]
    assert len(encode_payload(blk)) in (8 + 8, 8 + 9)
