import pytest
from hypothesis import given
from hypothesis import strategies as st

from tapsplit import blocks
from tapsplit.blocks import (
    Block,
    BlockKind,
    PaddingPolicy,
    ShareVector,
    coalesce,
    decode_payload,
    encode_payload,
    reconstruct_padded,
    reconstruct_value,
    share_value,
    split_blocks,
)
from tapsplit.crypto import Rng
from tapsplit.wire import DecodeError

text = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=60)
keys = st.from_regex(r"[a-z_]{1,12}", fullmatch=True)


@st.composite
def templates(draw):
    parts = draw(st.lists(st.one_of(text.map(lambda s: s.replace("{", "(").replace("}", ")")), keys.map(lambda k: "{{" + k + "}}")), max_size=6))
    return "".join(parts)


def test_split_worked_example():
    bs = coalesce(split_blocks("Slept {{duration}}. Sleep early"))
    assert [b.kind for b in bs] == [BlockKind.LITERAL, BlockKind.PLACEHOLDER, BlockKind.LITERAL]
    assert bs[1].key == "duration"


def test_padding_policies():
    p2 = PaddingPolicy.next_power_of_two()
    assert [p2.padded_size(n) for n in (0, 1, 3, 4, 5, 100)] == [0, 1, 4, 4, 8, 128]
    assert PaddingPolicy.multiple_of(16).padded_size(17) == 32
    assert PaddingPolicy.fixed_max(64).padded_size(3) == 64
    with pytest.raises(blocks.PaddingError):
        PaddingPolicy.fixed_max(4).padded_size(5)
    with pytest.raises(ValueError):
        PaddingPolicy.multiple_of(0)
    assert PaddingPolicy.from_json(PaddingPolicy.multiple_of(8).to_json()) == PaddingPolicy.multiple_of(8)


def test_bad_placeholder_key():
    with pytest.raises(blocks.BlockParseError):
        Block.placeholder("")


@given(templates())
def test_blocks_render_back_to_template(t):
    assert "".join(b.text() for b in split_blocks(t)) == t


@given(templates())
def test_coalesce_never_leaves_adjacent_literals(t):
    bs = coalesce(split_blocks(t))
    for a, b in zip(bs, bs[1:]):
        assert a.is_placeholder or b.is_placeholder


@given(text)
def test_share_value_round_trip(v):
    a, b = share_value(v, rng=Rng(1), literal_only=True)
    assert reconstruct_value(a, b) == v


@given(templates(), st.integers(0, 2**32))
def test_shares_have_identical_shapes_and_different_bytes(t, seed):
    a, b = share_value(t, rng=Rng(seed))
    assert a.profile() == b.profile()
    for x, y in zip(a, b):
        if x.is_placeholder:
            assert x.data == y.data
    # reconstruction of literal payloads equals the padded payloads
    lits_a = ShareVector(tuple(x for x in a if not x.is_placeholder))
    lits_b = ShareVector(tuple(x for x in b if not x.is_placeholder))
    expected = b"".join(encode_payload(blk) for blk in coalesce(split_blocks(t)) if not blk.is_placeholder)
    assert reconstruct_padded(lits_a, lits_b) == expected


@given(text)
def test_payload_round_trip(v):
    for blk in coalesce(blocks.split_literal_text(v)):
        again = decode_payload(encode_payload(blk))
        assert blocks.strip_padding(again) == blocks.strip_padding(blk)


def test_payload_zero_fill_allowed_garbage_not():
    blk = coalesce(blocks.split_literal_text("hi"))[0]
    data = encode_payload(blk)
    assert blocks.strip_padding(decode_payload(data + bytes(16))) == b"hi"
    with pytest.raises(blocks.BlockError):
        decode_payload(data + bytes(8) + b"\x01")
    with pytest.raises(blocks.BlockError):
        decode_payload(b"\x00\x00\x00\x09\x00\x00\x00\x01x")


def test_shape_mismatch():
    a, _ = share_value("hello world", rng=Rng(1))
    _, b = share_value("hello", rng=Rng(2))
    with pytest.raises(blocks.ShapeMismatchError):
        reconstruct_value(a, b)


def test_unsubstituted_placeholder_refuses_reconstruction():
    a, b = share_value("x {{k}}", rng=Rng(1))
    with pytest.raises(blocks.UnsubstitutedKeyError):
        reconstruct_value(a, b)


@given(templates())
def test_share_vector_wire_round_trip(t):
    a, _ = share_value(t, rng=Rng(3))
    assert ShareVector.decode(a.encode()) == a


def test_share_vector_decode_is_strict():
    a, _ = share_value("abc", rng=Rng(3))
    with pytest.raises(DecodeError):
        ShareVector.decode(a.encode() + b"\x00")


def test_share_bits_look_uniform():
    # marginal of one share of a constant secret, per bit position
    n = 2000
    counts = [0] * 64
    r = Rng(99)
    for _ in range(n):
        a, _ = share_value("aaaa", rng=r, literal_only=True)
        data = a.blocks[0].data
        for i in range(min(8, len(data))):
            for j in range(8):
                counts[i * 8 + j] += (data[i] >> j) & 1
    assert all(abs(c / n - 0.5) < 0.05 for c in counts)
