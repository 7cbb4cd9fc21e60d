import pytest
from hypothesis import given
from hypothesis import strategies as st

from tapsplit.blocks import reconstruct_padded, reconstruct_value, share_value
from tapsplit.crypto import Rng
from tapsplit.stringsub import KeyedShareMap, MissingKeyError, padded_substitute, plaintext_substitute, string_sub

values = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=40)
literal = st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="{}"), max_size=40)


def share_map(d, rng, literal_only=False):
    halves = [{}, {}]
    for k, v in d.items():
        halves[0][k], halves[1][k] = share_value(v, rng=rng, literal_only=literal_only)
    return KeyedShareMap(halves[0]), KeyedShareMap(halves[1])


@given(literal, literal, values, st.integers(0, 2**32))
def test_share_domain_substitution_matches_plaintext(pre, post, value, seed):
    rng = Rng(seed)
    template = pre + "{{w}}" + post
    t0, t1 = share_map({"w": value}, rng, literal_only=True)
    a0, a1 = share_map({"body": template}, rng)
    s0, s1 = string_sub(t0, a0)["body"], string_sub(t1, a1)["body"]
    assert reconstruct_value(s0, s1) == plaintext_substitute(template, {"w": value})
    assert reconstruct_padded(s0, s1) == padded_substitute(template, {"w": value})


def test_substitution_is_local_to_each_share():
    rng = Rng(4)
    t0, _ = share_map({"w": "sunny"}, rng, literal_only=True)
    a0, _ = share_map({"body": "it is {{w}}"}, rng)
    # one server's output depends only on its own shares
    assert string_sub(t0, a0) == string_sub(t0, a0)


def test_missing_key():
    rng = Rng(5)
    a0, _ = share_map({"body": "{{nope}}"}, rng)
    with pytest.raises(MissingKeyError):
        string_sub(KeyedShareMap({}), a0)
    with pytest.raises(MissingKeyError):
        plaintext_substitute("{{nope}}", {})


def test_keyed_share_map_wire_is_canonical():
    rng = Rng(6)
    a0, _ = share_map({"b": "x", "a": "y"}, rng)
    data = a0.encode()
    assert KeyedShareMap.decode(data) == a0
    assert list(KeyedShareMap.decode(data)) == ["a", "b"]
