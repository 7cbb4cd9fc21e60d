import pytest
from hypothesis import given
from hypothesis import strategies as st

from tapsplit.wire import DecodeError, Reader, Writer


@given(st.integers(0, 255), st.integers(0, 2**32 - 1), st.binary(max_size=100), st.text(max_size=30))
def test_round_trip(a, b, blob, s):
    data = Writer().u8(a).u32(b).blob(blob).text(s).getvalue()
    r = Reader(data)
    assert (r.u8(), r.u32(), r.blob(), r.text()) == (a, b, blob, s)
    r.done()


def test_spans_are_recorded():
    w = Writer()
    with w.scope("outer"):
        w.u8(1, "x").blob(b"abc", "y")
    names = {n: (a, b) for n, a, b in w.spans}
    assert names["outer/x"] == (0, 1)
    assert names["outer/y#len"] == (1, 5)
    assert names["outer/y"] == (5, 8)
    assert names["outer"] == (0, 8)


def test_strictness():
    with pytest.raises(DecodeError):
        Reader(b"\x00\x00\x00\x05ab").blob()
    r = Reader(b"\x01\x02")
    r.u8()
    with pytest.raises(DecodeError):
        r.done()
    with pytest.raises(DecodeError):
        Reader(b"\xff\xff\xff\xff").blob()
