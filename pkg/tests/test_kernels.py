import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tapsplit import kernels
from tapsplit.yao.circuit import evaluate_reference, random_circuit


@pytest.mark.skipif(not kernels.USE_NUMBA, reason="numba path disabled")
@pytest.mark.parametrize("seed", range(5))
def test_numba_and_numpy_paths_agree(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(500, 16, 16, 16, rng)
    g = rng.integers(0, 2, (200, 16), dtype=np.uint8)
    e = rng.integers(0, 2, (200, 16), dtype=np.uint8)
    assert np.array_equal(c.evaluate_batch(g, e, use_numba=True), c.evaluate_batch(g, e, use_numba=False))


def test_batch_matches_scalar_reference():
    rng = np.random.default_rng(9)
    c = random_circuit(300, 8, 8, 8, rng)
    g = rng.integers(0, 2, (70, 8), dtype=np.uint8)
    e = rng.integers(0, 2, (70, 8), dtype=np.uint8)
    out = c.evaluate_batch(g, e)
    for k in range(70):
        assert out[k].tolist() == evaluate_reference(c, g[k], e[k])


@given(st.integers(1, 300), st.integers(1, 40), st.integers(0, 2**32))
def test_pack_unpack_round_trip(n, bits, seed):
    m = np.random.default_rng(seed).integers(0, 2, (n, bits), dtype=np.uint8)
    assert np.array_equal(kernels.unpack_instances(kernels.pack_instances(m), n), m)


@given(st.binary(max_size=64))
def test_bit_conversion(data):
    assert kernels.bits_to_bytes(kernels.bytes_to_bits(data)) == data


def test_xor_bytes():
    assert kernels.xor_bytes(b"\x0f\xf0", b"\xff\xff") == b"\xf0\x0f"
    with pytest.raises(ValueError):
        kernels.xor_bytes(b"a", b"ab")


def test_env_flag_selects_numpy_fallback():
    import os
    import subprocess
    import sys

    code = "import tapsplit.kernels as k; print(k.USE_NUMBA)"
    env = dict(os.environ, TAPSPLIT_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"
