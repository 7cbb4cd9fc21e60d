import pytest
from hypothesis import given
from hypothesis import strategies as st

from tapsplit import crypto
from tapsplit.crypto import CIPHERTEXT_OVERHEAD, SIGNATURE_SIZE, Rng, generate_keypair


@given(st.binary(max_size=512))
def test_share_round_trip(secret):
    k, k2 = crypto.share(secret, Rng(7))
    assert len(k) == len(k2) == len(secret)
    assert crypto.reconstruct(k, k2) == secret


def test_share_first_half_is_the_random_stream():
    k, k2 = crypto.share(b"\x00" * 16, Rng(3))
    assert k == Rng(3).bytes(16)
    assert k2 == k


def test_reconstruct_rejects_length_mismatch():
    with pytest.raises(crypto.ReconstructionError):
        crypto.reconstruct(b"ab", b"abc")


def test_seeded_rng_is_reproducible_and_children_differ():
    a, b = Rng(5), Rng(5)
    assert a.bytes(32) == b.bytes(32)
    assert a.child().bytes(16) != a.child().bytes(16)
    assert not Rng().deterministic


def test_encrypt_round_trip_and_overhead(keys, rng):
    ct = crypto.pk_encrypt(keys.public_key, b"token", rng)
    assert len(ct) == len(b"token") + CIPHERTEXT_OVERHEAD
    assert crypto.pk_decrypt(keys.secret_key, ct) == b"token"


def test_encryption_is_randomised(keys):
    assert crypto.pk_encrypt(keys.public_key, b"m").data != crypto.pk_encrypt(keys.public_key, b"m").data


@given(st.integers(min_value=0, max_value=CIPHERTEXT_OVERHEAD + 7), st.integers(min_value=0, max_value=7))
def test_any_ciphertext_flip_fails_decryption(pos, bit):
    kp = generate_keypair("bob", Rng(11))
    ct = bytearray(crypto.pk_encrypt(kp.public_key, b"12345678", Rng(12)).data)
    ct[pos] ^= 1 << bit
    with pytest.raises(crypto.DecryptionError):
        crypto.pk_decrypt(kp.secret_key, bytes(ct))


def test_decrypt_with_wrong_key_fails(keys, rng):
    other = generate_keypair("mallory", rng)
    ct = crypto.pk_encrypt(keys.public_key, b"secret", rng)
    with pytest.raises(crypto.DecryptionError):
        crypto.pk_decrypt(other.secret_key, ct)


def test_short_ciphertext_fails(keys):
    with pytest.raises(crypto.DecryptionError):
        crypto.pk_decrypt(keys.secret_key, b"\x00" * (CIPHERTEXT_OVERHEAD - 1))


def test_sign_verify(keys):
    sig = crypto.sign(keys.secret_key, b"hello", "alice")
    assert len(sig.data) == SIGNATURE_SIZE
    assert crypto.verify(keys.public_key, b"hello", sig)
    assert not crypto.verify(keys.public_key, b"hellO", sig)


@given(st.integers(min_value=0, max_value=SIGNATURE_SIZE - 1), st.integers(min_value=0, max_value=7))
def test_any_signature_flip_fails(pos, bit):
    kp = generate_keypair("carol", Rng(21))
    sig = bytearray(crypto.sign(kp.secret_key, b"msg").data)
    sig[pos] ^= 1 << bit
    assert not crypto.verify(kp.public_key, b"msg", bytes(sig))


def test_verify_never_raises_on_garbage(keys):
    assert not crypto.verify(keys.public_key, b"m", b"short")
    assert not crypto.verify(b"bad key", b"m", b"\x00" * 64)
    with pytest.raises(ValueError):
        crypto.Signature(b"\x00" * 10)


def test_verify_under_other_key_fails(keys, rng):
    other = generate_keypair("dave", rng)
    assert not crypto.verify(other.public_key, b"m", crypto.sign(keys.secret_key, b"m"))


def test_keypair_files_round_trip(tmp_path, keys):
    crypto.save_keypair(tmp_path, keys)
    assert crypto.load_keypair(tmp_path, "alice") == keys
    assert crypto.load_public_key(tmp_path, "alice") == keys.public_key
    assert keys.secret_key.hex() not in repr(keys)
