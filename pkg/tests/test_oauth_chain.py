import pytest

from tapsplit import crypto
from tapsplit.crypto import Rng
from tapsplit.oauth_chain import (
    ChainCode,
    ChainError,
    EpochClock,
    TokenChain,
    TokenStore,
    advance_chain,
    decode_chain,
    make_initial_chain,
    open_chain,
    refresh_encrypted,
    resolve_token,
    verify_and_resolve,
)


@pytest.fixture
def issuer():
    return crypto.generate_keypair("AS", Rng(1))


@pytest.fixture
def setup(issuer):
    store, clock, rng = TokenStore(1, 2), EpochClock(), Rng(2)
    at, rt = store.issue("user", 0, rng)
    chain = make_initial_chain(at, issuer, rng)
    c_at = crypto.pk_encrypt(issuer.public_key, at, rng).data
    c_rt = crypto.pk_encrypt(issuer.public_key, rt, rng).data
    return store, clock, rng, at, rt, chain, c_at, c_rt


def test_initial_chain_resolves(issuer, setup):
    store, clock, _, at, _, chain, c_at, _ = setup
    assert open_chain(chain, issuer) == (at, at)
    assert verify_and_resolve(chain, c_at, issuer, clock, store) == at


def test_chain_expires_without_refresh(issuer, setup):
    store, clock, _, _, _, chain, c_at, _ = setup
    clock.advance()
    with pytest.raises(ChainError) as exc:
        verify_and_resolve(chain, c_at, issuer, clock, store)
    assert exc.value.code is ChainCode.EXPIRED


def test_three_consecutive_refreshes(issuer, setup):
    store, clock, rng, at0, _, chain, c_at0, c_rt = setup
    c_at = c_at0
    for k in range(1, 4):
        clock.advance()
        c_at, c_rt, chain = refresh_encrypted(chain, c_at, c_rt, issuer, store, clock, rng)
        assert chain.epoch == k
        assert open_chain(chain, issuer)[0] == at0
        # the installed (epoch 0) token still unlocks the current chain
        verify_and_resolve(chain, c_at0, issuer, clock, store)


def test_refresh_token_single_use(issuer, setup):
    store, clock, rng, at, rt, chain, _, _ = setup
    advance_chain(chain, at, rt, issuer, store, clock, rng)
    with pytest.raises(ChainError):
        advance_chain(chain, at, rt, issuer, store, clock, rng)


def test_forged_chains_rejected(issuer, setup):
    store, clock, _, _, _, chain, c_at, _ = setup
    rnd = Rng(77)
    rogue = crypto.generate_keypair("rogue", rnd)
    for i in range(1000):
        kind = i % 3
        if kind == 0:
            forged = TokenChain(rnd.bytes(len(chain.ciphertext)), rnd.bytes(64), chain.epoch)
        elif kind == 1:
            forged = make_initial_chain(rnd.bytes(32), rogue, rnd)
        else:
            forged = TokenChain(chain.ciphertext, chain.signature, chain.epoch + 1 + i)
        with pytest.raises(ChainError) as exc:
            verify_and_resolve(forged, c_at, issuer, clock, store)
        assert exc.value.code is ChainCode.BAD_SIGNATURE


def test_chain_for_other_token(issuer, setup):
    store, clock, rng, _, _, _, c_at, _ = setup
    other_at, _ = store.issue("other", 0, rng)
    with pytest.raises(ChainError) as exc:
        verify_and_resolve(make_initial_chain(other_at, issuer, rng), c_at, issuer, clock, store)
    assert exc.value.code is ChainCode.BAD_TOKEN


def test_plain_token_resolution(issuer, setup):
    store, clock, rng, at, _, _, c_at, _ = setup
    assert resolve_token(c_at, issuer, store, clock) == at
    with pytest.raises(ChainError):
        resolve_token(crypto.pk_encrypt(issuer.public_key, rng.bytes(32), rng).data, issuer, store, clock)


def test_chain_wire(setup):
    chain = setup[5]
    assert decode_chain(chain.encode()) == chain
    with pytest.raises(ChainError) as exc:
        decode_chain(chain.encode()[:-1])
    assert exc.value.code is ChainCode.MALFORMED
