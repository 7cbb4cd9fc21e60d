"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line for its criterion (visible
even under output capture).  Run directly with ``python tests/test_acceptance.py``.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from tapsplit import crypto
from tapsplit import messages as msg
from tapsplit.crypto import CIPHERTEXT_OVERHEAD, Rng
from tapsplit.harness.cost import dollar_cost
from tapsplit.harness.faults import inject_fault
from tapsplit.harness.leakage import leakage_of, template_leakage
from tapsplit.harness.runner import run_variant
from tapsplit.harness.workloads import load_workload
from tapsplit.messages import Code
from tapsplit.platform import Deployment
from tapsplit.yao.circuit import evaluate_reference, random_circuit
from tapsplit.yao.filters import build_raw_select_circuit
from tapsplit.yao.garble import decode_outputs, evaluate_garbled, garble
from tapsplit.yao.protocol import Evaluator, Garbler, LocalLink, two_party_eval


@contextmanager
def criterion(capsys, n: int, title: str):
    t0 = time.perf_counter()
    status, why = "PASS", ""
    try:
        yield
    except BaseException as exc:
        status, why = "FAIL", f" ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        raise
    finally:
        with capsys.disabled():
            print(f"\n[{status}] criterion {n:2d}: {title} [{time.perf_counter() - t0:.1f}s]{why}")


def test_01_functional_equivalence(capsys):
    with criterion(capsys, 1, "W equals NoSec on 100 seeded values for each filter kind"):
        t0 = time.perf_counter()
        for name in ("pass-around", "string-sub", "custom-select"):
            values = load_workload(name).trigger_values(100, seed=2024)
            plain = run_variant("nosec", name, 100, values=values)
            secure = run_variant("w", name, 100, values=values)
            assert len(plain.effects) == 100
            assert secure.effects == plain.effects, name
        assert time.perf_counter() - t0 < 60


def test_02_no_inter_server_traffic_for_string_sub(capsys):
    with criterion(capsys, 2, "zero S0<->S1 bytes during generation; W-Yao > 10x W-C"):
        for v in ("w-c", "w-i", "w"):
            rep = run_variant(v, "string-sub", 1)
            assert rep.data["phases"]["generate"]["inter_server_bytes"] == 0, v
        yao = run_variant("w-yao", "string-sub", 1).data
        wc = run_variant("w-c", "string-sub", 1).data
        assert yao["phases"]["generate"]["inter_server_bytes"] > 0
        assert yao["total_bytes"] > 10 * wc["total_bytes"]


def test_03_variant_byte_ordering(capsys):
    with criterion(capsys, 3, "NoSec < W-C <= W-I <= W < W-Yao platform bytes"):
        b = {v: run_variant(v, "string-sub", 3).data["platform"]["bytes"] for v in ("nosec", "w-c", "w-i", "w", "w-yao")}
        assert b["nosec"] < b["w-c"] <= b["w-i"] <= b["w"] < b["w-yao"], b


TAMPER_GROUPS = {
    "T": ["T"],
    "tout_b": ["tout0", "tout1"],
    "ain_b": ["ain0", "ain1"],
    "TokenChain": ["chain", "chain_as"],
    "TeeProof": ["proof"],
}


def test_04_tamper_abort_suite(capsys):
    with criterion(capsys, 4, "100 single-byte flips per structure all rejected with the right code"):
        failures = []
        for group, targets in TAMPER_GROUPS.items():
            for target in targets:
                reps = inject_fault("tamper", target, count=100, seed=4)
                assert len(reps) == 100
                failures += [r.to_json() for r in reps if not r.passed]
                assert all(r.effects == 0 for r in reps)
        assert not failures, failures[:3]


def test_05_replay_suite(capsys):
    with criterion(capsys, 5, "100 replayed action pairs rejected with code 4, one effect per RID"):
        dep = Deployment("w", seed=5)
        wl = load_workload("string-sub")
        dep.install(wl.spec)
        reps = inject_fault("replay", count=100, deployment=dep, workload=wl)
        assert all(r.passed for r in reps)
        assert all(r.extra["codes"] == [Code.REPLAY, Code.REPLAY] for r in reps)
        # each original fired once; none of the replays added anything
        assert len(dep.outbox) == 100
        assert len(dep.as_.rids) == 100


def test_06_proof_quantifier(capsys):
    with criterion(capsys, 6, "removing or forging any one of the 6 proofs blocks execution"):
        dep = Deployment("w", seed=6)
        wl = load_workload("string-sub")
        dep.install(wl.spec)
        cases = [f"{mode}:{b}.{i}" for mode in ("remove", "forge") for b in (0, 1) for i in range(3)]
        for case in cases:
            (rep,) = inject_fault("proof", case, deployment=dep, workload=wl)
            assert rep.passed and rep.code == Code.PROOF_FAIL and rep.effects == 0, (case, rep.to_json())
        # the deployment is still healthy afterwards
        assert dep.run_cycle(wl.spec.applet_id).ok


def test_07_token_chain_liveness(capsys):
    with criterion(capsys, 7, "lifetime-1 tokens fire every epoch for 5 epochs; stale chain expires"):
        wl = load_workload("string-sub")
        dep = Deployment("w", seed=7, access_lifetime=1)
        dep.install(wl.spec)
        mark = len(dep.net.transcript)
        for epoch in range(5):
            assert dep.clock.epoch == epoch
            assert dep.run_cycle(wl.spec.applet_id).ok, epoch
            dep.clock.advance()
        assert len(dep.outbox) == 5
        assert not [e for e in dep.net.transcript[mark:] if dep.client.name in (e.src, e.dst)]

        stale = Deployment("w", seed=8, access_lifetime=1)
        stale.install(wl.spec)
        stale.clock.advance(2)
        with stale.net.phase("poll"), stale.net.running("M0"), pytest.raises(msg.Rejected) as exc:
            stale.machines[0].poll(wl.spec.applet_id)  # epoch-0 chain, no refresh
        assert exc.value.code == Code.EXPIRED
        app0 = stale.machines[0].apps[wl.spec.applet_id]
        with pytest.raises(msg.Rejected) as exc:
            stale.as_.resolve(app0.c_at_as, app0.chain_as)
        assert exc.value.code == Code.EXPIRED


def test_08_crypto_property_suite(capsys):
    with criterion(capsys, 8, "share round-trip, marginal uniformity, ciphertext/signature tamper"):
        t0 = time.perf_counter()
        rng = Rng(8)
        for _ in range(1000):
            secret = rng.bytes(rng.randbelow(65))
            a, b = crypto.share(secret, rng)
            assert crypto.reconstruct(a, b) == secret

        secret = b"\x5a" * 8
        samples = np.frombuffer(b"".join(crypto.share(secret, rng)[0] for _ in range(10_000)), dtype=np.uint8)
        freq = np.unpackbits(samples.reshape(10_000, 8), axis=1).mean(axis=0)
        assert np.all(np.abs(freq - 0.5) <= 0.05), freq

        kp = crypto.generate_keypair("k", rng)
        ct = crypto.pk_encrypt(kp.public_key, b"attack at dawn", rng).data
        assert len(ct) == 14 + CIPHERTEXT_OVERHEAD
        for i in range(len(ct)):
            for bit in (0, 7):
                bad = bytearray(ct)
                bad[i] ^= 1 << bit
                with pytest.raises(crypto.DecryptionError):
                    crypto.pk_decrypt(kp.secret_key, bytes(bad))
        sig = crypto.sign(kp.secret_key, b"attack at dawn").data
        for i in range(len(sig)):
            bad = bytearray(sig)
            bad[i] ^= 0x01
            assert not crypto.verify(kp.public_key, b"attack at dawn", bytes(bad))
        assert not crypto.verify(kp.public_key, b"attack at dusk", sig)
        assert time.perf_counter() - t0 < 30


def _select_oracle(value: bytes, constants, templates) -> bytes:
    width = max(len(t) for t in templates)
    for const, t in zip(constants, templates):
        if value == const:
            return t.ljust(width, b"\x00")
    return templates[-1].ljust(width, b"\x00")


def _garbled(c, g_bits, e_bits, rng) -> list[int]:
    gc, sec = garble(c, rng)
    wires = np.concatenate([c.garbler_inputs, c.evaluator_inputs, c.const_wires]).astype(np.int64)
    labels = sec.select(wires, np.concatenate([g_bits, e_bits, c.const_values]).astype(np.uint8))
    return decode_outputs(gc, evaluate_garbled(c, gc, labels))


def test_09_yao_oracle_equivalence(capsys):
    with criterion(capsys, 9, "garbled == plaintext on all 8-bit select inputs and a 1000-gate circuit"):
        constants = [b"S", b"R", b"\x00"]
        templates = [b"Wear sunglasses", b"Take an umbrella", b"zero", b"Have a nice day"]
        c = build_raw_select_circuit(1, constants, [len(t) for t in templates])
        garbler, evaluator, link = Garbler(rng=Rng(90)), Evaluator(rng=Rng(91)), LocalLink()
        rnd = Rng(92)
        plain_in = b"".join(templates)
        for v in range(256):
            x = bytes([v]) + plain_in
            s0 = rnd.bytes(len(x))
            s1 = bytes(p ^ q for p, q in zip(x, s0))
            m, e = two_party_eval(c, s0, s1, link, garbler=garbler, evaluator=evaluator)
            got = bytes(p ^ q for p, q in zip(m, e))
            assert got == _select_oracle(bytes([v]), constants, templates), v
            # and against the plaintext circuit
            bits = lambda b: np.unpackbits(np.frombuffer(b, dtype=np.uint8))  # noqa: E731
            ref = evaluate_reference(c, np.concatenate([bits(s0), bits(m)]), bits(s1))
            assert bytes(np.packbits(np.array(ref, dtype=np.uint8))) == bytes(p ^ q for p, q in zip(got, m))

        np_rng = np.random.default_rng(93)
        big = random_circuit(1000, 32, 32, 32, np_rng)
        assert big.n_gates == 1000
        grng = Rng(94)
        for _ in range(100):
            g = np_rng.integers(0, 2, 32, dtype=np.uint8)
            e = np_rng.integers(0, 2, 32, dtype=np.uint8)
            assert _garbled(big, g, e, grng) == evaluate_reference(big, g, e)


def test_10_leakage_descriptor(capsys):
    with criterion(capsys, 10, "StringSub leaks only new_weather_type at block position 1"):
        d = leakage_of(load_workload("string-sub").spec)
        assert d.contributing_keys() == {"new_weather_type"}
        assert d.keys["body"] == {"new_weather_type"} and d.keys["subject"] == frozenset()
        assert d.positions["body"] == {1}
        assert template_leakage("Slept {{duration}}. Sleep early") == ({"duration"}, {1}, 3)


def test_11_pricing_model(capsys):
    with criterion(capsys, 11, "1 CPU-hour costs $0.198 and 1 GB costs $0.087"):
        assert dollar_cost(cpu_hours=1.0, gigabytes=0.0) == 0.198
        assert dollar_cost(cpu_hours=0.0, gigabytes=1.0) == 0.087
        rep = run_variant("w", "string-sub", 1).data
        assert rep["dollars"]["total"] == pytest.approx(
            rep["platform"]["cpu_seconds"] / 3600 * 0.198 + rep["platform"]["bytes"] / 1e9 * 0.087
        )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
