import dataclasses

import pytest

from tapsplit import messages as msg
from tapsplit.harness.faults import inject_fault
from tapsplit.harness.runner import run_variant
from tapsplit.harness.workloads import load_workload
from tapsplit.messages import Code
from tapsplit.platform import VARIANTS, AppletSpec, Deployment, PlatformError
from tapsplit.services import RidStore
from tapsplit.transport import PLATFORM_PARTIES

WORKLOADS = ("string-sub", "pass-around", "custom-select")
SECRET = "tornado-warning-7f3c"


def deploy(variant, workload="string-sub", seed=0, **kw):
    wl = load_workload(workload)
    dep = Deployment(variant, seed=seed, **kw)
    dep.install(wl.spec)
    return dep, wl


@pytest.mark.parametrize("variant", sorted(VARIANTS))
@pytest.mark.parametrize("workload", WORKLOADS)
def test_every_variant_matches_plaintext(variant, workload):
    values = ["sunny", "rainy", SECRET]
    want = run_variant("nosec", workload, 3, values=values).effects
    assert run_variant(variant, workload, 3, values=values).effects == want


@pytest.mark.parametrize("variant", ["w-c", "w-i", "w"])
def test_trigger_service_never_sees_action_side(variant):
    dep, wl = deploy(variant)
    dep.weather.weather = "snow"
    assert dep.run_cycle(wl.spec.applet_id).ok
    ts_seen = b"".join(dep.ts.transcript)
    as_seen = b"".join(dep.as_.transcript)
    assert wl.spec.action_endpoint.encode() not in ts_seen
    assert wl.spec.trigger_endpoint.encode() not in as_seen
    assert b"city" not in as_seen


@pytest.mark.parametrize("variant", ["w-yao", "w-c", "w-i", "w"])
@pytest.mark.parametrize("workload", WORKLOADS)
def test_platform_never_sees_plaintext_values_or_tokens(variant, workload):
    dep, wl = deploy(variant, workload)
    dep.weather.weather = SECRET
    res = dep.run_cycle(wl.spec.applet_id)
    assert res.ok
    tokens = list(dep.ts.tokens.records) + list(dep.as_.tokens.records)
    for env in dep.net.transcript:
        if env.src in PLATFORM_PARTIES or env.dst in PLATFORM_PARTIES:
            assert SECRET.encode() not in env.data, (env.src, env.dst)
            assert not any(t in env.data for t in tokens)


def test_nosec_platform_sees_plaintext():
    dep, wl = deploy("nosec")
    dep.weather.weather = SECRET
    dep.run_cycle(wl.spec.applet_id)
    assert any(SECRET.encode() in env.data for env in dep.net.transcript if env.dst == "M0")


def test_meters_add_up():
    rep = run_variant("w", "custom-select", 2)
    d = rep.data
    assert sum(c["bytes"] for c in d["channels"].values()) == d["total_bytes"]
    assert sum(p["bytes"] for p in d["phases"].values()) == d["total_bytes"]


def test_reports_are_deterministic():
    a = run_variant("w", "string-sub", 2, seed=3).data
    b = run_variant("w", "string-sub", 2, seed=3).data
    for d in (a, b):
        d.pop("cpu")
        for sec in ("platform", "trigger_service", "action_service"):
            d[sec].pop("cpu_seconds")
        d.pop("dollars")
    assert a == b


def test_tid_swap_is_a_mismatch():
    wl = load_workload("string-sub")
    dep = Deployment("w", seed=1)
    dep.install(wl.spec)
    other = dataclasses.replace(wl.spec, applet_id="other-applet")
    dep.install(other)

    def swap(env):
        if env.phase == "generate" and env.src == "M0" and env.dst == "T0.0":
            _, signed = msg.read_tee_generate(env.data[1:])
            return msg.tee_generate(other.applet_id, signed).getvalue()
        return env.data

    dep.net.interceptors.append(swap)
    res = dep.run_cycle(wl.spec.applet_id)
    assert (res.code, res.party, res.effects) == (Code.MISMATCH, "T0.0", [])


def test_withheld_action_half_times_out():
    (rep,) = inject_fault("drop", "ain0", variant="w")
    assert rep.passed and rep.abort == "timeout" and rep.effects == 0


def test_forward_index_is_configurable():
    dep, wl = deploy("w", forward_index=2)
    assert dep.run_cycle(wl.spec.applet_id).ok
    with pytest.raises(ValueError):
        Deployment("w", forward_index=3)


def test_chains_refresh_each_epoch():
    dep, wl = deploy("w")
    for _ in range(3):
        dep.clock.advance()
        assert dep.run_cycle(wl.spec.applet_id).ok


def test_rid_store_survives_restart(tmp_path):
    path = tmp_path / "rids.bin"
    store = RidStore(path)
    assert store.add(b"r" * 16)
    assert not store.add(b"r" * 16)
    again = RidStore(path)
    assert b"r" * 16 in again and not again.add(b"r" * 16)


def test_persistent_deployment(tmp_path):
    dep, wl = deploy("w", store_dir=tmp_path)
    assert dep.run_cycle(wl.spec.applet_id).ok
    assert (tmp_path / "outbox.jsonl").read_text().count("\n") == 1
    assert (tmp_path / "rids.bin").stat().st_size == 16


def test_install_errors():
    dep, wl = deploy("w")
    with pytest.raises(PlatformError):
        dep.install(wl.spec)
    with pytest.raises(PlatformError):
        dep.run_cycle("nope")


def test_spec_round_trip():
    for name in WORKLOADS:
        spec = load_workload(name).spec
        assert AppletSpec.from_json(spec.to_json()) == spec
