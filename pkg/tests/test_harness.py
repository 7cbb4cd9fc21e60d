import json

import pytest

from tapsplit.harness import cli
from tapsplit.harness.cost import CostModel, dollar_cost
from tapsplit.harness.faults import TARGETS, inject_fault
from tapsplit.harness.leakage import leakage_of, template_leakage
from tapsplit.harness.report import diff, flatten
from tapsplit.harness.runner import RunFailed, run_variant
from tapsplit.harness.workloads import builtin_workloads, load_workload


def test_builtin_workloads():
    assert set(builtin_workloads()) >= {"string-sub", "pass-around", "custom-select"}
    wl = load_workload("string-sub")
    vals = wl.trigger_values(50, 1)
    assert vals == wl.trigger_values(50, 1)
    assert all(1 <= len(v) <= 40 for v in vals)


def test_cost_model():
    assert dollar_cost(cpu_hours=1, gigabytes=0) == pytest.approx(0.198)
    assert dollar_cost(cpu_hours=0, gigabytes=1) == pytest.approx(0.087)
    assert CostModel(1.0, 2.0)(2, 3) == pytest.approx(8.0)


def test_leakage_descriptors():
    d = leakage_of(load_workload("string-sub").spec)
    assert d.contributing_keys() == {"new_weather_type"}
    assert d.positions["body"] == {1}
    assert template_leakage("Slept {{duration}}. Sleep early") == ({"duration"}, {1}, 3)
    sel = leakage_of(load_workload("custom-select").spec)
    assert sel.keys["body"] == {"new_weather_type"}
    assert "#" not in json.dumps(sel.public)


@pytest.mark.parametrize("target", sorted(TARGETS))
def test_tamper_targets(target):
    reps = inject_fault("tamper", target, count=5, seed=2)
    assert all(r.passed for r in reps), [r.to_json() for r in reps if not r.passed]


def test_malicious_scripts():
    for s in ("i", "ii", "iii", "iv", "v"):
        (rep,) = inject_fault("malicious", s)
        assert rep.passed, rep.to_json()


def test_tamper_needs_active_mode():
    with pytest.raises(ValueError):
        inject_fault("tamper", "T", variant="w-c")


def test_run_failed_carries_report():
    def bad(env):
        return None if env.phase == "action" else env.data

    # strict runs raise when a cycle aborts
    from tapsplit.harness import runner
    from tapsplit.platform import Deployment

    orig = Deployment.run_cycle

    def faulty(self, applet_id):
        self.net.interceptors[:] = [bad]
        return orig(self, applet_id)

    Deployment.run_cycle = faulty
    try:
        with pytest.raises(RunFailed) as exc:
            runner.run_variant("w", "string-sub", 1)
        assert exc.value.report.data["status"] == "failed"
    finally:
        Deployment.run_cycle = orig


def test_report_diff():
    a = run_variant("w-c", "string-sub", 1).data
    b = run_variant("w", "string-sub", 1).data
    flat = flatten(a)
    assert "platform.bytes" in flat
    assert any(k == "platform.bytes" for k, *_ in diff(a, b))


def test_cli_run_and_diff(tmp_path, capsys):
    r1, r2 = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["run", "--variant", "w", "--workload", "string-sub", "--cycles", "2", "--report", str(r1)]) == 0
    assert cli.main(["run", "--variant", "nosec", "--workload", "string-sub", "--report", str(r2)]) == 0
    assert json.loads(r1.read_text())["executed"] == 2
    assert cli.main(["report", "diff", str(r1), str(r2)]) == 0
    assert "platform.bytes" in capsys.readouterr().out


def test_cli_install_and_fire(tmp_path, capsys):
    spec = tmp_path / "applet.json"
    spec.write_text(json.dumps(load_workload("pass-around").spec.to_json()))
    store = str(tmp_path / "store")
    assert cli.main(["install", "--spec", str(spec), "--store", store]) == 0
    assert cli.main(["install", "--spec", str(spec), "--store", store]) == 1
    capsys.readouterr()
    assert cli.main(["fire", "weather-email-pass", "--store", store, "--value", "hail"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["executed"] and "hail" in out["effects"][0]
    assert cli.main(["fire", "weather-email-pass", "--store", store, "--times", "2"]) == 0


def test_cli_fault_and_leakage(capsys):
    assert cli.main(["fault", "--kind", "replay"]) == 0
    assert cli.main(["fault", "--kind", "proof", "--target", "forge:1.2"]) == 0
    assert cli.main(["leakage", "--workload", "string-sub"]) == 0
    assert "new_weather_type" in capsys.readouterr().out
