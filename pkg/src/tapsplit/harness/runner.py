"""Run a variant on a workload and summarise what it cost."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from tapsplit.harness.cost import BYTES_PER_GB, DEFAULT_MODEL, CostModel
from tapsplit.harness.workloads import Workload, load_workload
from tapsplit.platform import CycleResult, Deployment, Variant, get_variant
from tapsplit.transport import PLATFORM_PARTIES, Network

PHASES = ("setup", "refresh", "poll", "generate", "action")
REPORT_VERSION = 1


class RunFailed(RuntimeError):
    def __init__(self, report: RunReport, msg: str):
        super().__init__(msg)
        self.report = report


@dataclass
class RunReport:
    data: dict
    cycles: list[CycleResult] = field(default_factory=list)
    deployment: Deployment | None = None

    @property
    def effects(self) -> list[bytes]:
        return [e for c in self.cycles for e in c.effects]

    @property
    def aborts(self) -> list[CycleResult]:
        return [c for c in self.cycles if c.abort]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def _party_section(net: Network, parties, *, exclude_setup: bool = True) -> dict:
    parties = set(parties)
    keep = lambda ph: not (exclude_setup and ph == "setup")  # noqa: E731
    return {
        "bytes": net.bytes_where(lambda ph, s, d: keep(ph) and (s in parties or d in parties)),
        "bytes_out": net.bytes_where(lambda ph, s, d: keep(ph) and s in parties),
        "cpu_seconds": sum(net.cpu.get(p, 0.0) for p in parties),
        "ops": {op: n for p in sorted(parties) for op, n in sorted(net.ops.get(p, {}).items())},
    }


def summarise(dep: Deployment, workload: Workload, cycles: list[CycleResult], seed: int, model: CostModel) -> dict:
    net = dep.net
    platform = _party_section(net, PLATFORM_PARTIES)
    # ops summed across parties, not overwritten
    ops: dict[str, int] = {}
    for p in sorted(PLATFORM_PARTIES):
        for op, n in net.ops.get(p, {}).items():
            ops[op] = ops.get(op, 0) + n
    platform["ops"] = dict(sorted(ops.items()))
    n = max(len(cycles), 1)
    dollars = model(platform["cpu_seconds"] / 3600.0, platform["bytes"] / BYTES_PER_GB)
    return {
        "version": REPORT_VERSION,
        "variant": dep.variant.name,
        "workload": workload.name,
        "seed": seed,
        "clock": net.clock,
        "cycles": len(cycles),
        "executed": sum(c.executed for c in cycles),
        "status": "ok" if all(c.ok for c in cycles) else "failed",
        "platform": platform,
        "trigger_service": _party_section(net, {"TS"}),
        "action_service": _party_section(net, {"AS"}),
        "storage": {
            "app0_bytes": dep.app_sizes[workload.spec.applet_id][0],
            "app1_bytes": dep.app_sizes[workload.spec.applet_id][1],
        },
        "dollars": {
            "total": dollars,
            "per_cycle": dollars / n,
            "cpu_per_hour": model.cpu_per_hour,
            "net_per_gb": model.net_per_gb,
        },
        "phases": {
            ph: {
                "bytes": net.bytes_where(lambda p, s, d, ph=ph: p == ph),
                "inter_server_bytes": net.inter_server_bytes(ph),
            }
            for ph in PHASES
        },
        "total_bytes": net.total_bytes,
        "channels": {f"{s}->{d}": {"bytes": m.bytes, "messages": m.messages} for (s, d), m in sorted(net.meters.items())},
        "cpu": {p: net.cpu[p] for p in sorted(net.cpu)},
        "effects": [e.decode() for c in cycles for e in c.effects],
        "aborts": [c.to_json() for c in cycles if c.abort],
    }


def run_variant(
    variant: str | Variant,
    workload: str | Path | Workload,
    cycles: int = 1,
    seed: int = 0,
    *,
    values: list[str] | None = None,
    clock: str = "modeled",
    strict: bool = True,
    model: CostModel = DEFAULT_MODEL,
    epochs_per_cycle: int = 0,
    **deployment_kwargs,
) -> RunReport:
    """Install the workload's applet on a fresh deployment and fire it ``cycles`` times.

    ``values`` overrides the trigger values (default: drawn from the seed).
    ``epochs_per_cycle`` advances the epoch clock before each cycle.
    """
    wl = workload if isinstance(workload, Workload) else load_workload(workload)
    if cycles < 0:
        raise ValueError("cycles must be non-negative")
    values = list(values) if values is not None else wl.trigger_values(cycles, seed)
    if len(values) < cycles:
        raise ValueError("fewer trigger values than cycles")
    dep = Deployment(get_variant(variant), seed=seed, clock=clock, **deployment_kwargs)
    dep.install(wl.spec)
    results = []
    for value in values[:cycles]:
        if epochs_per_cycle:
            dep.clock.advance(epochs_per_cycle)
        dep.weather.weather = value
        results.append(dep.run_cycle(wl.spec.applet_id))
    report = RunReport(summarise(dep, wl, results, seed, model), results, dep)
    if strict and report.data["status"] != "ok":
        first = report.aborts[0] if report.aborts else None
        raise RunFailed(report, f"unexpected abort: {first.to_json() if first else 'no effect'}")
    return report
