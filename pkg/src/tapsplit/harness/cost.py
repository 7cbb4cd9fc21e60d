"""Linear dollar-cost model: CPU hours at ``C`` plus gigabytes moved at ``D``."""

from __future__ import annotations

from dataclasses import dataclass

BYTES_PER_GB = 10**9


@dataclass(frozen=True)
class CostModel:
    cpu_per_hour: float = 0.198  # one core of an SGX-capable cloud VM
    net_per_gb: float = 0.087  # outbound transfer

    def __call__(self, cpu_hours: float, gigabytes: float) -> float:
        return cpu_hours * self.cpu_per_hour + gigabytes * self.net_per_gb


DEFAULT_MODEL = CostModel()


def dollar_cost(report=None, model: CostModel = DEFAULT_MODEL, *, cpu_hours: float | None = None, gigabytes: float | None = None) -> float:
    """Dollars for a run report (platform CPU and platform bytes), or for explicit amounts."""
    if report is not None:
        plat = report["platform"] if isinstance(report, dict) else report.data["platform"]
        cpu_hours = plat["cpu_seconds"] / 3600.0 if cpu_hours is None else cpu_hours
        gigabytes = plat["bytes"] / BYTES_PER_GB if gigabytes is None else gigabytes
    if cpu_hours is None or gigabytes is None:
        raise ValueError("need a report or both cpu_hours and gigabytes")
    if cpu_hours < 0 or gigabytes < 0:
        raise ValueError("resources cannot be negative")
    return model(cpu_hours, gigabytes)
