"""Declarative workload files (see ``workloads/README.md``)."""

from __future__ import annotations

import json
import random
import string
from dataclasses import dataclass, field
from pathlib import Path

from tapsplit.platform import AppletSpec

BUILTIN_DIR = Path(__file__).with_name("workloads")
_ALPHABET = string.ascii_letters + string.digits + " .,:;!?-'()"


@dataclass
class Workload:
    name: str
    spec: AppletSpec
    description: str = ""
    value_pool: list[str] = field(default_factory=list)

    def trigger_values(self, n: int, seed: int) -> list[str]:
        """``n`` reproducible trigger values: pool draws mixed with random strings."""
        rnd = random.Random(f"{self.name}/{seed}")
        out = []
        for _ in range(n):
            if self.value_pool and rnd.random() < 0.5:
                out.append(rnd.choice(self.value_pool))
            else:
                out.append("".join(rnd.choice(_ALPHABET) for _ in range(rnd.randint(1, 40))))
        return out


def builtin_workloads() -> list[str]:
    return sorted(p.stem for p in BUILTIN_DIR.glob("*.json"))


def load_workload(ref: str | Path) -> Workload:
    """A workload by file path or by built-in name (``string-sub`` etc.)."""
    path = Path(ref)
    if not path.exists():
        path = BUILTIN_DIR / f"{ref}.json"
        if not path.exists():
            raise FileNotFoundError(f"no workload {ref!r}; built-ins: {', '.join(builtin_workloads())}")
    d = json.loads(path.read_text())
    return Workload(
        name=d.get("name", path.stem),
        spec=AppletSpec.from_json(d["applet"]),
        description=d.get("description", ""),
        value_pool=list(d.get("value_pool", [])),
    )
