"""Report comparison."""

from __future__ import annotations

import json
from pathlib import Path


def flatten(d, prefix: str = "") -> dict[str, float]:
    """Numeric leaves of a report as dotted paths."""
    out = {}
    if isinstance(d, dict):
        for k, v in d.items():
            out.update(flatten(v, f"{prefix}{k}."))
    elif isinstance(d, (int, float)) and not isinstance(d, bool):
        out[prefix[:-1]] = d
    return out


def diff(a: dict, b: dict) -> list[tuple[str, float | None, float | None]]:
    fa, fb = flatten(a), flatten(b)
    rows = []
    for key in sorted(fa.keys() | fb.keys()):
        va, vb = fa.get(key), fb.get(key)
        if va != vb:
            rows.append((key, va, vb))
    return rows


def format_diff(rows, name_a: str = "a", name_b: str = "b") -> str:
    if not rows:
        return "reports agree on every numeric field"
    width = max(len(k) for k, _, _ in rows)
    lines = [f"{'field':<{width}}  {name_a:>14}  {name_b:>14}  {'ratio':>8}"]
    for key, va, vb in rows:
        ratio = f"{vb / va:8.2f}" if va and vb is not None else "       -"
        fmt = lambda v: "-" if v is None else f"{v:.6g}"  # noqa: E731
        lines.append(f"{key:<{width}}  {fmt(va):>14}  {fmt(vb):>14}  {ratio}")
    return "\n".join(lines)


def load(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
