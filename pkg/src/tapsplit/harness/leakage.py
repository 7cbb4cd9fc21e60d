"""What the platform may learn about an applet, computed from its spec alone.

Three parts: the trigger-output keys each actInp value draws on, the block
positions where substitutions happen, and the public filter code with both
endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

from tapsplit.blocks import DEFAULT_POLICY, PaddingPolicy, coalesce, split_blocks
from tapsplit.filtercode import FilterKind
from tapsplit.platform import AppletSpec


@dataclass
class LeakageDescriptor:
    keys: dict[str, frozenset[str]]  # actInp key -> contributing trigOut keys
    positions: dict[str, frozenset[int]]  # shared template -> placeholder block indices
    block_counts: dict[str, int]
    public: dict  # filter code (templates removed) and endpoints

    def contributing_keys(self) -> frozenset[str]:
        return frozenset().union(*self.keys.values()) if self.keys else frozenset()

    def to_json(self) -> dict:
        return {
            "keys": {k: sorted(v) for k, v in sorted(self.keys.items())},
            "positions": {k: sorted(v) for k, v in sorted(self.positions.items())},
            "block_counts": dict(sorted(self.block_counts.items())),
            "public": self.public,
        }


def template_leakage(template: str, policy: PaddingPolicy = DEFAULT_POLICY) -> tuple[frozenset[str], frozenset[int], int]:
    blocks = coalesce(split_blocks(template), policy)
    keys = frozenset(b.key for b in blocks if b.is_placeholder)
    pos = frozenset(i for i, b in enumerate(blocks) if b.is_placeholder)
    return keys, pos, len(blocks)


def leakage_of(spec: AppletSpec, policy: PaddingPolicy = DEFAULT_POLICY) -> LeakageDescriptor:
    fc = spec.fc
    keys, positions, counts = {}, {}, {}
    for name, template in spec.all_templates().items():
        k, p, n = template_leakage(template, policy)
        positions[name], counts[name] = p, n
        keys[name] = k
    if fc.kind is FilterKind.CUSTOM_SELECT:
        # the selected value draws on the compared key and on whatever the cases substitute
        case = fc.case_keys()
        keys[fc.output_key] = frozenset({fc.key}).union(*(keys.pop(c) for c in case))
    output = set(spec.output_keys())
    return LeakageDescriptor(
        keys={k: v for k, v in keys.items() if k in output},
        positions=positions,
        block_counts=counts,
        public={
            "filter": fc.public_view().to_json(),
            "trigger_endpoint": spec.trigger_endpoint,
            "action_endpoint": spec.action_endpoint,
        },
    )
