"""filterCode descriptors.

Three kinds cover the workloads: pass a trigger value through, substitute
trigger values into templates, or pick one of several templates depending
on a trigger value (``CustomSelect``).
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace


class FilterKind(str, enum.Enum):
    PASS_AROUND = "pass-around"
    STRING_SUB = "string-sub"
    CUSTOM_SELECT = "custom-select"


class FilterCodeError(ValueError):
    pass


@dataclass(frozen=True)
class FilterCode:
    kind: FilterKind
    key: str = ""
    output_key: str = ""
    cases: tuple[tuple[str, str], ...] = ()
    default: str = ""

    def __post_init__(self):
        if self.kind is FilterKind.CUSTOM_SELECT:
            if not self.cases:
                raise FilterCodeError("custom select needs at least one case")
            if not self.key or not self.output_key:
                raise FilterCodeError("custom select needs key and output_key")
        if self.kind is FilterKind.PASS_AROUND and (not self.key or not self.output_key):
            raise FilterCodeError("pass-around needs key and output_key")

    @classmethod
    def pass_around(cls, key: str, output_key: str = "body") -> FilterCode:
        return cls(FilterKind.PASS_AROUND, key=key, output_key=output_key)

    @classmethod
    def string_sub(cls) -> FilterCode:
        return cls(FilterKind.STRING_SUB)

    @classmethod
    def custom_select(cls, key: str, cases, default: str, output_key: str = "body") -> FilterCode:
        return cls(FilterKind.CUSTOM_SELECT, key, output_key, tuple((m, t) for m, t in cases), default)

    # Shared-template names for custom select; the template text itself is
    # secret-shared under these actInp keys and stripped from the public view.
    def case_keys(self) -> list[str]:
        return [f"{self.output_key}#{i}" for i in range(len(self.cases))] + [f"{self.output_key}#default"]

    def case_templates(self) -> dict[str, str]:
        return dict(zip(self.case_keys(), [t for _, t in self.cases] + [self.default]))

    def public_view(self) -> FilterCode:
        if self.kind is not FilterKind.CUSTOM_SELECT:
            return self
        return replace(self, cases=tuple((m, "") for m, _ in self.cases), default="")

    def to_json(self) -> dict:
        d = {"kind": self.kind.value}
        if self.key:
            d["key"] = self.key
        if self.output_key:
            d["output_key"] = self.output_key
        if self.cases:
            d["cases"] = [list(c) for c in self.cases]
            d["default"] = self.default
        return d

    @classmethod
    def from_json(cls, d: dict) -> FilterCode:
        try:
            kind = FilterKind(d["kind"])
        except (KeyError, ValueError) as exc:
            raise FilterCodeError(f"bad filter kind in {d!r}") from exc
        return cls(
            kind,
            d.get("key", ""),
            d.get("output_key", ""),
            tuple((str(m), str(t)) for m, t in d.get("cases", ())),
            d.get("default", ""),
        )

    def encode(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()

    @classmethod
    def decode(cls, data: bytes) -> FilterCode:
        try:
            return cls.from_json(json.loads(data))
        except (UnicodeDecodeError, json.JSONDecodeError, TypeError) as exc:
            raise FilterCodeError("malformed filter code") from exc

    def evaluate(self, templates: dict[str, str], trig_out: dict[str, str]) -> dict[str, str]:
        """Plaintext semantics (what the baseline platform computes)."""
        from tapsplit.stringsub import plaintext_substitute

        out = {k: plaintext_substitute(t, trig_out) for k, t in templates.items()}
        if self.kind is FilterKind.PASS_AROUND:
            out[self.output_key] = trig_out[self.key]
        elif self.kind is FilterKind.CUSTOM_SELECT:
            value = trig_out[self.key]
            chosen = next((t for m, t in self.cases if m == value), self.default)
            out[self.output_key] = plaintext_substitute(chosen, trig_out)
        return out
