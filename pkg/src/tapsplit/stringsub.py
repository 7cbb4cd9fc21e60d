"""Network-free string substitution over XOR shares, plus its plaintext oracle."""

from __future__ import annotations

from collections.abc import Iterator, Mapping

from tapsplit.blocks import (
    DEFAULT_POLICY,
    BlockError,
    BlockKind,
    PaddingPolicy,
    ShareBlock,
    ShareVector,
    coalesce,
    encode_payload,
    split_blocks,
    split_literal_text,
)
from tapsplit.wire import DecodeError, Reader, Writer


class MissingKeyError(BlockError, KeyError):
    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"no trigger output value for placeholder {self.key!r}"


class KeyedShareMap(Mapping[str, ShareVector]):
    """Key name -> ShareVector (one server's half of trigOut or actInp)."""

    def __init__(self, entries: Mapping[str, ShareVector] | None = None):
        self._entries = dict(entries or {})

    def __getitem__(self, key: str) -> ShareVector:
        return self._entries[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        if isinstance(other, KeyedShareMap):
            return self._entries == other._entries
        return NotImplemented

    def __repr__(self) -> str:
        return f"KeyedShareMap({sorted(self._entries)})"

    def write(self, w: Writer, name: str | None = None) -> None:
        w.u32(len(self._entries), None if name is None else name + "#count")
        for key in sorted(self._entries):
            sub = None if name is None else f"{name}.{key}"
            w.text(key, None if sub is None else sub + "#key")
            self._entries[key].write(w, sub)

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> KeyedShareMap:
        n = r.u32()
        if n > 1 << 12:
            raise DecodeError("too many keys")
        entries = {}
        prev = None
        for _ in range(n):
            key = r.text()
            if prev is not None and key <= prev:
                raise DecodeError("keys not in canonical order")
            prev = key
            entries[key] = ShareVector.read(r)
        return cls(entries)

    @classmethod
    def decode(cls, data: bytes) -> KeyedShareMap:
        r = Reader(data)
        m = cls.read(r)
        r.done()
        return m


def _value_payload(vec: ShareVector, key: str) -> bytes:
    if len(vec) == 0:
        return b""
    if len(vec) != 1 or vec.blocks[0].is_placeholder:
        raise BlockError(f"trigger output {key!r} is not a single coalesced literal block")
    return vec.blocks[0].data


def substitute_vector(vec: ShareVector, sh_trig_out: Mapping[str, ShareVector]) -> ShareVector:
    pieces = []
    for blk in vec:
        if blk.is_placeholder:
            key = blk.key
            if key not in sh_trig_out:
                raise MissingKeyError(key)
            pieces.append(_value_payload(sh_trig_out[key], key))
        else:
            pieces.append(blk.data)
    return ShareVector((ShareBlock(BlockKind.LITERAL, b"".join(pieces)),))


def string_sub(sh_trig_out: Mapping[str, ShareVector], sh_act_inp: Mapping[str, ShareVector]) -> KeyedShareMap:
    """Substitute trigger-output shares into action-input shares, locally.

    Each placeholder is replaced by the matching trigger-output share block
    and every value collapses to one literal block.  Since the hidden segment
    headers travel inside the shares, concatenating shares is the same as
    sharing the concatenation; no interaction with the other server is
    needed.
    """
    return KeyedShareMap({k: substitute_vector(v, sh_trig_out) for k, v in sh_act_inp.items()})


def plaintext_substitute(template: str, trig_out: Mapping[str, str]) -> str:
    out = []
    for b in split_blocks(template):
        if b.is_placeholder:
            if b.key not in trig_out:
                raise MissingKeyError(b.key)
            out.append(trig_out[b.key])
        else:
            out.append(b.text())
    return "".join(out)


def padded_substitute(
    template: str,
    trig_out: Mapping[str, str],
    policy: PaddingPolicy = DEFAULT_POLICY,
    value_policy: PaddingPolicy | None = None,
) -> bytes:
    """Padded payload the share-domain substitution should reconstruct to."""
    value_policy = value_policy or policy
    parts = []
    for b in coalesce(split_blocks(template), policy):
        if b.is_placeholder:
            if b.key not in trig_out:
                raise MissingKeyError(b.key)
            for vb in coalesce(split_literal_text(trig_out[b.key]), value_policy):
                parts.append(encode_payload(vb))
        else:
            parts.append(encode_payload(b))
    return b"".join(parts)
