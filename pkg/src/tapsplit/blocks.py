"""String blocking, padding, coalescing, and per-value XOR share vectors.

A template string is split into Literal blocks (words, and every space or
punctuation character on its own) and Placeholder blocks (``{{key}}``).
Runs of adjacent literals are padded piecewise and merged so the platform
only ever sees padded, merged literal lengths.

Each literal block travels as a shared *payload*: for every merged piece a
hidden 8-byte header ``[original length:4][padded length:4]`` followed by
the zero-padded piece.  The headers are shared along with the content, so
the servers learn nothing beyond total padded size.
"""

from __future__ import annotations

import enum
import re
import string
import struct
from dataclasses import dataclass, field

from tapsplit import crypto
from tapsplit.wire import DecodeError, Reader, Writer

PUNCTUATION = frozenset(string.punctuation + " ")
SEGMENT_HEADER = 8
_PLACEHOLDER = re.compile(r"\{\{([^{}]+)\}\}")


class BlockError(ValueError):
    pass


class BlockParseError(BlockError):
    pass


class PaddingError(BlockError):
    pass


class ShapeMismatchError(BlockError):
    pass


class UnsubstitutedKeyError(BlockError):
    pass


class BlockKind(enum.IntEnum):
    LITERAL = 0
    PLACEHOLDER = 1


class PaddingMode(enum.Enum):
    FIXED_MAX = "fixed-max"
    NEXT_POWER_OF_TWO = "pow2"
    MULTIPLE_OF = "multiple-of"


@dataclass(frozen=True)
class PaddingPolicy:
    mode: PaddingMode = PaddingMode.NEXT_POWER_OF_TWO
    parameter: int = 0

    def __post_init__(self):
        if self.mode is not PaddingMode.NEXT_POWER_OF_TWO and self.parameter <= 0:
            raise ValueError(f"{self.mode.value} needs a positive size parameter")

    @classmethod
    def fixed_max(cls, size: int) -> PaddingPolicy:
        return cls(PaddingMode.FIXED_MAX, size)

    @classmethod
    def next_power_of_two(cls) -> PaddingPolicy:
        return cls(PaddingMode.NEXT_POWER_OF_TWO, 0)

    @classmethod
    def multiple_of(cls, n: int) -> PaddingPolicy:
        return cls(PaddingMode.MULTIPLE_OF, n)

    def padded_size(self, n: int) -> int:
        if self.mode is PaddingMode.FIXED_MAX:
            if n > self.parameter:
                raise PaddingError(f"{n} bytes exceeds fixed maximum {self.parameter}")
            return self.parameter
        if n == 0:
            return 0
        if self.mode is PaddingMode.NEXT_POWER_OF_TWO:
            return 1 << (n - 1).bit_length()
        return -(-n // self.parameter) * self.parameter

    def to_json(self) -> dict:
        return {"mode": self.mode.value, "parameter": self.parameter}

    @classmethod
    def from_json(cls, d: dict) -> PaddingPolicy:
        return cls(PaddingMode(d["mode"]), int(d.get("parameter", 0)))


DEFAULT_POLICY = PaddingPolicy.next_power_of_two()


@dataclass(frozen=True)
class Block:
    """A literal or placeholder fragment.

    For literals, ``content`` is the (possibly padded, possibly merged) bytes
    and ``segments`` lists ``(original_length, padded_length)`` for each
    merged piece.  For placeholders, ``content`` is the key name.
    """

    kind: BlockKind
    content: bytes
    original_length: int
    segments: tuple[tuple[int, int], ...] = ()

    @classmethod
    def literal(cls, content: bytes) -> Block:
        return cls(BlockKind.LITERAL, content, len(content), ((len(content), len(content)),))

    @classmethod
    def placeholder(cls, key: str) -> Block:
        if not key or "{" in key or "}" in key:
            raise BlockParseError(f"invalid placeholder key {key!r}")
        raw = key.encode("utf-8")
        return cls(BlockKind.PLACEHOLDER, raw, len(raw))

    @property
    def is_placeholder(self) -> bool:
        return self.kind is BlockKind.PLACEHOLDER

    @property
    def key(self) -> str:
        return self.content.decode("utf-8")

    @property
    def padded_length(self) -> int:
        return len(self.content)

    def text(self) -> str:
        """Unpadded source text (braces restored for placeholders)."""
        if self.is_placeholder:
            return "{{" + self.key + "}}"
        return strip_padding(self).decode("utf-8")


def _split_literal(text: str, out: list[Block]) -> None:
    word: list[str] = []
    for ch in text:
        if ch in PUNCTUATION:
            if word:
                out.append(Block.literal("".join(word).encode("utf-8")))
                word = []
            out.append(Block.literal(ch.encode("utf-8")))
        else:
            word.append(ch)
    if word:
        out.append(Block.literal("".join(word).encode("utf-8")))


def split_blocks(s: str) -> list[Block]:
    """Split at spaces and punctuation; ``{{key}}`` becomes one placeholder.

    Any brace that is not part of a well-formed placeholder is a parse error.
    """
    out: list[Block] = []
    pos = 0
    for m in _PLACEHOLDER.finditer(s):
        literal = s[pos:m.start()]
        if "{" in literal or "}" in literal:
            raise BlockParseError(f"unbalanced brace in {literal!r}")
        _split_literal(literal, out)
        out.append(Block.placeholder(m.group(1)))
        pos = m.end()
    tail = s[pos:]
    if "{" in tail or "}" in tail:
        raise BlockParseError(f"unbalanced brace in {tail!r}")
    _split_literal(tail, out)
    return out


def split_literal_text(s: str) -> list[Block]:
    """Split a value that may not contain placeholders (braces are plain text)."""
    out: list[Block] = []
    _split_literal(s, out)
    return out


def pad_block(b: Block, policy: PaddingPolicy = DEFAULT_POLICY) -> Block:
    if b.is_placeholder:
        return b
    pieces = []
    segments = []
    off = 0
    for orig, padded in b.segments:
        raw = b.content[off:off + orig]
        off += padded
        try:
            size = policy.padded_size(orig)
        except PaddingError as exc:
            raise PaddingError(f"block {raw!r}: {exc}") from None
        pieces.append(raw + bytes(size - orig))
        segments.append((orig, size))
    return Block(BlockKind.LITERAL, b"".join(pieces), b.original_length, tuple(segments))


def strip_padding(b: Block) -> bytes:
    if b.is_placeholder:
        return b.content
    out = []
    off = 0
    for orig, padded in b.segments:
        out.append(b.content[off:off + orig])
        off += padded
    return b"".join(out)


def _merge(run: list[Block]) -> Block:
    return Block(
        BlockKind.LITERAL,
        b"".join(b.content for b in run),
        sum(b.original_length for b in run),
        tuple(seg for b in run for seg in b.segments),
    )


def coalesce(blocks: list[Block], policy: PaddingPolicy = DEFAULT_POLICY) -> list[Block]:
    """Pad each literal, then merge maximal literal runs into one block."""
    out: list[Block] = []
    run: list[Block] = []
    for b in blocks:
        if b.is_placeholder:
            if run:
                out.append(_merge(run))
                run = []
            out.append(b)
        else:
            run.append(pad_block(b, policy))
    if run:
        out.append(_merge(run))
    return out


# -- hidden payload encoding -------------------------------------------------


def encode_payload(b: Block) -> bytes:
    """Literal block -> bytes that get secret-shared (headers included)."""
    if b.is_placeholder:
        raise BlockError("placeholders have no shared payload")
    parts = []
    off = 0
    for orig, padded in b.segments:
        parts.append(struct.pack(">II", orig, padded))
        parts.append(b.content[off:off + padded])
        off += padded
    return b"".join(parts)


def payload_size(b: Block) -> int:
    return len(b.content) + SEGMENT_HEADER * len(b.segments)


def decode_payload(data: bytes) -> Block:
    """Parse a reconstructed payload back into a literal block.

    A zero header (both lengths 0) terminates the payload; everything after
    it must be zero fill.  This lets fixed-width circuit outputs carry
    shorter payloads.
    """
    segments = []
    content = []
    off = 0
    n = len(data)
    while off < n:
        if n - off < SEGMENT_HEADER:
            raise BlockError("truncated segment header")
        orig, padded = struct.unpack_from(">II", data, off)
        if orig == 0 and padded == 0:
            if any(data[off:]):
                raise BlockError("non-zero bytes after payload terminator")
            break
        off += SEGMENT_HEADER
        if orig > padded or off + padded > n:
            raise BlockError("segment length out of range")
        segments.append((orig, padded))
        content.append(data[off:off + padded])
        off += padded
    body = b"".join(content)
    return Block(BlockKind.LITERAL, body, sum(o for o, _ in segments), tuple(segments))


# -- share vectors -----------------------------------------------------------


@dataclass(frozen=True)
class ShareBlock:
    kind: BlockKind
    data: bytes

    @property
    def is_placeholder(self) -> bool:
        return self.kind is BlockKind.PLACEHOLDER

    @property
    def key(self) -> str:
        return self.data.decode("utf-8")


@dataclass(frozen=True)
class ShareVector:
    blocks: tuple[ShareBlock, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def profile(self) -> tuple[tuple[int, int], ...]:
        """(kind, byte length) per block; equal on both servers' halves."""
        return tuple((int(b.kind), len(b.data)) for b in self.blocks)

    def placeholders(self) -> list[str]:
        return [b.key for b in self.blocks if b.is_placeholder]

    def write(self, w: Writer, name: str | None = None) -> None:
        w.u32(len(self.blocks), None if name is None else name + "#count")
        for i, b in enumerate(self.blocks):
            sub = None if name is None else f"{name}[{i}]"
            w.u8(int(b.kind), None if sub is None else sub + "#kind")
            w.blob(b.data, sub)

    def encode(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def read(cls, r: Reader) -> ShareVector:
        count = r.u32()
        if count > 1 << 16:
            raise DecodeError("too many blocks")
        blocks = []
        for _ in range(count):
            kind = r.u8()
            if kind not in (0, 1):
                raise DecodeError(f"unknown block kind {kind}")
            blocks.append(ShareBlock(BlockKind(kind), r.blob()))
        return cls(tuple(blocks))

    @classmethod
    def decode(cls, data: bytes) -> ShareVector:
        r = Reader(data)
        v = cls.read(r)
        r.done()
        return v


def share_blocks(blocks: list[Block], rng: crypto.Rng | None = None) -> tuple[ShareVector, ShareVector]:
    left, right = [], []
    for b in blocks:
        if b.is_placeholder:
            sb = ShareBlock(BlockKind.PLACEHOLDER, b.content)
            left.append(sb)
            right.append(sb)
        else:
            k0, k1 = crypto.share(encode_payload(b), rng)
            left.append(ShareBlock(BlockKind.LITERAL, k0))
            right.append(ShareBlock(BlockKind.LITERAL, k1))
    return ShareVector(tuple(left)), ShareVector(tuple(right))


def share_value(
    v: str,
    policy: PaddingPolicy = DEFAULT_POLICY,
    rng: crypto.Rng | None = None,
    *,
    literal_only: bool = False,
) -> tuple[ShareVector, ShareVector]:
    """Split, coalesce, pad and XOR-share ``v``.

    ``literal_only`` treats braces as text; services use it for runtime
    values, which never carry placeholders.
    """
    blocks = split_literal_text(v) if literal_only else split_blocks(v)
    return share_blocks(coalesce(blocks, policy), rng)


def reconstruct_blocks(a: ShareVector, b: ShareVector) -> list[Block]:
    if len(a) != len(b):
        raise ShapeMismatchError(f"block counts differ: {len(a)} != {len(b)}")
    out = []
    for x, y in zip(a, b):
        if x.kind != y.kind or len(x.data) != len(y.data):
            raise ShapeMismatchError("block kinds or lengths differ")
        if x.is_placeholder:
            if x.data != y.data:
                raise ShapeMismatchError("placeholder keys differ")
            raise UnsubstitutedKeyError(f"unsubstituted key {x.key!r}")
        out.append(decode_payload(crypto.reconstruct(x.data, y.data)))
    return out


def reconstruct_padded(a: ShareVector, b: ShareVector) -> bytes:
    """XOR of literal payloads, concatenated, still padded and with headers."""
    if len(a) != len(b):
        raise ShapeMismatchError(f"block counts differ: {len(a)} != {len(b)}")
    parts = []
    for x, y in zip(a, b):
        if x.kind != y.kind or len(x.data) != len(y.data):
            raise ShapeMismatchError("block kinds or lengths differ")
        if x.is_placeholder:
            raise UnsubstitutedKeyError(f"unsubstituted key {x.key!r}")
        parts.append(crypto.reconstruct(x.data, y.data))
    return b"".join(parts)


def reconstruct_value(a: ShareVector, b: ShareVector) -> str:
    raw = b"".join(strip_padding(blk) for blk in reconstruct_blocks(a, b))
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise BlockError("reconstructed value is not valid utf-8") from exc
