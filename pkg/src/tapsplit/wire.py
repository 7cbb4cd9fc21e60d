"""Canonical binary encoding helpers.

All integers are big-endian.  Variable-length fields carry a 4-byte length
prefix.  :class:`Reader` is strict: every decode must consume the buffer
exactly, so a flipped length byte surfaces as :class:`DecodeError`.

:class:`Writer` optionally records the byte span of every named field; the
fault-injection tooling uses those spans to predict which check a flipped
byte should trip.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager


class DecodeError(ValueError):
    pass


MAX_FIELD = 1 << 24


class Writer:
    def __init__(self):
        self._buf = bytearray()
        self.spans: list[tuple[str, int, int]] = []
        self._prefix: list[str] = []

    def _mark(self, name: str | None, start: int):
        if name is not None:
            self.spans.append(("/".join([*self._prefix, name]), start, len(self._buf)))

    @contextmanager
    def scope(self, name: str):
        start = len(self._buf)
        self._prefix.append(name)
        try:
            yield self
        finally:
            self._prefix.pop()
            self._mark(name, start)

    def u8(self, v: int, name: str | None = None) -> Writer:
        start = len(self._buf)
        self._buf.append(v & 0xFF)
        self._mark(name, start)
        return self

    def u32(self, v: int, name: str | None = None) -> Writer:
        start = len(self._buf)
        self._buf += struct.pack(">I", v)
        self._mark(name, start)
        return self

    def raw(self, data: bytes, name: str | None = None) -> Writer:
        start = len(self._buf)
        self._buf += data
        self._mark(name, start)
        return self

    def blob(self, data: bytes, name: str | None = None) -> Writer:
        """Length-prefixed bytes; the span named ``name`` covers payload only,
        the prefix is recorded as ``name#len``."""
        start = len(self._buf)
        self._buf += struct.pack(">I", len(data))
        self._mark(None if name is None else name + "#len", start)
        return self.raw(data, name)

    def text(self, s: str, name: str | None = None) -> Writer:
        return self.blob(s.encode("utf-8"), name)

    def getvalue(self) -> bytes:
        return bytes(self._buf)

    def __len__(self) -> int:
        return len(self._buf)


class Reader:
    def __init__(self, data: bytes):
        self._data = memoryview(bytes(data))
        self._pos = 0

    def _take(self, n: int) -> bytes:
        if n < 0 or self._pos + n > len(self._data):
            raise DecodeError(f"truncated: need {n} bytes at offset {self._pos}")
        out = self._data[self._pos:self._pos + n].tobytes()
        self._pos += n
        return out

    def u8(self) -> int:
        return self._take(1)[0]

    def u32(self) -> int:
        return struct.unpack(">I", self._take(4))[0]

    def raw(self, n: int) -> bytes:
        return self._take(n)

    def blob(self) -> bytes:
        n = self.u32()
        if n > MAX_FIELD:
            raise DecodeError(f"field length {n} exceeds limit")
        return self._take(n)

    def text(self) -> str:
        try:
            return self.blob().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError("invalid utf-8") from exc

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def done(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{len(self._data) - self._pos} trailing bytes")
