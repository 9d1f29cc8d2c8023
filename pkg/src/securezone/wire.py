"""Big-endian length-prefixed binary records.

Every on-disk and on-air format in the package is built from these
primitives, so the byte layout documented in FORMATS.md follows directly
from the order of ``Writer`` calls in each ``to_bytes``.
"""

from __future__ import annotations

import struct

from .errors import DecodeError


class Writer:
    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def raw(self, data: bytes) -> "Writer":
        self._parts.append(bytes(data))
        return self

    def u8(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">B", v))
        return self

    def u16(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">H", v))
        return self

    def u32(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">I", v))
        return self

    def u64(self, v: int) -> "Writer":
        self._parts.append(struct.pack(">Q", v))
        return self

    def blob16(self, data: bytes) -> "Writer":
        if len(data) > 0xFFFF:
            raise ValueError("field exceeds 16-bit length prefix")
        return self.u16(len(data)).raw(data)

    def blob32(self, data: bytes) -> "Writer":
        return self.u32(len(data)).raw(data)

    def str16(self, s: str) -> "Writer":
        return self.blob16(s.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes, offset: int = 0) -> None:
        self.data = memoryview(bytes(data))
        self.pos = offset

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def raw(self, n: int, what: str = "bytes") -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError(self.pos, f"truncated {what}: need {n}, have {self.remaining()}")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def u8(self, what: str = "u8") -> int:
        return self.raw(1, what)[0]

    def u16(self, what: str = "u16") -> int:
        return struct.unpack(">H", self.raw(2, what))[0]

    def u32(self, what: str = "u32") -> int:
        return struct.unpack(">I", self.raw(4, what))[0]

    def u64(self, what: str = "u64") -> int:
        return struct.unpack(">Q", self.raw(8, what))[0]

    def blob16(self, what: str = "blob") -> bytes:
        n = self.u16(what + " length")
        return self.raw(n, what)

    def blob32(self, what: str = "blob") -> bytes:
        n = self.u32(what + " length")
        return self.raw(n, what)

    def str16(self, what: str = "string") -> str:
        start = self.pos
        data = self.blob16(what)
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError:
            raise DecodeError(start, f"{what} is not valid UTF-8") from None

    def expect(self, magic: bytes, what: str = "magic") -> None:
        start = self.pos
        got = self.raw(len(magic), what)
        if got != magic:
            raise DecodeError(start, f"bad {what}: {got!r}")

    def done(self) -> None:
        if self.remaining():
            raise DecodeError(self.pos, f"{self.remaining()} trailing bytes")
