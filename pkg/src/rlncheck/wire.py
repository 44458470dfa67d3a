"""Small byte codec used by token, proof, and packet serialization.

Every decode path goes through Reader, which raises DecodeError with
the failing offset instead of ever letting adversarial bytes surface as
IndexError/OverflowError.  Encodings are canonical: fixed-width
big-endian integers and length-prefixed byte strings only.
"""

from __future__ import annotations


class DecodeError(Exception):
    """Malformed input; ``offset`` points at the failing position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class Writer:
    def __init__(self):
        self._parts: list[bytes] = []

    def u8(self, v: int) -> "Writer":
        self._parts.append(v.to_bytes(1, "big"))
        return self

    def u16(self, v: int) -> "Writer":
        self._parts.append(v.to_bytes(2, "big"))
        return self

    def u64(self, v: int) -> "Writer":
        self._parts.append(v.to_bytes(8, "big"))
        return self

    def uint(self, v: int, width: int) -> "Writer":
        self._parts.append(v.to_bytes(width, "big"))
        return self

    def raw(self, data: bytes) -> "Writer":
        self._parts.append(data)
        return self

    def var_bytes(self, data: bytes) -> "Writer":
        """u8 length prefix; for short identifiers (<= 255 bytes)."""
        if len(data) > 255:
            raise ValueError("var_bytes limited to 255 bytes")
        self._parts.append(len(data).to_bytes(1, "big"))
        self._parts.append(data)
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, k: int) -> bytes:
        if k < 0 or self.pos + k > len(self.data):
            raise DecodeError(f"need {k} bytes, have {len(self.data) - self.pos}", self.pos)
        out = self.data[self.pos : self.pos + k]
        self.pos += k
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return int.from_bytes(self.take(2), "big")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def uint(self, width: int) -> int:
        return int.from_bytes(self.take(width), "big")

    def var_bytes(self) -> bytes:
        return self.take(self.u8())

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError(f"{len(self.data) - self.pos} trailing bytes", self.pos)
