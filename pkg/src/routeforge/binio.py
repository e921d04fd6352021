"""Little-endian binary framing shared by the checkpoint and embedding formats.

Both files look the same from orbit: a short ASCII magic, a payload, and a
trailing CRC32 computed over the payload bytes (magic excluded). All
multi-byte integers are little-endian.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import BadMagicError, ChecksumError, FormatError, TruncatedFileError

_U8 = struct.Struct("<B")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")


class PayloadWriter:
    """Streams magic + payload to a binary file, tracking the payload CRC32."""

    def __init__(self, f, magic: bytes):
        self._f = f
        self._crc = 0
        f.write(magic)

    def write(self, data: bytes) -> None:
        self._f.write(data)
        self._crc = zlib.crc32(data, self._crc)

    def u8(self, value: int) -> None:
        self.write(_U8.pack(value))

    def u16(self, value: int) -> None:
        self.write(_U16.pack(value))

    def u32(self, value: int) -> None:
        self.write(_U32.pack(value))

    def string(self, text: str) -> None:
        raw = text.encode("utf-8")
        self.u32(len(raw))
        self.write(raw)

    def array(self, a: np.ndarray) -> None:
        # '<' forces little-endian on any platform
        self.write(np.ascontiguousarray(a).astype(a.dtype.newbyteorder("<"), copy=False).tobytes())

    def finish(self) -> None:
        """Write the CRC32 trailer. The CRC itself is not CRC'd."""
        self._f.write(_U32.pack(self._crc))


class PayloadReader:
    """Parses a magic-prefixed, CRC-trailed blob held fully in memory.

    Structural overruns raise TruncatedFileError; call verify_crc() after a
    structurally complete parse to distinguish corruption from truncation.
    """

    def __init__(self, data: bytes, magic: bytes, source: str = "<bytes>"):
        self.source = source
        if len(data) < len(magic) or data[: len(magic)] != magic:
            raise BadMagicError(f"{source}: expected magic {magic!r}")
        if len(data) < len(magic) + 4:
            raise TruncatedFileError(f"{source}: no room for CRC trailer")
        self._payload = memoryview(data)[len(magic) : -4]
        (self._stored_crc,) = _U32.unpack(data[-4:])
        self._off = 0

    def _take(self, n: int) -> memoryview:
        if self._off + n > len(self._payload):
            raise TruncatedFileError(
                f"{self.source}: needed {n} bytes at offset {self._off}, "
                f"payload has {len(self._payload)}"
            )
        view = self._payload[self._off : self._off + n]
        self._off += n
        return view

    def u8(self) -> int:
        return _U8.unpack(self._take(1))[0]

    def u16(self) -> int:
        return _U16.unpack(self._take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self._take(4))[0]

    def string(self) -> str:
        n = self.u32()
        return bytes(self._take(n)).decode("utf-8")

    def array(self, count: int, dtype: str) -> np.ndarray:
        dt = np.dtype(dtype)
        raw = self._take(count * dt.itemsize)
        return np.frombuffer(raw, dtype=dt).astype(dt.newbyteorder("="), copy=True)

    def expect_end(self) -> None:
        if self._off != len(self._payload):
            raise FormatError(
                f"{self.source}: {len(self._payload) - self._off} trailing payload bytes"
            )

    def verify_crc(self) -> None:
        actual = zlib.crc32(self._payload)
        if actual != self._stored_crc:
            raise ChecksumError(
                f"{self.source}: CRC32 mismatch (stored {self._stored_crc:#010x}, "
                f"computed {actual:#010x})"
            )


def crc32_of_file(path) -> int:
    """CRC32 over a whole file, streamed. Used by report manifests."""
    crc = 0
    with open(path, "rb") as f:
        while chunk := f.read(1 << 20):
            crc = zlib.crc32(chunk, crc)
    return crc
