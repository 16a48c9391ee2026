"""Self-describing byte format for one compressed array.

Layout, all little-endian:

    magic "MRB1"
    codec id            u8   (0 stored, 1 interpolation, 2 block-Lorenzo;
                              high bit set when the zlib pass ran)
    dims                3x u64 (nx, ny, nz of the encoded array)
    eb                  f64
    adaptive            u8
    alpha               f64
    beta                f64
    arrangement         u8   (0 none, 1 linear, 2 stacked)
    padded              u8
    u                   u32  (unit size; 0 when arrangement is none)
    block-order count   u64, then per block bx, by, bz as u64 triples
    literal count       u64
    Huffman table
    payload length      u64
    payload             bitstream then literal f64 values
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError, ShapeError
from ..grid import BlockCoord, Dims
from ..layout import LINEAR, STACKED
from .entropy import LOSSLESS_NONE, LOSSLESS_ZLIB
from .policy import ErrorBoundPolicy

MAGIC = b"MRB1"

CODEC_STORED = 0
CODEC_INTERP = 1
CODEC_BLOCK = 2
_ZLIB_FLAG = 0x80

ARRANGE_NONE = 0
ARRANGE_LINEAR = 1
ARRANGE_STACKED = 2

_ARRANGE_TO_NAME = {ARRANGE_LINEAR: LINEAR, ARRANGE_STACKED: STACKED}
_NAME_TO_ARRANGE = {LINEAR: ARRANGE_LINEAR, STACKED: ARRANGE_STACKED, None: ARRANGE_NONE}


@dataclass(frozen=True)
class CompressedBlob:
    codec: int
    dims: Dims  # of the encoded array, padding included
    policy: ErrorBoundPolicy
    arrangement: int
    padded: bool
    u: int
    order: tuple[BlockCoord, ...]
    stream: bytes  # entropy tail: literal count, table, payload
    lossless: str = LOSSLESS_NONE

    def __post_init__(self):
        if self.codec not in (CODEC_STORED, CODEC_INTERP, CODEC_BLOCK):
            raise ShapeError(f"unknown codec id {self.codec}")
        if self.lossless not in (LOSSLESS_NONE, LOSSLESS_ZLIB):
            raise ShapeError(f"unknown lossless pass {self.lossless!r}")
        object.__setattr__(self, "order", tuple(self.order))

    @property
    def arrangement_name(self):
        return _ARRANGE_TO_NAME.get(self.arrangement)

    @property
    def codec_name(self) -> str:
        return {CODEC_STORED: "stored", CODEC_INTERP: "interp", CODEC_BLOCK: "block"}[self.codec]

    @property
    def n_values(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def original_bytes(self) -> int:
        """Logical float64 size of the data the blob stands for; the
        extrapolated padding layers do not count."""
        nx, ny, nz = self.dims
        if self.padded:
            nx -= 1
            ny -= 1
        return nx * ny * nz * 8

    def to_bytes(self) -> bytes:
        codec_byte = self.codec | (_ZLIB_FLAG if self.lossless == LOSSLESS_ZLIB else 0)
        head = [
            MAGIC,
            struct.pack("<B", codec_byte),
            struct.pack("<QQQ", *self.dims),
            struct.pack("<d", self.policy.eb),
            struct.pack("<B", 1 if self.policy.adaptive else 0),
            struct.pack("<d", self.policy.alpha),
            struct.pack("<d", self.policy.beta),
            struct.pack("<B", self.arrangement),
            struct.pack("<B", 1 if self.padded else 0),
            struct.pack("<I", self.u),
            struct.pack("<Q", len(self.order)),
        ]
        for c in self.order:
            head.append(struct.pack("<QQQ", c.bx, c.by, c.bz))
        return b"".join(head) + self.stream

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> tuple["CompressedBlob", int]:
        if buf[offset : offset + 4] != MAGIC:
            raise FormatError("bad blob magic")
        offset += 4
        (codec_byte,) = struct.unpack_from("<B", buf, offset)
        offset += 1
        lossless = LOSSLESS_ZLIB if codec_byte & _ZLIB_FLAG else LOSSLESS_NONE
        codec = codec_byte & ~_ZLIB_FLAG
        if codec not in (CODEC_STORED, CODEC_INTERP, CODEC_BLOCK):
            raise FormatError(f"unknown codec id {codec}")
        try:
            dims = struct.unpack_from("<QQQ", buf, offset)
            offset += 24
            (eb,) = struct.unpack_from("<d", buf, offset)
            offset += 8
            (adaptive,) = struct.unpack_from("<B", buf, offset)
            offset += 1
            (alpha,) = struct.unpack_from("<d", buf, offset)
            offset += 8
            (beta,) = struct.unpack_from("<d", buf, offset)
            offset += 8
            (arrangement,) = struct.unpack_from("<B", buf, offset)
            offset += 1
            (padded,) = struct.unpack_from("<B", buf, offset)
            offset += 1
            (u,) = struct.unpack_from("<I", buf, offset)
            offset += 4
            (n_blocks,) = struct.unpack_from("<Q", buf, offset)
            offset += 8
            order = []
            b_edge = max(u, 1)
            for _ in range(n_blocks):
                bx, by, bz = struct.unpack_from("<QQQ", buf, offset)
                offset += 24
                try:
                    order.append(BlockCoord(bx, by, bz, b_edge))
                except ShapeError as exc:
                    raise FormatError(f"bad block coordinate in blob: {exc}") from exc
            # the entropy tail: literal count, table, payload length, payload
            (n_lit,) = struct.unpack_from("<Q", buf, offset)
            tail = offset + 8
            (n_sym,) = struct.unpack_from("<I", buf, tail)
            tail += 4 + n_sym * 5
            (plen,) = struct.unpack_from("<Q", buf, tail)
            tail += 8 + plen
            if tail > len(buf):
                raise FormatError("blob payload truncated")
            _ = n_lit
        except struct.error as exc:
            raise FormatError(f"blob header truncated: {exc}") from exc
        if arrangement not in (ARRANGE_NONE, ARRANGE_LINEAR, ARRANGE_STACKED):
            raise FormatError(f"unknown arrangement {arrangement}")
        try:
            policy = ErrorBoundPolicy(
                eb=eb, adaptive=bool(adaptive), alpha=alpha, beta=beta
            )
        except ShapeError as exc:
            raise FormatError(f"blob carries an invalid policy: {exc}") from exc
        blob = cls(
            codec=codec,
            dims=tuple(int(d) for d in dims),
            policy=policy,
            arrangement=arrangement,
            padded=bool(padded),
            u=int(u),
            order=tuple(order),
            stream=bytes(buf[offset:tail]),
            lossless=lossless,
        )
        return blob, tail

    def size_bytes(self) -> int:
        return len(self.to_bytes())


def arrangement_code(name) -> int:
    if name not in _NAME_TO_ARRANGE:
        raise ShapeError(f"unknown arrangement {name!r}")
    return _NAME_TO_ARRANGE[name]
