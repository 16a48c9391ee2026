"""Canonical Huffman coding of quantizer output.

The code stream is a plain symbol sequence (quantization codes plus the
literal escape mark), so a per-blob canonical table is enough. Encoding and
decoding are vectorized: decoding computes, for every bit offset, the code
length starting there, then follows the resulting jump chain with pointer
doubling instead of walking bit by bit.

An optional general-purpose lossless pass (zlib) can squeeze the packed
payload further; it is off by default.
"""

from __future__ import annotations

import heapq
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..errors import FormatError, ShapeError

MAX_CODE_LEN = 32
_CHUNK_BITS = 1 << 25

LOSSLESS_NONE = "none"
LOSSLESS_ZLIB = "zlib"


def _huffman_lengths(counts: np.ndarray) -> np.ndarray:
    """Code length per symbol index, deterministic under frequency ties."""
    n = counts.size
    if n == 0:
        return np.zeros(0, dtype=np.uint8)
    if n == 1:
        return np.ones(1, dtype=np.uint8)
    work = counts.astype(np.int64)
    while True:
        parent = np.full(2 * n - 1, -1, dtype=np.int64)
        heap = [(int(work[i]), i, i) for i in range(n)]
        heapq.heapify(heap)
        next_id = n
        while len(heap) > 1:
            fa, _, a = heapq.heappop(heap)
            fb, _, b = heapq.heappop(heap)
            parent[a] = next_id
            parent[b] = next_id
            heapq.heappush(heap, (fa + fb, next_id, next_id))
            next_id += 1
        depths = np.zeros(2 * n - 1, dtype=np.int64)
        # parents always have larger ids, so one reverse sweep resolves depths
        for node in range(2 * n - 3, -1, -1):
            depths[node] = depths[parent[node]] + 1
        lengths = depths[:n]
        if lengths.max() <= MAX_CODE_LEN:
            return lengths.astype(np.uint8)
        # flatten the distribution until the tree fits the decoder window
        work = (work + 1) // 2
        work[work < 1] = 1


@dataclass(frozen=True)
class HuffmanTable:
    """Canonical table: symbols with their code lengths, codes assigned in
    (length, symbol) order."""

    symbols: np.ndarray  # int32, ascending
    lengths: np.ndarray  # uint8, aligned with symbols

    def __post_init__(self):
        sym = np.ascontiguousarray(self.symbols, dtype=np.int32)
        ln = np.ascontiguousarray(self.lengths, dtype=np.uint8)
        if sym.shape != ln.shape or sym.ndim != 1:
            raise ShapeError("symbols and lengths must be aligned 1D arrays")
        if sym.size > 1 and not (np.diff(sym) > 0).all():
            raise FormatError("table symbols must be strictly ascending")
        if sym.size and (ln.max() > MAX_CODE_LEN or ln.min() < 1):
            raise FormatError(f"code lengths must lie in [1, {MAX_CODE_LEN}]")
        sym.flags.writeable = False
        ln.flags.writeable = False
        object.__setattr__(self, "symbols", sym)
        object.__setattr__(self, "lengths", ln)

    @property
    def n_symbols(self) -> int:
        return int(self.symbols.size)

    def canonical(self):
        """Returns (codevals aligned with symbols, plus the per-length decode
        tables: present lengths, left-justified limits, first codes, symbol
        rank offsets, rank -> symbol map)."""
        order = np.lexsort((self.symbols, self.lengths))
        lens_sorted = self.lengths[order].astype(np.int64)
        present, counts = np.unique(lens_sorted, return_counts=True)
        first = np.zeros(present.size, dtype=np.uint64)
        code = 0
        prev = 0
        for i, (l, c) in enumerate(zip(present, counts)):
            code <<= int(l - prev)
            first[i] = code
            code += int(c)
            prev = int(l)
        if self.n_symbols > 1 and code != (1 << prev):
            raise FormatError("code lengths violate the Kraft equality")
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        limits = ((first + counts.astype(np.uint64)) << (MAX_CODE_LEN - present).astype(np.uint64))
        # canonical code value per symbol, in table order
        ranks = np.empty(self.n_symbols, dtype=np.int64)
        ranks[order] = np.arange(self.n_symbols)
        len_idx = np.searchsorted(present, self.lengths.astype(np.int64))
        codevals = first[len_idx] + (ranks - offsets[len_idx]).astype(np.uint64)
        rank_to_symbol = self.symbols[order]
        return codevals, present, limits, first, offsets, rank_to_symbol

    def to_bytes(self) -> bytes:
        head = struct.pack("<I", self.n_symbols)
        return head + self.symbols.astype("<i4").tobytes() + self.lengths.tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> tuple["HuffmanTable", int]:
        if len(buf) - offset < 4:
            raise FormatError("truncated entropy table")
        (n,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        need = n * 5
        if len(buf) - offset < need:
            raise FormatError("truncated entropy table")
        symbols = np.frombuffer(buf, dtype="<i4", count=n, offset=offset)
        offset += n * 4
        lengths = np.frombuffer(buf, dtype=np.uint8, count=n, offset=offset)
        offset += n
        return cls(symbols.astype(np.int32), lengths.copy()), offset


def build_table(codes: np.ndarray) -> HuffmanTable:
    symbols, counts = np.unique(np.asarray(codes, dtype=np.int32), return_counts=True)
    return HuffmanTable(symbols, _huffman_lengths(counts))


def pack_codes(table: HuffmanTable, codes: np.ndarray) -> bytes:
    """MSB-first bit packing of the code sequence."""
    codes = np.asarray(codes, dtype=np.int32).reshape(-1)
    if codes.size == 0:
        return b""
    codevals, *_ = table.canonical()
    idx = np.searchsorted(table.symbols, codes)
    hit = (idx < table.n_symbols) & (
        table.symbols[np.minimum(idx, table.n_symbols - 1)] == codes
    )
    if not hit.all():
        raise ShapeError("code stream contains symbols missing from the table")
    ln = table.lengths[idx].astype(np.int64)
    cv = codevals[idx]
    total = int(ln.sum())
    starts = np.concatenate([[0], np.cumsum(ln)[:-1]])
    within = np.arange(total, dtype=np.int64) - np.repeat(starts, ln)
    shifts = (np.repeat(ln, ln) - 1 - within).astype(np.uint64)
    bits = ((np.repeat(cv, ln) >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits).tobytes()


def _unpack_chunk(buf: np.ndarray, lo: int, hi: int, present, limits, first, offsets):
    """Per-bit-offset decode tables for offsets [lo, hi): the 32-bit window
    value, the code length starting there, and (derived later) the jump."""
    lo_byte = lo >> 3
    hi_byte = ((hi - 1) >> 3) + 1
    b = buf[lo_byte : hi_byte + 5].astype(np.uint64)
    w = (
        (b[:-4] << np.uint64(32))
        | (b[1:-3] << np.uint64(24))
        | (b[2:-2] << np.uint64(16))
        | (b[3:-1] << np.uint64(8))
        | b[4:]
    )
    p = np.arange(lo, hi, dtype=np.int64)
    shift = (8 - (p & 7)).astype(np.uint64)
    v = ((w[(p >> 3) - lo_byte] >> shift) & np.uint64(0xFFFFFFFF)).astype(np.uint64)
    li = np.searchsorted(limits, v, side="right")
    if int(li.max()) >= present.size:
        raise FormatError("bitstream does not decode under the stored table")
    ln = present[li]
    return v, li, ln


def unpack_codes(table: HuffmanTable, data: bytes, n_codes: int) -> np.ndarray:
    """Decode exactly ``n_codes`` symbols from the packed payload."""
    if n_codes == 0:
        return np.zeros(0, dtype=np.int32)
    if table.n_symbols == 0:
        raise FormatError("empty table cannot decode a nonempty stream")
    _, present, limits, first, offsets, rank_to_symbol = table.canonical()
    buf = np.frombuffer(data + b"\x00" * 8, dtype=np.uint8)
    nbits = len(data) * 8
    out = np.empty(n_codes, dtype=np.int32)
    pos = 0
    produced = 0
    while produced < n_codes:
        lo = pos
        hi = min(lo + _CHUNK_BITS, nbits)
        if lo >= nbits:
            raise FormatError("bitstream ended before all symbols were decoded")
        v, li, ln = _unpack_chunk(buf, lo, hi, present, limits, first, offsets)
        local_n = v.size
        # local jump chain with a self-looping sentinel at the end
        jump = np.minimum(np.arange(local_n, dtype=np.int64) + ln, local_n)
        jump = np.append(jump, local_n)
        remaining = n_codes - produced
        arr = np.empty(remaining + 1, dtype=np.int64)
        arr[0] = 0
        filled = 1
        hop = jump
        while filled <= remaining:
            m = min(filled, remaining + 1 - filled)
            arr[filled : filled + m] = hop[arr[:m]]
            filled += m
            if filled <= remaining:
                hop = hop[hop]
        # keep only symbols that start safely inside this chunk
        safe = local_n if hi == nbits else local_n - MAX_CODE_LEN
        take = int(np.searchsorted(arr[: remaining + 1], safe, side="left"))
        take = min(take, remaining)
        if take == 0:
            raise FormatError("bitstream does not decode under the stored table")
        starts = arr[:take]
        ranks = offsets[li[starts]] + (
            (v[starts] >> (np.uint64(MAX_CODE_LEN) - ln[starts].astype(np.uint64)))
            - first[li[starts]]
        ).astype(np.int64)
        if int(ranks.min()) < 0 or int(ranks.max()) >= rank_to_symbol.size:
            raise FormatError("bitstream does not decode under the stored table")
        out[produced : produced + take] = rank_to_symbol[ranks]
        produced += take
        pos = lo + int(arr[take])
    return out


def entropy_encode(
    codes: np.ndarray, literals: np.ndarray, lossless: str = LOSSLESS_NONE
) -> bytes:
    """Serialize one quantized stream as
    [literal count u64][table][payload length u64][payload], where the payload
    is the packed bitstream followed by the literal values."""
    codes = np.asarray(codes, dtype=np.int32).reshape(-1)
    literals = np.asarray(literals, dtype=np.float64).reshape(-1)
    table = build_table(codes)
    payload = pack_codes(table, codes) + literals.astype("<f8").tobytes()
    if lossless == LOSSLESS_ZLIB:
        payload = zlib.compress(payload, 6)
    elif lossless != LOSSLESS_NONE:
        raise ShapeError(f"unknown lossless pass {lossless!r}")
    return (
        struct.pack("<Q", literals.size)
        + table.to_bytes()
        + struct.pack("<Q", len(payload))
        + payload
    )


def entropy_decode(
    buf: bytes, n_codes: int, offset: int = 0, lossless: str = LOSSLESS_NONE
) -> tuple[np.ndarray, np.ndarray, int]:
    """Inverse of :func:`entropy_encode`; returns (codes, literals, offset
    past the stream)."""
    if len(buf) - offset < 8:
        raise FormatError("truncated entropy stream")
    (n_lit,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    table, offset = HuffmanTable.from_bytes(buf, offset)
    if len(buf) - offset < 8:
        raise FormatError("truncated entropy stream")
    (plen,) = struct.unpack_from("<Q", buf, offset)
    offset += 8
    if len(buf) - offset < plen:
        raise FormatError("entropy payload shorter than its declared length")
    payload = bytes(buf[offset : offset + plen])
    offset += plen
    if lossless == LOSSLESS_ZLIB:
        try:
            payload = zlib.decompress(payload)
        except zlib.error as exc:
            raise FormatError(f"lossless pass failed to undo: {exc}") from exc
    lit_bytes = n_lit * 8
    if len(payload) < lit_bytes:
        raise FormatError("payload shorter than its literal block")
    literals = np.frombuffer(payload, dtype="<f8", count=n_lit,
                             offset=len(payload) - lit_bytes).astype(np.float64)
    codes = unpack_codes(table, payload[: len(payload) - lit_bytes], n_codes)
    return codes, literals, offset
