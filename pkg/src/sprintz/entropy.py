"""Byte-oriented canonical Huffman coding of packed block data.

Every byte value is a symbol regardless of the sample bitwidth. A body is
split into frames of at most ``MAX_FRAME_SIZE`` bytes; each frame carries
its own code table, or falls back to storing the bytes verbatim when
coding would not save space::

    u16 LE  uncompressed length
    u16 LE  length of what follows the mode byte
    u8      mode: 0 = raw, 1 = Huffman
    ...     raw bytes, or 128 bytes of 4-bit code lengths + the bitstream

Code lengths are capped at ``MAX_CODE_LENGTH`` bits. Codes are canonical
(assigned in order of length, then symbol) and written LSB-first.
"""
from __future__ import annotations

import heapq
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import CorruptStreamError

MAX_CODE_LENGTH = 15
MAX_FRAME_SIZE = 0xFFFF
TABLE_BYTES = 128
MODE_RAW = 0
MODE_HUFFMAN = 1
FRAME_HEADER = struct.Struct("<HHB")


def _huffman_lengths(counts):
    """Unrestricted Huffman code lengths for symbols with nonzero counts."""
    symbols = [s for s in range(256) if counts[s] > 0]
    lengths = [0] * 256
    if len(symbols) == 1:
        lengths[symbols[0]] = 1
        return lengths
    # heap of (weight, tiebreak, member symbols); tiebreak keeps merges deterministic
    heap = [(int(counts[s]), s, [s]) for s in symbols]
    heapq.heapify(heap)
    tiebreak = 256
    while len(heap) > 1:
        w1, _, m1 = heapq.heappop(heap)
        w2, _, m2 = heapq.heappop(heap)
        for s in m1:
            lengths[s] += 1
        for s in m2:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, tiebreak, m1 + m2))
        tiebreak += 1
    return lengths


def _limit_lengths(lengths, counts, max_length):
    """Clamp lengths to ``max_length`` and lengthen codes until Kraft holds."""
    lengths = [min(n, max_length) for n in lengths]
    unit = 1 << max_length
    kraft = sum(unit >> n for n in lengths if n)
    while kraft > unit:
        # lengthen the deepest still-lengthenable code, least frequent first
        best = max((s for s in range(256) if 0 < lengths[s] < max_length),
                   key=lambda s: (lengths[s], -counts[s], s))
        lengths[best] += 1
        kraft -= unit >> lengths[best]
    return lengths


def _reverse_bits(code, nbits):
    out = 0
    for _ in range(nbits):
        out = (out << 1) | (code & 1)
        code >>= 1
    return out


@dataclass(frozen=True)
class HuffmanTable:
    """Code lengths for the 256 byte symbols and the derived canonical codes.

    ``codes`` holds each code already bit-reversed, ready for LSB-first
    emission. Build one with :func:`build_table` or :meth:`from_lengths`.
    """

    lengths: np.ndarray
    codes: np.ndarray

    @classmethod
    def from_lengths(cls, lengths):
        lengths = np.asarray(lengths, dtype=np.int64)
        if lengths.shape != (256,):
            raise ValueError("need exactly 256 code lengths")
        if lengths.min() < 0 or lengths.max() > MAX_CODE_LENGTH:
            raise ValueError(f"code lengths must lie in [0, {MAX_CODE_LENGTH}]")
        if not lengths.any():
            raise ValueError("code table has no symbols")
        kraft = sum(1 << (MAX_CODE_LENGTH - int(n)) for n in lengths if n)
        if kraft > 1 << MAX_CODE_LENGTH:
            raise ValueError("code lengths violate the Kraft inequality")
        codes = np.zeros(256, dtype=np.int64)
        code = 0
        prev_len = 0
        for sym in sorted((s for s in range(256) if lengths[s]), key=lambda s: (lengths[s], s)):
            n = int(lengths[sym])
            code <<= n - prev_len
            codes[sym] = _reverse_bits(code, n)
            code += 1
            prev_len = n
        lengths.setflags(write=False)
        codes.setflags(write=False)
        return cls(lengths, codes)

    def serialize(self) -> bytes:
        lo = self.lengths[0::2]
        hi = self.lengths[1::2]
        return (lo | (hi << 4)).astype(np.uint8).tobytes()

    @classmethod
    def deserialize(cls, data: bytes):
        raw = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
        if raw.size != TABLE_BYTES:
            raise ValueError(f"serialized table must be {TABLE_BYTES} bytes")
        lengths = np.empty(256, dtype=np.int64)
        lengths[0::2] = raw & 0xF
        lengths[1::2] = raw >> 4
        return cls.from_lengths(lengths)

    def mean_code_length(self, histogram) -> float:
        counts = np.asarray(histogram, dtype=np.float64)
        return float((counts * self.lengths).sum() / counts.sum())


def build_table(histogram) -> HuffmanTable:
    counts = np.asarray(histogram, dtype=np.int64)
    if counts.shape != (256,) or counts.min() < 0:
        raise ValueError("histogram must be 256 non-negative counts")
    if not counts.any():
        raise ValueError("cannot build a code for an empty histogram")
    lengths = _huffman_lengths(counts)
    if max(lengths) > MAX_CODE_LENGTH:
        lengths = _limit_lengths(lengths, counts, MAX_CODE_LENGTH)
    return HuffmanTable.from_lengths(lengths)


def encode_frame(data: bytes, table: HuffmanTable) -> bytes:
    syms = np.frombuffer(data, dtype=np.uint8)
    if syms.size == 0:
        return b""
    lens = table.lengths[syms]
    if not lens.all():
        raise ValueError("input contains a symbol with no code")
    bits = ((table.codes[syms][:, None] >> np.arange(MAX_CODE_LENGTH)) & 1).astype(np.uint8)
    keep = np.arange(MAX_CODE_LENGTH) < lens[:, None]
    return np.packbits(bits[keep], bitorder="little").tobytes()


def _decode_lookup(table):
    """Map every ``MAX_CODE_LENGTH``-bit window to (symbol, code length)."""
    size = 1 << MAX_CODE_LENGTH
    sym_of = np.zeros(size, dtype=np.uint8)
    len_of = np.zeros(size, dtype=np.int64)
    for sym in np.flatnonzero(table.lengths):
        n = int(table.lengths[sym])
        idx = int(table.codes[sym]) + (np.arange(1 << (MAX_CODE_LENGTH - n)) << n)
        sym_of[idx] = sym
        len_of[idx] = n
    return sym_of, len_of


def decode_frame(bitstream: bytes, table: HuffmanTable, length: int) -> bytes:
    if length == 0:
        return b""
    total = len(bitstream) * 8
    if total == 0:
        raise CorruptStreamError("empty Huffman bitstream", 0)
    sym_of, len_of = _decode_lookup(table)
    padded = np.frombuffer(bitstream + b"\0\0\0", dtype=np.uint8).astype(np.int64)
    pos = np.arange(total)
    byte = pos >> 3
    window = padded[byte] | (padded[byte + 1] << 8) | (padded[byte + 2] << 16)
    window = (window >> (pos & 7)) & ((1 << MAX_CODE_LENGTH) - 1)
    code_len = len_of[window]
    nxt = np.where(code_len > 0, pos + code_len, -1).tolist()
    starts = [0] * length
    p = 0
    for k in range(length):
        if p >= total:
            raise CorruptStreamError(f"Huffman bitstream ends after {k} of {length} symbols")
        starts[k] = p
        p = nxt[p]
        if p < 0:
            raise CorruptStreamError(f"invalid Huffman code at bit {starts[k]}", starts[k] >> 3)
    if p > total:
        raise CorruptStreamError("last Huffman code runs past the end of the bitstream")
    if total - p >= 8:
        raise CorruptStreamError("trailing bytes after the last Huffman code")
    return sym_of[window[starts]].tobytes()


def compress_body(data: bytes) -> bytes:
    out = bytearray()
    for start in range(0, len(data), MAX_FRAME_SIZE):
        chunk = bytes(data[start:start + MAX_FRAME_SIZE])
        hist = np.bincount(np.frombuffer(chunk, dtype=np.uint8), minlength=256)
        table = build_table(hist)
        coded = table.serialize() + encode_frame(chunk, table)
        if len(coded) >= len(chunk):
            out += FRAME_HEADER.pack(len(chunk), len(chunk), MODE_RAW) + chunk
        else:
            out += FRAME_HEADER.pack(len(chunk), len(coded), MODE_HUFFMAN) + coded
    return bytes(out)


def decompress_body(framed: bytes) -> bytes:
    out = bytearray()
    pos = 0
    n = len(framed)
    while pos < n:
        if n - pos < FRAME_HEADER.size:
            raise CorruptStreamError("truncated frame header", pos)
        ulen, clen, mode = FRAME_HEADER.unpack_from(framed, pos)
        body_start = pos + FRAME_HEADER.size
        if ulen == 0:
            raise CorruptStreamError("zero-length frame", pos)
        if body_start + clen > n:
            raise CorruptStreamError("frame data runs past end of input", pos)
        body = bytes(framed[body_start:body_start + clen])
        if mode == MODE_RAW:
            if clen != ulen:
                raise CorruptStreamError("raw frame length mismatch", pos)
            out += body
        elif mode == MODE_HUFFMAN:
            if clen < TABLE_BYTES:
                raise CorruptStreamError("Huffman frame shorter than its table", pos)
            try:
                table = HuffmanTable.deserialize(body[:TABLE_BYTES])
            except ValueError as exc:
                raise CorruptStreamError(f"bad code table: {exc}", body_start) from None
            try:
                out += decode_frame(body[TABLE_BYTES:], table, ulen)
            except CorruptStreamError as exc:
                raise CorruptStreamError(f"frame at byte {pos}: {exc}") from None
        else:
            raise CorruptStreamError(f"unknown frame mode {mode}", pos + 4)
        pos = body_start + clen
    return bytes(out)
