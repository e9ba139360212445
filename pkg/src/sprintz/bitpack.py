"""Zigzag coding, per-column width selection and block bit packing.

All packing is LSB-first: bit ``k`` of a value lands in bit ``k % 8`` of its
byte, and values are laid down in order of increasing bit position. Blocks
are always ``BLOCK_SIZE`` rows by ``D`` columns.

Two payload layouts exist:

* column-major (``D * w <= 32``): for each column, the low ``nbits[j]`` bits
  of its 8 values are concatenated. Each column segment is exactly
  ``nbits[j]`` bytes, so no padding is ever needed.
* row-major (``D * w > 32``): each row stores its ``D`` values back to back
  and is zero-padded to a byte boundary, so every column starts at the same
  bit offset in every row.

The functions here work on batches of blocks at once (``errs`` shaped
``(n_blocks, 8, D)``); the single-block helpers are thin wrappers.
"""
from __future__ import annotations

import numpy as np

BLOCK_SIZE = 8
COLUMN_MAJOR_MAX_BITS = 32

# bit length of every 16-bit value
_BIT_LENGTH = np.zeros(1 << 16, dtype=np.int64)
for _k in range(16):
    _BIT_LENGTH[1 << _k:] = _k + 1
del _k


def header_field_bits(bitwidth: int) -> int:
    """Bits used to serialize one column width: log2(w)."""
    return bitwidth.bit_length() - 1


def is_row_major(n_columns: int, bitwidth: int) -> bool:
    return n_columns * bitwidth > COLUMN_MAJOR_MAX_BITS


def zigzag_encode(v, bitwidth: int):
    """Map signed w-bit values to unsigned ones: 0, -1, 1, -2, ... -> 0, 1, 2, 3, ..."""
    v = np.asarray(v, dtype=np.int64)
    return ((v << 1) ^ (v >> (bitwidth - 1))) & ((1 << bitwidth) - 1)


def zigzag_decode(u, bitwidth: int):
    u = np.asarray(u, dtype=np.int64) & ((1 << bitwidth) - 1)
    return (u >> 1) ^ -(u & 1)


def to_signed(v, bitwidth: int):
    """Reinterpret w-bit two's complement values (any int64) as signed."""
    half = 1 << (bitwidth - 1)
    return ((np.asarray(v, dtype=np.int64) + half) & ((1 << bitwidth) - 1)) - half


def count_leading_zeros(v, bitwidth: int):
    return bitwidth - _BIT_LENGTH[np.asarray(v, dtype=np.int64)]


def normalize_widths(nbits, bitwidth: int):
    """Bump width w-1 up to w; there are only w codes for w+1 widths."""
    nbits = np.asarray(nbits, dtype=np.int64)
    return np.where(nbits == bitwidth - 1, bitwidth, nbits)


def required_bits(column_errors, bitwidth: int) -> int:
    """Packed width for one column of zigzagged errors."""
    ored = np.bitwise_or.reduce(np.asarray(column_errors, dtype=np.int64).ravel())
    n = bitwidth - int(count_leading_zeros(ored, bitwidth))
    return bitwidth if n == bitwidth - 1 else n


def block_widths(errs, bitwidth: int):
    """Normalized per-column widths for a batch of blocks.

    ``errs`` is ``(n_blocks, 8, D)`` zigzagged errors; returns ``(n_blocks, D)``.
    """
    ored = np.bitwise_or.reduce(np.asarray(errs, dtype=np.int64), axis=-2)
    return normalize_widths(bitwidth - count_leading_zeros(ored, bitwidth), bitwidth)


def encode_width_codes(nbits, bitwidth: int):
    return np.where(np.asarray(nbits) == bitwidth, bitwidth - 1, nbits)


def decode_width_codes(codes, bitwidth: int):
    return normalize_widths(codes, bitwidth)


def payload_sizes(nbits, bitwidth: int):
    """Payload bytes for each block given ``(n_blocks, D)`` widths."""
    nbits = np.asarray(nbits, dtype=np.int64)
    total = nbits.sum(axis=-1)
    if is_row_major(nbits.shape[-1], bitwidth):
        return BLOCK_SIZE * ((total + 7) // 8)
    return total


def _to_bits(values, bitwidth: int):
    """``(...)`` ints -> ``(..., w)`` uint8 bits, least significant first."""
    dtype = np.dtype("<u1") if bitwidth == 8 else np.dtype("<u2")
    raw = np.ascontiguousarray(values, dtype=dtype)
    as_bytes = raw.view(np.uint8).reshape(raw.shape + (bitwidth // 8,))
    return np.unpackbits(as_bytes, axis=-1, bitorder="little")


def _from_bits(bits, bitwidth: int):
    packed = np.packbits(bits, axis=-1, bitorder="little")
    if bitwidth == 8:
        return packed[..., 0].astype(np.int64)
    return np.ascontiguousarray(packed).view("<u2")[..., 0].astype(np.int64)


def _layout_masks(nbits, bitwidth: int):
    """Bit-selection masks in payload order, plus the matching bit array shape.

    Column-major arrays are indexed ``(block, column, row, bit)``; row-major
    ones ``(block, row, column, bit)`` with an extra all-zero pseudo-column
    that carries each row's padding bits.
    """
    nbits = np.asarray(nbits, dtype=np.int64)
    n_blocks, n_cols = nbits.shape
    bit_idx = np.arange(bitwidth)
    if not is_row_major(n_cols, bitwidth):
        mask = bit_idx < nbits[:, :, None]
        return np.broadcast_to(mask[:, :, None, :], (n_blocks, n_cols, BLOCK_SIZE, bitwidth))
    pad = (-nbits.sum(axis=1)) % 8
    widths = np.concatenate([nbits, pad[:, None]], axis=1)
    mask = bit_idx < widths[:, :, None]
    return np.broadcast_to(mask[:, None, :, :], (n_blocks, BLOCK_SIZE, n_cols + 1, bitwidth))


def pack_blocks(errs, nbits, bitwidth: int) -> bytes:
    """Pack a batch of blocks; returns the concatenated payloads.

    Values must already fit in their column width; bits above the width are
    silently dropped, so callers should validate with ``block_widths``.
    """
    errs = np.asarray(errs, dtype=np.int64)
    if errs.shape[0] == 0:
        return b""
    bits = _to_bits(errs, bitwidth)
    mask = _layout_masks(nbits, bitwidth)
    if is_row_major(errs.shape[2], bitwidth):
        pad = np.zeros(bits.shape[:2] + (1, bitwidth), dtype=np.uint8)
        bits = np.concatenate([bits, pad], axis=2)
    else:
        bits = bits.transpose(0, 2, 1, 3)
    return np.packbits(bits[mask], bitorder="little").tobytes()


def unpack_blocks(payload, nbits, bitwidth: int):
    """Inverse of ``pack_blocks``; returns ``(n_blocks, 8, D)`` zigzagged errors."""
    nbits = np.asarray(nbits, dtype=np.int64)
    n_blocks, n_cols = nbits.shape
    expected = int(payload_sizes(nbits, bitwidth).sum())
    if len(payload) != expected:
        raise ValueError(f"payload is {len(payload)} bytes, layout needs {expected}")
    mask = _layout_masks(nbits, bitwidth)
    bits = np.zeros(mask.shape, dtype=np.uint8)
    if expected:
        bits[mask] = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), bitorder="little")
    if is_row_major(n_cols, bitwidth):
        bits = bits[:, :, :n_cols, :]
    else:
        bits = bits.transpose(0, 2, 1, 3)
    return _from_bits(bits, bitwidth)


def pack_column_major(errs, nbits, bitwidth: int) -> bytes:
    errs = np.asarray(errs)
    if is_row_major(errs.shape[1], bitwidth):
        raise ValueError("column-major layout requires D * w <= 32")
    return pack_blocks(errs[None], np.asarray(nbits)[None], bitwidth)


def pack_row_major(errs, nbits, bitwidth: int) -> bytes:
    errs = np.asarray(errs)
    if not is_row_major(errs.shape[1], bitwidth):
        raise ValueError("row-major layout requires D * w > 32")
    return pack_blocks(errs[None], np.asarray(nbits)[None], bitwidth)


def unpack_block(nbits, payload, bitwidth: int):
    """Unpack one block; layout is chosen from ``len(nbits)`` and ``bitwidth``."""
    return unpack_blocks(payload, np.asarray(nbits)[None], bitwidth)[0]


def pack_headers(codes, bitwidth: int) -> bytes:
    """Pack ``(n_headers, D)`` width codes back to back and pad to a byte."""
    codes = np.asarray(codes, dtype=np.int64)
    nfield = header_field_bits(bitwidth)
    bits = (codes[..., None] >> np.arange(nfield)) & 1
    return np.packbits(bits.ravel().astype(np.uint8), bitorder="little").tobytes()


def unpack_headers(data, n_headers: int, n_columns: int, bitwidth: int):
    """Read ``n_headers`` packed headers; returns ``(n_headers, D)`` width codes."""
    nfield = header_field_bits(bitwidth)
    nbits_total = n_headers * n_columns * nfield
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little")[:nbits_total]
    bits = bits.reshape(n_headers, n_columns, nfield).astype(np.int64)
    return (bits << np.arange(nfield)).sum(axis=-1)


def header_region_size(n_headers: int, n_columns: int, bitwidth: int) -> int:
    return (n_headers * n_columns * header_field_bits(bitwidth) + 7) // 8
