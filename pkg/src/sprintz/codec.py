"""Block and stream level encoding.

Stream layout (all integers little-endian)::

    "SPRZ" | version u8 | flags u8 | group size u8 | learn shift u8
    | D u16 | T u64 | body | verbatim tail | CRC-32 u32

``flags`` bit 0 selects FIRE (else delta), bit 1 the entropy stage, bit 2
16-bit samples (else 8-bit). The body is a sequence of header groups: the
width headers of ``G`` records packed back to back and padded to a byte,
followed by those records' payloads. A record is either one block (nonzero
header, packed payload) or a run of all-zero-error blocks (all-zero header,
u16 block count as payload). The last group is padded with all-zero
headers that have no payload. With the entropy flag set, the body is
stored in the framed Huffman format of :mod:`sprintz.entropy`.

The ``T mod 8`` samples that do not fill a block are stored raw after the
body. The trailing CRC-32 covers the stream header followed by the raw
little-endian samples, so a decode either reproduces the input or fails.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import bitpack
from ._validation import check_bitwidth, check_series, sample_dtype
from .bitpack import BLOCK_SIZE
from .entropy import compress_body, decompress_body
from .exceptions import CorruptStreamError
from .forecasters import DEFAULT_LEARN_SHIFT, MAX_LEARN_SHIFT, make_forecaster

MAGIC = b"SPRZ"
VERSION = 1
STREAM_HEADER = struct.Struct("<4sBBBBHQ")
TRAILER = struct.Struct("<I")
RUN_LENGTH = struct.Struct("<H")
MAX_RUN_BLOCKS = 0xFFFF

FLAG_FIRE = 0x01
FLAG_ENTROPY = 0x02
FLAG_WIDE = 0x04
_KNOWN_FLAGS = FLAG_FIRE | FLAG_ENTROPY | FLAG_WIDE


@dataclass(frozen=True)
class CodecConfig:
    bitwidth: int = 8
    n_columns: int = 1
    forecaster: str = "delta"
    entropy: bool = False
    group_size: int = 2
    learn_shift: int = DEFAULT_LEARN_SHIFT

    def __post_init__(self):
        check_bitwidth(self.bitwidth)
        if not 1 <= self.n_columns <= 0xFFFF:
            raise ValueError(f"n_columns must be in [1, 65535], got {self.n_columns}")
        if self.forecaster not in ("delta", "fire"):
            raise ValueError(f"forecaster must be 'delta' or 'fire', got {self.forecaster!r}")
        if not 1 <= self.group_size <= 0xFF:
            raise ValueError(f"group_size must be in [1, 255], got {self.group_size}")
        if not 0 <= self.learn_shift <= MAX_LEARN_SHIFT:
            raise ValueError(f"learn_shift must be in [0, {MAX_LEARN_SHIFT}], got {self.learn_shift}")

    @property
    def row_major(self) -> bool:
        return bitpack.is_row_major(self.n_columns, self.bitwidth)

    @property
    def sample_bytes(self) -> int:
        return self.n_columns * self.bitwidth // 8

    def new_forecaster(self):
        return make_forecaster(self.forecaster, self.n_columns, self.bitwidth, self.learn_shift)


@dataclass(frozen=True)
class StreamHeader:
    config: CodecConfig
    n_samples: int

    def pack(self) -> bytes:
        c = self.config
        flags = ((FLAG_FIRE if c.forecaster == "fire" else 0)
                 | (FLAG_ENTROPY if c.entropy else 0)
                 | (FLAG_WIDE if c.bitwidth == 16 else 0))
        return STREAM_HEADER.pack(MAGIC, VERSION, flags, c.group_size, c.learn_shift,
                                  c.n_columns, self.n_samples)

    @classmethod
    def unpack(cls, data: bytes) -> "StreamHeader":
        if len(data) < STREAM_HEADER.size:
            raise CorruptStreamError("truncated stream header", len(data))
        magic, version, flags, group, shift, ncols, nsamples = STREAM_HEADER.unpack_from(data)
        if magic != MAGIC:
            raise CorruptStreamError("bad magic", 0)
        if version != VERSION:
            raise CorruptStreamError(f"unsupported format version {version}", 4)
        if flags & ~_KNOWN_FLAGS:
            raise CorruptStreamError(f"unknown flag bits 0x{flags:02x}", 5)
        try:
            config = CodecConfig(
                bitwidth=16 if flags & FLAG_WIDE else 8,
                n_columns=ncols,
                forecaster="fire" if flags & FLAG_FIRE else "delta",
                entropy=bool(flags & FLAG_ENTROPY),
                group_size=group,
                learn_shift=shift,
            )
        except ValueError as exc:
            raise CorruptStreamError(f"invalid stream parameters: {exc}", 6) from None
        return cls(config, nsamples)


@dataclass(frozen=True)
class BlockHeader:
    """Normalized per-column packed widths of one block (all zero for a run)."""

    nbits: tuple

    @property
    def is_run(self) -> bool:
        return not any(self.nbits)


def encode_block(samples, forecaster, prev_sample):
    """Encode one 8-row block; trains ``forecaster`` in place.

    Returns ``(BlockHeader, payload)``. An all-zero header comes back with an
    empty payload; turning zero blocks into run records is the stream
    encoder's job.
    """
    w = forecaster.bitwidth
    samples = np.asarray(samples, dtype=np.int64)
    if samples.shape != (BLOCK_SIZE, forecaster.n_columns):
        raise ValueError(f"block must be {BLOCK_SIZE}x{forecaster.n_columns}, got {samples.shape}")
    errs = forecaster.encode(samples[None], prev_sample)
    zz = bitpack.zigzag_encode(bitpack.to_signed(errs, w), w)
    nbits = bitpack.block_widths(zz, w)
    return BlockHeader(tuple(int(n) for n in nbits[0])), bitpack.pack_blocks(zz, nbits, w)


def decode_block(header: BlockHeader, payload, forecaster, prev_sample):
    """Inverse of :func:`encode_block`.

    For an all-zero header the payload is a run record (u16 block count) and
    ``8 * count`` predicted samples are returned.
    """
    w = forecaster.bitwidth
    if header.is_run:
        if len(payload) != RUN_LENGTH.size:
            raise CorruptStreamError("run record payload must be 2 bytes")
        (count,) = RUN_LENGTH.unpack(payload)
        if count == 0:
            raise CorruptStreamError("zero-length run")
        return forecaster.run(count, prev_sample)
    nbits = np.asarray(header.nbits, dtype=np.int64)[None]
    try:
        zz = bitpack.unpack_blocks(bytes(payload), nbits, w)
    except ValueError as exc:
        raise CorruptStreamError(str(exc)) from None
    errs = bitpack.zigzag_decode(zz, w) & ((1 << w) - 1)
    return forecaster.decode(errs, prev_sample)[0]


def _records(widths):
    """Yield ``(block_index, None)`` for coded blocks and ``(None, count)`` for runs."""
    nonzero = widths.any(axis=1)
    n = len(nonzero)
    # starts of maximal runs of equal "nonzero" flags
    edges = np.flatnonzero(np.diff(nonzero.astype(np.int8))) + 1
    bounds = np.concatenate([[0], edges, [n]]).tolist()
    for start, stop in zip(bounds[:-1], bounds[1:]):
        if nonzero[start]:
            for b in range(start, stop):
                yield b, None
        else:
            remaining = stop - start
            while remaining:
                count = min(remaining, MAX_RUN_BLOCKS)
                yield None, count
                remaining -= count


def _encode_body(X, config: CodecConfig, forecaster=None) -> bytes:
    w, ncols, group = config.bitwidth, config.n_columns, config.group_size
    nblocks = X.shape[0] // BLOCK_SIZE
    if nblocks == 0:
        return b""
    blocks = X[:nblocks * BLOCK_SIZE].reshape(nblocks, BLOCK_SIZE, ncols)
    if forecaster is None:
        forecaster = config.new_forecaster()
    errs = forecaster.encode(blocks, np.zeros(ncols, dtype=np.int64))
    zz = bitpack.zigzag_encode(bitpack.to_signed(errs, w), w)
    widths = bitpack.block_widths(zz, w)
    nonzero = widths.any(axis=1)
    packed = memoryview(bitpack.pack_blocks(zz[nonzero], widths[nonzero], w))
    ends = np.cumsum(bitpack.payload_sizes(widths, w) * nonzero).tolist()
    codes = bitpack.encode_width_codes(widths, w)

    record_codes = []
    payloads = []
    zero_codes = np.zeros(ncols, dtype=np.int64)
    for b, count in _records(widths):
        if count is None:
            record_codes.append(codes[b])
            payloads.append(packed[ends[b - 1] if b else 0:ends[b]])
        else:
            record_codes.append(zero_codes)
            payloads.append(RUN_LENGTH.pack(count))

    ngroups = -(-len(payloads) // group)
    header_codes = np.zeros((ngroups * group, ncols), dtype=np.int64)
    header_codes[:len(record_codes)] = record_codes
    nfield = bitpack.header_field_bits(w)
    bits = ((header_codes.reshape(ngroups, group * ncols)[..., None] >> np.arange(nfield)) & 1)
    headers = np.packbits(bits.reshape(ngroups, -1).astype(np.uint8), axis=1, bitorder="little")

    parts = []
    for g in range(ngroups):
        parts.append(headers[g].tobytes())
        parts.extend(payloads[g * group:(g + 1) * group])
    return b"".join(parts)


def encode_stream(X, config: CodecConfig, forecaster=None) -> bytes:
    """Compress a ``(T, D)`` array of unsigned ``w``-bit integers.

    ``forecaster`` overrides the one ``config`` describes, for experiments
    (e.g. a FIRE forecaster with training disabled). The decoder always
    rebuilds the forecaster from the stream header, so such streams only
    decode if the override behaves identically.
    """
    X = check_series(X, config.bitwidth)
    if X.shape[1] != config.n_columns:
        raise ValueError(f"data has {X.shape[1]} columns, config expects {config.n_columns}")
    body = _encode_body(X, config, forecaster)
    if config.entropy and body:
        body = compress_body(body)
    raw = X.astype(sample_dtype(config.bitwidth))
    tail = raw[(X.shape[0] // BLOCK_SIZE) * BLOCK_SIZE:].tobytes()
    header = StreamHeader(config, X.shape[0]).pack()
    crc = zlib.crc32(raw.tobytes(), zlib.crc32(header))
    return b"".join([header, body, tail, TRAILER.pack(crc)])


def _parse_body(body, config: CodecConfig, nblocks: int, base: int):
    """Split a body into records.

    Returns ``(spans, widths, payload)``: ``spans`` lists ``("run", count)``
    and ``("blocks", start, stop)`` entries in stream order, where
    ``start:stop`` index the coded blocks whose widths and concatenated
    payloads are returned alongside.
    """
    w, ncols, group = config.bitwidth, config.n_columns, config.group_size
    region = bitpack.header_region_size(group, ncols, w)
    n = len(body)
    pos = 0
    done = 0
    spans = []
    widths = []
    payloads = []
    while done < nblocks:
        if pos + region > n:
            raise CorruptStreamError("truncated header group", base + pos)
        codes = bitpack.unpack_headers(body[pos:pos + region], group, ncols, w)
        pos += region
        group_widths = bitpack.decode_width_codes(codes, w)
        nonzero = group_widths.any(axis=1).tolist()
        sizes = bitpack.payload_sizes(group_widths, w).tolist()
        for g in range(group):
            if done == nblocks:
                if any(nonzero[g:]):
                    raise CorruptStreamError("block header past the end of the data", base + pos)
                break
            if nonzero[g]:
                size = sizes[g]
                if pos + size > n:
                    raise CorruptStreamError("truncated block payload", base + pos)
                payloads.append(body[pos:pos + size])
                pos += size
                widths.append(group_widths[g])
                if spans and spans[-1][0] == "blocks":
                    spans[-1][2] += 1
                else:
                    spans.append(["blocks", len(widths) - 1, len(widths)])
                done += 1
            else:
                if pos + RUN_LENGTH.size > n:
                    raise CorruptStreamError("truncated run length", base + pos)
                (count,) = RUN_LENGTH.unpack_from(body, pos)
                if count == 0 or done + count > nblocks:
                    raise CorruptStreamError(f"invalid run length {count}", base + pos)
                pos += RUN_LENGTH.size
                spans.append(["run", count])
                done += count
    if pos != n:
        raise CorruptStreamError(f"{n - pos} unexpected trailing body bytes", base + pos)
    widths = np.array(widths, dtype=np.int64).reshape(-1, ncols)
    return spans, widths, b"".join(payloads)


def read_stream_header(data) -> StreamHeader:
    return StreamHeader.unpack(bytes(data[:STREAM_HEADER.size]))


def decode_stream(data) -> np.ndarray:
    """Decompress a stream produced by :func:`encode_stream`.

    Returns a ``(T, D)`` array of ``uint8`` or ``uint16``. Any malformed
    input raises :class:`CorruptStreamError`.
    """
    data = bytes(data)
    header = StreamHeader.unpack(data)
    config = header.config
    w, ncols = config.bitwidth, config.n_columns
    nsamples = header.n_samples
    nblocks = nsamples // BLOCK_SIZE
    tail_len = (nsamples % BLOCK_SIZE) * config.sample_bytes
    body_start = STREAM_HEADER.size
    body_end = len(data) - TRAILER.size - tail_len
    if body_end < body_start:
        raise CorruptStreamError("stream too short for its declared tail", len(data))

    body = data[body_start:body_end]
    base = body_start
    if config.entropy and body:
        try:
            body = decompress_body(body)
        except CorruptStreamError as exc:
            raise CorruptStreamError(f"entropy stage: {exc}", body_start) from None
        base = 0
    if nblocks == 0 and body:
        raise CorruptStreamError("body present but no full blocks declared", body_start)
    spans, widths, payload = _parse_body(body, config, nblocks, base)

    mask = (1 << w) - 1
    zz = bitpack.unpack_blocks(payload, widths, w)
    errs = bitpack.zigzag_decode(zz, w) & mask
    out = np.empty((nblocks * BLOCK_SIZE, ncols), dtype=np.int64)
    forecaster = config.new_forecaster()
    prev = np.zeros(ncols, dtype=np.int64)
    row = 0
    for span in spans:
        if span[0] == "run":
            x = forecaster.run(span[1], prev)
        else:
            x = forecaster.decode(errs[span[1]:span[2]], prev).reshape(-1, ncols)
        out[row:row + len(x)] = x
        row += len(x)
        prev = out[row - 1]

    dtype = sample_dtype(w)
    tail = np.frombuffer(data, dtype=dtype, count=tail_len // dtype.itemsize, offset=body_end)
    result = np.concatenate([out.astype(dtype), tail.reshape(-1, ncols)])
    (crc,) = TRAILER.unpack_from(data, len(data) - TRAILER.size)
    if zlib.crc32(result.tobytes(), zlib.crc32(data[:STREAM_HEADER.size])) != crc:
        raise CorruptStreamError("checksum mismatch", len(data) - TRAILER.size)
    return result


def compress(X, bitwidth=8, forecaster="delta", entropy=False, group_size=2,
             learn_shift=DEFAULT_LEARN_SHIFT) -> bytes:
    X = check_series(X, bitwidth)
    config = CodecConfig(bitwidth, X.shape[1], forecaster, entropy, group_size, learn_shift)
    return encode_stream(X, config)


def decompress(data) -> np.ndarray:
    return decode_stream(data)


class SprintzCodec(TransformerMixin, BaseEstimator):
    """Lossless compressor for multivariate integer time series.

    ``fit`` only records the column count; ``transform`` returns the
    compressed stream as ``bytes`` and ``inverse_transform`` restores the
    exact input.

    Parameters
    ----------
    bitwidth : {8, 16}
        Bits per stored value.
    forecaster : {"delta", "fire"}
        Predictor whose errors get packed.
    entropy : bool
        Huffman code the packed body.
    group_size : int
        Block headers packed together per header group.
    learn_shift : int
        FIRE learning rate is ``2 ** -learn_shift``.
    """

    def __init__(self, bitwidth=8, forecaster="delta", entropy=False, group_size=2,
                 learn_shift=DEFAULT_LEARN_SHIFT):
        self.bitwidth = bitwidth
        self.forecaster = forecaster
        self.entropy = entropy
        self.group_size = group_size
        self.learn_shift = learn_shift

    def fit(self, X, y=None):
        X = check_series(X, self.bitwidth)
        self.config_ = CodecConfig(self.bitwidth, X.shape[1], self.forecaster,
                                   bool(self.entropy), self.group_size, self.learn_shift)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> bytes:
        check_is_fitted(self)
        return encode_stream(X, self.config_)

    def inverse_transform(self, data) -> np.ndarray:
        check_is_fitted(self)
        header = read_stream_header(data)
        if header.config.n_columns != self.n_features_in_:
            raise ValueError(f"stream has {header.config.n_columns} columns, "
                             f"codec was fitted on {self.n_features_in_}")
        return decode_stream(data)

    def score(self, X, y=None) -> float:
        """Compression ratio: raw bytes over compressed bytes."""
        X = check_series(X, self.bitwidth)
        raw = X.size * self.bitwidth // 8
        return raw / len(self.transform(X))
