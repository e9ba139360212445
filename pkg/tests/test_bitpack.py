import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sprintz import bitpack
from sprintz.bitpack import BLOCK_SIZE

from _reference import ref_pack, ref_signed, ref_unpack, ref_width, ref_zigzag


@pytest.mark.parametrize("w", [8, 16])
def test_zigzag_exhaustive(w):
    u = np.arange(1 << w)
    signed = np.array([ref_signed(int(x), w) for x in u])
    expected = np.array([ref_zigzag(int(v), w) for v in signed])
    assert np.array_equal(bitpack.zigzag_encode(signed, w), expected)
    assert np.array_equal(bitpack.zigzag_decode(expected, w), signed)


def test_zigzag_small_values():
    assert bitpack.zigzag_encode([0, -1, 1, -2, 2], 8).tolist() == [0, 1, 2, 3, 4]
    assert bitpack.zigzag_encode([-128, 127], 8).tolist() == [255, 254]


def test_required_bits_examples():
    assert bitpack.required_bits([0, 3, 16, 1], 8) == 5
    assert bitpack.required_bits([0] * 8, 8) == 0
    # 7 bits is bumped to 8
    assert bitpack.required_bits([64], 8) == 8
    assert bitpack.required_bits([1 << 14], 16) == 16
    assert bitpack.required_bits([255], 8) == 8


def test_width_never_w_minus_one():
    rng = np.random.default_rng(0)
    for w in (8, 16):
        zz = rng.integers(0, 1 << w, size=(500, BLOCK_SIZE, 3)) >> rng.integers(0, w + 1, size=(500, 1, 3))
        widths = bitpack.block_widths(zz, w)
        assert not (widths == w - 1).any()
        for b in range(50):
            for j in range(3):
                assert widths[b, j] == ref_width(zz[b, :, j].tolist(), w)


def test_width_codes_round_trip():
    for w in (8, 16):
        widths = np.array([n for n in range(w + 1) if n != w - 1])
        codes = bitpack.encode_width_codes(widths, w)
        assert codes.max() < w
        assert np.array_equal(bitpack.decode_width_codes(codes, w), widths)
        assert bitpack.decode_width_codes([w - 1], w).tolist() == [w]


def test_layout_threshold():
    assert not bitpack.is_row_major(4, 8)
    assert bitpack.is_row_major(5, 8)
    assert not bitpack.is_row_major(2, 16)
    assert bitpack.is_row_major(3, 16)


def _block(nbits, w, seed=0):
    rng = np.random.default_rng(seed)
    nbits = np.asarray(nbits)
    return rng.integers(0, 1 << 16, size=(BLOCK_SIZE, len(nbits))) & ((1 << nbits) - 1)


def test_pack_univariate_size():
    block = _block([5], 8)
    payload = bitpack.pack_column_major(block, [5], 8)
    assert len(payload) == 5
    assert payload == ref_pack(block.tolist(), [5], 8)


def test_pack_four_columns_size():
    nbits = [3, 1, 8, 2]
    block = _block(nbits, 8)
    payload = bitpack.pack_column_major(block, nbits, 8)
    assert len(payload) == 14
    assert payload == ref_pack(block.tolist(), nbits, 8)


def test_pack_row_major_nine_columns():
    nbits = [5, 3, 4, 4, 4, 4, 4, 4, 4]
    block = _block(nbits, 8)
    payload = bitpack.pack_row_major(block, nbits, 8)
    assert len(payload) == 40
    assert payload == ref_pack(block.tolist(), nbits, 8)


def test_pack_full_width_is_raw_rows():
    block = np.random.default_rng(1).integers(0, 256, size=(BLOCK_SIZE, 33))
    payload = bitpack.pack_row_major(block, [8] * 33, 8)
    assert payload == block.astype(np.uint8).tobytes()


def test_layout_guards():
    with pytest.raises(ValueError):
        bitpack.pack_column_major(np.zeros((8, 5)), [1] * 5, 8)
    with pytest.raises(ValueError):
        bitpack.pack_row_major(np.zeros((8, 2)), [1] * 2, 8)


def test_unpack_rejects_wrong_length():
    with pytest.raises(ValueError):
        bitpack.unpack_block([3, 3], b"\0" * 5, 8)


def test_column_segments_are_whole_bytes():
    nbits = [3, 0, 7, 2]
    block = _block(nbits, 8, seed=3)
    payload = bitpack.pack_column_major(block, nbits, 8)
    offset = 0
    for j, n in enumerate(nbits):
        seg = payload[offset:offset + n]
        assert seg == ref_pack(block[:, [j]].tolist(), [n], 8)
        offset += n


@st.composite
def _blocks(draw):
    w = draw(st.sampled_from([8, 16]))
    d = draw(st.integers(1, 40))
    widths = draw(st.lists(st.sampled_from([n for n in range(w + 1) if n != w - 1]),
                           min_size=d, max_size=d))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    nbits = np.array(widths)
    block = rng.integers(0, 1 << w, size=(BLOCK_SIZE, d)) & ((1 << nbits) - 1)
    return w, nbits, block


@settings(max_examples=200, deadline=None)
@given(_blocks())
def test_pack_matches_reference(case):
    w, nbits, block = case
    payload = bitpack.pack_blocks(block[None], nbits[None], w)
    assert payload == ref_pack(block.tolist(), nbits.tolist(), w)
    assert len(payload) == bitpack.payload_sizes(nbits[None], w)[0]
    assert np.array_equal(bitpack.unpack_block(nbits, payload, w), block)
    assert ref_unpack(payload, nbits.tolist(), w) == block.tolist()


def test_batched_packing_concatenates():
    rng = np.random.default_rng(4)
    for d in (3, 9):
        nbits = rng.integers(0, 7, size=(20, d))
        nbits = bitpack.normalize_widths(nbits, 8)
        errs = rng.integers(0, 256, size=(20, BLOCK_SIZE, d)) & ((1 << nbits[:, None, :]) - 1)
        joined = b"".join(bitpack.pack_blocks(errs[b:b + 1], nbits[b:b + 1], 8) for b in range(20))
        assert bitpack.pack_blocks(errs, nbits, 8) == joined
        assert np.array_equal(bitpack.unpack_blocks(joined, nbits, 8), errs)


def test_headers_round_trip():
    rng = np.random.default_rng(5)
    for w in (8, 16):
        codes = rng.integers(0, w, size=(3, 7))
        data = bitpack.pack_headers(codes, w)
        assert len(data) == bitpack.header_region_size(3, 7, w)
        assert np.array_equal(bitpack.unpack_headers(data, 3, 7, w), codes)
