import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from PIL import Image

from mdrdh import jpeg_codec as jc
from mdrdh.errors import (
    ArithmeticCoding,
    InvalidCode,
    InvalidMarker,
    KraftViolation,
    NonCanonicalScan,
    NotBaseline,
    NotFullTable,
    NotGrayscale,
    RestartIntervalsPresent,
    TruncatedStream,
    UnmappableSymbol,
)
from mdrdh.huffman import (
    AC,
    CodeAssignment,
    HuffmanSpec,
    standard_ac_spec,
    standard_dc_spec,
)


def _pil(pixels, **kw) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(pixels).save(buf, "JPEG", **kw)
    return buf.getvalue()


# --- Huffman codes ----------------------------------------------------------


def _codes_by_annex_c(counts, symbols):
    """Independent canonical-code oracle (size table, then code table)."""
    sizes = [length for length in range(1, 17) for _ in range(counts[length - 1])]
    out, code, k = {}, 0, 0
    si = sizes[0]
    while k < len(sizes):
        while k < len(sizes) and sizes[k] == si:
            out.setdefault(symbols[k], format(code, f"0{si}b"))
            code += 1
            k += 1
        code <<= 1
        si += 1
    return out


def test_standard_ac_codes_match_independent_construction():
    spec = standard_ac_spec()
    asg = CodeAssignment(spec)
    oracle = _codes_by_annex_c(spec.counts, spec.symbols)
    for sym, code in oracle.items():
        assert asg.code_string(sym) == code


@pytest.mark.parametrize("sym,code", [
    (0x01, "00"), (0x02, "01"), (0x03, "100"), (0x00, "1010"),
    (0x11, "1100"), (0xF0, "11111111001"), (0x82, "111111111000000"),
    (0xFA, "1111111111111110"),
])
def test_standard_ac_known_codes(sym, code):
    assert CodeAssignment(standard_ac_spec()).code_string(sym) == code


def test_kraft_violation():
    counts = (3,) + (0,) * 15
    with pytest.raises(KraftViolation):
        CodeAssignment(HuffmanSpec(AC, 0, counts, (1, 2, 3)))


def test_duplicate_positions_reported():
    syms = list(standard_ac_spec().symbols)
    syms[5] = syms[4]
    asg = CodeAssignment(standard_ac_spec().with_symbols(syms))
    assert asg.duplicate_positions() == [(4, 5)]
    assert asg.position_of(syms[4]) == 4


# --- parse / serialize ------------------------------------------------------


def test_parse_serialize_identity(camera_bytes):
    j = jc.parse(camera_bytes)
    assert jc.serialize(j) == camera_bytes
    assert j.ac_spec == standard_ac_spec()
    assert j.dc_spec == standard_dc_spec()
    assert (j.frame.width, j.frame.height) == (512, 384)


def test_stuff_destuff_inverse(rng):
    raw = rng.integers(0, 256, 5000).astype(np.uint8)
    raw[::7] = 0xFF
    assert np.array_equal(jc.destuff(jc.stuff(raw)), raw)


@given(st.binary(max_size=200))
def test_stuff_destuff_property(data):
    raw = np.frombuffer(data, dtype=np.uint8)
    stuffed = jc.stuff(raw)
    assert b"\xff" not in stuffed.replace(b"\xff\x00", b"")
    assert jc.destuff(stuffed).tobytes() == data


def test_reject_progressive():
    px = np.tile(np.arange(64, dtype=np.uint8), (64, 1))
    with pytest.raises(NotBaseline):
        jc.parse(_pil(px, progressive=True))


def test_reject_colour():
    px = np.zeros((32, 32, 3), dtype=np.uint8)
    with pytest.raises(NotGrayscale):
        jc.parse(_pil(px))


def test_reject_arithmetic(camera_bytes):
    data = bytearray(camera_bytes)
    i = data.find(b"\xff\xc0")
    data[i + 1] = 0xC9
    with pytest.raises(ArithmeticCoding):
        jc.parse(bytes(data))


def test_reject_restart_interval(camera_bytes):
    i = camera_bytes.find(b"\xff\xda")
    data = camera_bytes[:i] + b"\xff\xdd" + struct.pack(">HH", 4, 8) + camera_bytes[i:]
    with pytest.raises(RestartIntervalsPresent):
        jc.parse(data)


def test_zero_restart_interval_accepted(camera_bytes):
    i = camera_bytes.find(b"\xff\xda")
    data = camera_bytes[:i] + b"\xff\xdd" + struct.pack(">HH", 4, 0) + camera_bytes[i:]
    assert jc.serialize(jc.parse(data)) == data


def test_truncated(camera_bytes):
    with pytest.raises(TruncatedStream):
        jc.parse(camera_bytes[:len(camera_bytes) // 2])
    with pytest.raises(TruncatedStream):
        jc.parse(camera_bytes[:300])


def test_invalid_marker(camera_bytes):
    with pytest.raises(InvalidMarker):
        jc.parse(b"\x00\x00" + camera_bytes[2:])
    with pytest.raises(InvalidMarker):
        jc.parse(camera_bytes + b"\x00")


def test_partial_ac_table_rejected(camera):
    jpeg, image, _ = camera
    syms = [s for s in standard_ac_spec().symbols if s != 0xFA]
    counts = list(standard_ac_spec().counts)
    counts[15] -= 1
    small = HuffmanSpec(AC, 0, tuple(counts), tuple(syms))
    with pytest.raises(NotFullTable):
        jc.entropy_decode(jpeg.with_ac_spec(small))


# --- entropy coding ---------------------------------------------------------


def test_decode_encode_identity(camera):
    jpeg, image, tokens = camera
    assert jc.entropy_encode(image) == jpeg.scan_data
    assert len(tokens) == tokens.symbols.shape[0]
    raw, nbits = jc.encode_raw(image)
    assert nbits == jc.scan_bit_count(image)
    assert raw.size == -(-nbits // 8)


def test_pixels_match_reference_decoder(camera_bytes, camera):
    _, image, _ = camera
    ours = jc.decode_pixels(image).astype(int)
    ref = np.asarray(Image.open(io.BytesIO(camera_bytes))).astype(int)
    assert ours.shape == ref.shape
    assert np.abs(ours - ref).max() <= 1


def test_tokens_count_eob(camera):
    _, image, tokens = camera
    eob = int((tokens.symbols == 0).sum())
    trailing_zero = int((image.blocks[:, 63] == 0).sum())
    assert eob == trailing_zero


def test_invalid_code_detected(camera):
    jpeg, _, _ = camera
    # nine 1-bits are not a DC code in the standard table
    bad = jpeg.with_scan_data(b"\xff\x00" * 4 + jpeg.scan_data[8:])
    with pytest.raises(InvalidCode):
        jc.entropy_decode(bad)


def _vli(v: int) -> str:
    if v == 0:
        return ""
    size = abs(v).bit_length()
    return format(v if v > 0 else v + (1 << size) - 1, f"0{size}b")


def _reference_scan(blocks, dc: CodeAssignment, ac: CodeAssignment, zrl_block: int = -1) -> bytes:
    """Straightforward string-of-bits encoder; optionally codes a needless
    ZRL before the EOB of block ``zrl_block``."""
    out = []
    pred = 0
    for b, blk in enumerate(blocks):
        diff = int(blk[0]) - pred
        pred = int(blk[0])
        out.append(dc.code_string(abs(diff).bit_length()) + _vli(diff))
        run = 0
        for k in range(1, 64):
            v = int(blk[k])
            if v == 0:
                run += 1
                continue
            while run > 15:
                out.append(ac.code_string(0xF0))
                run -= 16
            out.append(ac.code_string((run << 4) | abs(v).bit_length()) + _vli(v))
            run = 0
        if run:
            if b == zrl_block and run >= 16:
                out.append(ac.code_string(0xF0))
            out.append(ac.code_string(0x00))
    bits = "".join(out)
    bits += "1" * (-len(bits) % 8)
    raw = np.frombuffer(int(bits, 2).to_bytes(len(bits) // 8, "big"), dtype=np.uint8)
    return jc.stuff(raw)


def test_encoder_matches_reference(camera):
    jpeg, image, _ = camera
    dc, ac = CodeAssignment(jpeg.dc_spec), CodeAssignment(jpeg.ac_spec)
    assert _reference_scan(image.blocks, dc, ac) == jc.entropy_encode(image)


def test_noncanonical_scan_detected(camera):
    jpeg, image, _ = camera
    dc, ac = CodeAssignment(jpeg.dc_spec), CodeAssignment(jpeg.ac_spec)
    empty = np.flatnonzero((image.blocks[:, 1:] != 0).sum(axis=1) == 0)
    assert empty.size
    scan = _reference_scan(image.blocks, dc, ac, zrl_block=int(empty[0]))
    with pytest.raises(NonCanonicalScan):
        jc.entropy_decode(jpeg.with_scan_data(scan))


def test_unmappable_symbol(camera):
    _, image, _ = camera
    syms = list(standard_ac_spec().symbols)
    used = int(np.flatnonzero(np.isin(syms, [0x01]))[0])
    syms[used] = syms[used + 1]
    asg = CodeAssignment(standard_ac_spec().with_symbols(syms))
    with pytest.raises(UnmappableSymbol):
        jc.encode_raw(image, asg)


def _random_blocks(draw_rng, nblocks):
    blocks = np.zeros((nblocks, 64), dtype=np.int32)
    blocks[:, 0] = draw_rng.integers(-200, 200, nblocks)
    density = draw_rng.uniform(0.02, 0.6)
    mask = draw_rng.random((nblocks, 63)) < density
    mags = draw_rng.geometric(0.4, (nblocks, 63))
    mags = np.minimum(mags, 1023)
    signs = draw_rng.choice([-1, 1], (nblocks, 63))
    blocks[:, 1:] = np.where(mask, mags * signs, 0)
    return blocks


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_blocks_roundtrip(camera, seed):
    jpeg, image, _ = camera
    r = np.random.default_rng(seed)
    blocks = _random_blocks(r, image.n_blocks)
    blocks[:, 0] = np.clip(np.cumsum(r.integers(-50, 50, image.n_blocks)), -1000, 1000)
    img2 = image.with_blocks(blocks)
    scan = jc.entropy_encode(img2)
    j2 = jc.parse(jc.serialize(jpeg.with_scan_data(scan)))
    back, _ = jc.entropy_decode(j2)
    assert np.array_equal(back.blocks, blocks)
    assert jc.entropy_encode(back) == scan
