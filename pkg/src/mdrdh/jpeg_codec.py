"""Baseline grayscale JPEG: segment parsing, bit-exact serialization,
entropy decoding/encoding of the quantized coefficients, and a reference
pixel decoder.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from . import _kernels as K
from .errors import (
    ArithmeticCoding,
    BlockOverflow,
    InvalidCode,
    InvalidMarker,
    NonCanonicalScan,
    NotBaseline,
    NotFullTable,
    NotGrayscale,
    RestartIntervalsPresent,
    TruncatedStream,
    UnmappableSymbol,
)
from .huffman import AC, DC, N_AC_SYMBOLS, AC_SYMBOL_DOMAIN, CodeAssignment, HuffmanSpec

SOI = 0xD8
EOI = 0xD9
SOS = 0xDA
DQT = 0xDB
DHT = 0xC4
DRI = 0xDD
SOF0 = 0xC0
DAC = 0xCC
APP15 = 0xEF
COM = 0xFE

_ARITHMETIC_SOF = {0xC9, 0xCA, 0xCB, 0xCD, 0xCE, 0xCF}
_OTHER_SOF = {0xC1, 0xC2, 0xC3, 0xC5, 0xC6, 0xC7}
_RST = set(range(0xD0, 0xD8))

# ZIGZAG[i] = raster index (row*8+col) of the i-th zigzag coefficient
ZIGZAG = np.array([
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63,
])


@dataclass(frozen=True)
class Segment:
    marker: int
    payload: bytes | None = None  # None for SOI/EOI

    def to_bytes(self) -> bytes:
        if self.payload is None:
            return bytes([0xFF, self.marker])
        return bytes([0xFF, self.marker]) + struct.pack(">H", len(self.payload) + 2) + self.payload


@dataclass(frozen=True)
class Frame:
    precision: int
    height: int
    width: int
    component_id: int
    quant_id: int

    @property
    def blocks_wide(self) -> int:
        return -(-self.width // 8)

    @property
    def blocks_high(self) -> int:
        return -(-self.height // 8)


@dataclass(frozen=True)
class JpegFile:
    segments: tuple
    scan_data: bytes  # entropy-coded bytes after SOS, byte-stuffed as stored

    def serialize(self) -> bytes:
        return serialize(self)

    def index_of(self, marker: int) -> int:
        for i, seg in enumerate(self.segments):
            if seg.marker == marker:
                return i
        raise KeyError(marker)

    @cached_property
    def frame(self) -> Frame:
        p = self.segments[self.index_of(SOF0)].payload
        precision, height, width, ncomp = struct.unpack(">BHHB", p[:6])
        cid, _sampling, tq = p[6], p[7], p[8]
        return Frame(precision, height, width, cid, tq)

    @cached_property
    def scan_tables(self) -> tuple[int, int]:
        """(dc table id, ac table id) referenced by the scan."""
        p = self.segments[self.index_of(SOS)].payload
        t = p[2]
        return t >> 4, t & 15

    def huffman_specs(self) -> list[tuple[int, HuffmanSpec]]:
        """All Huffman tables in file order as (segment index, spec); later
        definitions of the same table replace earlier ones when decoding."""
        out = []
        for i, seg in enumerate(self.segments):
            if seg.marker == DHT:
                out.extend((i, spec) for spec in parse_dht(seg.payload))
        return out

    def _table(self, table_class: int, table_id: int) -> HuffmanSpec:
        sos = self.index_of(SOS)
        found = None
        for i, spec in self.huffman_specs():
            if i < sos and spec.table_class == table_class and spec.table_id == table_id:
                found = spec
        if found is None:
            raise InvalidMarker(f"scan references undefined Huffman table {table_class}/{table_id}")
        return found

    @property
    def dc_spec(self) -> HuffmanSpec:
        return self._table(DC, self.scan_tables[0])

    @property
    def ac_spec(self) -> HuffmanSpec:
        return self._table(AC, self.scan_tables[1])

    @property
    def quant_table(self) -> np.ndarray:
        """Quantization steps in zigzag order."""
        want = self.frame.quant_id
        table = None
        for seg in self.segments:
            if seg.marker == DQT:
                p = seg.payload
                off = 0
                while off < len(p):
                    pq, tq = p[off] >> 4, p[off] & 15
                    off += 1
                    if pq == 0:
                        vals = np.frombuffer(p[off:off + 64], dtype=np.uint8).astype(np.int64)
                        off += 64
                    else:
                        vals = np.frombuffer(p[off:off + 128], dtype=">u2").astype(np.int64)
                        off += 128
                    if tq == want:
                        table = vals
        if table is None:
            raise InvalidMarker(f"quantization table {want} not defined")
        return table

    def with_ac_spec(self, spec: HuffmanSpec) -> "JpegFile":
        """Rewrite the DHT segment carrying the scan's AC table."""
        sos = self.index_of(SOS)
        target = None
        for i, s in self.huffman_specs():
            if i < sos and s.table_class == AC and s.table_id == spec.table_id:
                target = i
        if target is None:
            raise InvalidMarker("no AC table to replace")
        tables = parse_dht(self.segments[target].payload)
        tables = [spec if (t.table_class == AC and t.table_id == spec.table_id) else t for t in tables]
        segs = list(self.segments)
        segs[target] = Segment(DHT, b"".join(t.to_bytes() for t in tables))
        return replace(self, segments=tuple(segs))

    def with_scan_data(self, data: bytes) -> "JpegFile":
        return replace(self, scan_data=bytes(data))

    def with_segments(self, segments) -> "JpegFile":
        return replace(self, segments=tuple(segments))


def parse_dht(payload: bytes) -> list[HuffmanSpec]:
    specs = []
    off = 0
    while off < len(payload):
        if off + 17 > len(payload):
            raise TruncatedStream("DHT segment shorter than its table header")
        tc, th = payload[off] >> 4, payload[off] & 15
        counts = tuple(payload[off + 1:off + 17])
        n = sum(counts)
        symbols = tuple(payload[off + 17:off + 17 + n])
        if len(symbols) != n:
            raise TruncatedStream("DHT segment shorter than its symbol list")
        if tc not in (DC, AC) or th > 3:
            raise InvalidMarker(f"bad Huffman table class/id {tc}/{th}")
        specs.append(HuffmanSpec(tc, th, counts, symbols))
        off += 17 + n
    return specs


def parse(data: bytes) -> JpegFile:
    """Split a baseline grayscale JPEG into segments plus entropy-coded data."""
    data = bytes(data)
    n = len(data)
    if n < 4 or data[0] != 0xFF or data[1] != SOI:
        if n < 2:
            raise TruncatedStream("file too short")
        raise InvalidMarker("missing SOI")
    segments = [Segment(SOI)]
    pos = 2
    scan_data = None
    sof_seen = 0
    while True:
        if pos + 2 > n:
            raise TruncatedStream("stream ended before EOI")
        if data[pos] != 0xFF:
            raise InvalidMarker(f"expected marker at offset {pos}")
        marker = data[pos + 1]
        pos += 2
        if marker == EOI:
            if scan_data is None:
                raise InvalidMarker("EOI before any scan")
            segments.append(Segment(EOI))
            if pos != n:
                raise InvalidMarker("trailing bytes after EOI")
            break
        if marker in (SOI, 0xFF, 0x00) or marker in _RST:
            raise InvalidMarker(f"unexpected marker 0xFF{marker:02X}")
        if pos + 2 > n:
            raise TruncatedStream("segment length missing")
        (length,) = struct.unpack(">H", data[pos:pos + 2])
        if length < 2:
            raise InvalidMarker("segment length < 2")
        if pos + length > n:
            raise TruncatedStream(f"segment 0xFF{marker:02X} runs past end of file")
        payload = data[pos + 2:pos + length]
        pos += length
        if marker in _ARITHMETIC_SOF or marker == DAC:
            raise ArithmeticCoding(f"arithmetic coding marker 0xFF{marker:02X}")
        if marker in _OTHER_SOF:
            raise NotBaseline(f"SOF marker 0xFF{marker:02X} is not baseline")
        if marker == SOF0:
            sof_seen += 1
            if len(payload) < 6:
                raise TruncatedStream("short SOF0")
            if payload[5] != 1:
                raise NotGrayscale(f"{payload[5]} components")
            if payload[0] != 8:
                raise NotBaseline("sample precision is not 8 bits")
        if marker == DRI and len(payload) >= 2 and struct.unpack(">H", payload[:2])[0] != 0:
            raise RestartIntervalsPresent("DRI with nonzero interval")
        if marker == DHT:
            parse_dht(payload)
        segments.append(Segment(marker, payload))
        if marker == SOS:
            if scan_data is not None:
                raise NotBaseline("more than one scan")
            if sof_seen != 1:
                raise NotBaseline("scan without exactly one SOF0")
            if len(payload) < 6 or payload[0] != 1:
                raise NotGrayscale("scan must cover exactly one component")
            ss, se, a = payload[-3], payload[-2], payload[-1]
            if (ss, se, a) != (0, 63, 0):
                raise NotBaseline("spectral selection/approximation not baseline")
            end = _scan_end(data, pos)
            scan_data = data[pos:end]
            pos = end
    if sof_seen != 1:
        raise NotBaseline("expected exactly one SOF0")
    return JpegFile(tuple(segments), scan_data)


def _scan_end(data: bytes, start: int) -> int:
    i = data.find(b"\xff", start)
    while i != -1:
        if i + 1 >= len(data):
            raise TruncatedStream("scan ends mid-marker")
        nxt = data[i + 1]
        if nxt == 0x00:
            i = data.find(b"\xff", i + 2)
            continue
        if nxt in _RST:
            raise RestartIntervalsPresent("RST marker inside scan")
        return i
    raise TruncatedStream("scan not terminated by a marker")


def serialize(jpeg: JpegFile) -> bytes:
    out = bytearray()
    for seg in jpeg.segments:
        out += seg.to_bytes()
        if seg.marker == SOS:
            out += jpeg.scan_data
    return bytes(out)


def destuff(data: bytes) -> np.ndarray:
    arr = np.frombuffer(data, dtype=np.uint8)
    ff = np.flatnonzero(arr[:-1] == 0xFF)
    if ff.size == 0:
        return arr.copy()
    return np.delete(arr, ff + 1)


def stuff(arr: np.ndarray) -> bytes:
    ff = np.flatnonzero(arr == 0xFF)
    if ff.size == 0:
        return arr.tobytes()
    return np.insert(arr, ff + 1, 0).tobytes()


@dataclass
class CoefficientImage:
    """Quantized coefficients: ``blocks[j, i]`` is zigzag coefficient i+1 of
    block j (column 0 holds the absolute DC value)."""

    width: int
    height: int
    blocks: np.ndarray
    quant_table: np.ndarray
    dc_spec: HuffmanSpec
    ac_spec: HuffmanSpec

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def blocks_wide(self) -> int:
        return -(-self.width // 8)

    def copy(self) -> "CoefficientImage":
        return replace(self, blocks=self.blocks.copy())

    def with_blocks(self, blocks: np.ndarray) -> "CoefficientImage":
        return replace(self, blocks=blocks)


@dataclass
class TokenStream:
    """AC tokens in scan order (struct of arrays).

    ``positions`` is the DHT position of the code emitted for each token;
    ``k`` is the 0-based zigzag index of the coefficient (-1 for EOB/ZRL).
    """

    symbols: np.ndarray
    values: np.ndarray
    block: np.ndarray
    k: np.ndarray
    positions: np.ndarray

    def __len__(self) -> int:
        return int(self.symbols.shape[0])

    @property
    def runs(self) -> np.ndarray:
        return self.symbols >> 4

    @property
    def sizes(self) -> np.ndarray:
        return self.symbols & 15

    def with_positions(self, positions: np.ndarray) -> "TokenStream":
        return replace(self, positions=np.asarray(positions, dtype=np.int16))


def _check_full_table(spec: HuffmanSpec) -> None:
    # a marked table repeats one symbol, so only the entry count is checked
    if len(spec.symbols) != N_AC_SYMBOLS or not set(spec.symbols) <= AC_SYMBOL_DOMAIN:
        raise NotFullTable(f"AC table carries {len(spec.symbols)} symbols, need {N_AC_SYMBOLS}")


def tokenize(blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    return K.tokenize(np.ascontiguousarray(blocks, dtype=np.int32))


def entropy_decode(jpeg: JpegFile) -> tuple[CoefficientImage, TokenStream]:
    frame = jpeg.frame
    dc_spec = jpeg.dc_spec
    ac_spec = jpeg.ac_spec
    _check_full_table(ac_spec)
    dca = CodeAssignment(dc_spec)
    aca = CodeAssignment(ac_spec)
    nblocks = frame.blocks_wide * frame.blocks_high
    raw = destuff(jpeg.scan_data)
    blocks, positions, status, bits_used = K.decode_scan(
        raw, nblocks,
        dca.maxcode, dca.mincode, dca.valptr, dca.symbols,
        aca.maxcode, aca.mincode, aca.valptr, aca.symbols,
    )
    if status == K.TRUNCATED:
        raise TruncatedStream("entropy-coded data ended early")
    if status == K.INVALID_CODE:
        raise InvalidCode("bit pattern not in Huffman table")
    if status == K.BLOCK_OVERFLOW:
        raise BlockOverflow("block holds more than 64 coefficients")
    symbols, values, tblock, tk = tokenize(blocks)
    if symbols.shape[0] != positions.shape[0] or not np.array_equal(
        aca.symbols[positions.astype(np.int64)], symbols.astype(np.int64)
    ):
        raise NonCanonicalScan("token stream differs from canonical run-length coding")
    image = CoefficientImage(frame.width, frame.height, blocks, jpeg.quant_table, dc_spec, ac_spec)
    tokens = TokenStream(symbols, values, tblock, tk.astype(np.int16), positions)
    return image, tokens


def default_positions(tokens_or_blocks, assignment: CodeAssignment) -> np.ndarray:
    """Code positions of each AC token under ``assignment`` (first position
    of each symbol)."""
    if isinstance(tokens_or_blocks, TokenStream):
        symbols = tokens_or_blocks.symbols
    else:
        symbols = tokenize(tokens_or_blocks)[0]
    pos = assignment.pos_by_symbol[symbols.astype(np.int64)]
    if pos.size and pos.min() < 0:
        missing = sorted({int(s) for s in symbols[pos < 0]})
        raise UnmappableSymbol("symbols not in table: " + ", ".join(f"0x{s:02X}" for s in missing))
    return pos.astype(np.int16)


def encode_raw(image: CoefficientImage, ac_assignment: CodeAssignment | None = None,
               positions: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """Entropy-code to de-stuffed bytes; returns (bytes, exact bit count)."""
    dca = CodeAssignment(image.dc_spec)
    aca = ac_assignment if ac_assignment is not None else CodeAssignment(image.ac_spec)
    blocks = np.ascontiguousarray(image.blocks, dtype=np.int32)
    if positions is None:
        positions = default_positions(blocks, aca)
    dc_code = dca.code_by_symbol[:12].copy()
    dc_len = dca.length_by_symbol[:12].copy()
    raw, nbits = K.encode_scan(blocks, dc_code, dc_len, np.asarray(positions, dtype=np.int16),
                               aca.codes, aca.lengths)
    if nbits < 0:
        raise UnmappableSymbol("code position stream does not match the coefficient tokens")
    return raw, int(nbits)


def entropy_encode(image: CoefficientImage, ac_assignment: CodeAssignment | None = None,
                   positions: np.ndarray | None = None) -> bytes:
    """Byte-stuffed scan data for ``image``."""
    raw, _ = encode_raw(image, ac_assignment, positions)
    return stuff(raw)


def scan_bit_count(image: CoefficientImage, ac_assignment: CodeAssignment | None = None) -> int:
    dca = CodeAssignment(image.dc_spec)
    aca = ac_assignment if ac_assignment is not None else CodeAssignment(image.ac_spec)
    return int(K.scan_bit_count(np.ascontiguousarray(image.blocks, dtype=np.int32),
                                dca.length_by_symbol[:12].copy(), aca.length_by_symbol))


def _idct_matrix() -> np.ndarray:
    u = np.arange(8)[:, None]
    x = np.arange(8)[None, :]
    c = np.where(u == 0, 1 / np.sqrt(2), 1.0)
    return 0.5 * c * np.cos((2 * x + 1) * u * np.pi / 16)


_IDCT = _idct_matrix()


def decode_pixels(image: CoefficientImage) -> np.ndarray:
    """Reference decode to an (height, width) uint8 array."""
    n = image.n_blocks
    deq = np.zeros((n, 64), dtype=np.float64)
    deq[:, ZIGZAG] = image.blocks * image.quant_table[None, :]
    coef = deq.reshape(n, 8, 8)
    spatial = np.einsum("ux,nuv,vy->nxy", _IDCT, coef, _IDCT, optimize=True) + 128.0
    rounded = np.sign(spatial) * np.floor(np.abs(spatial) + 0.5)
    samples = np.clip(rounded, 0, 255).astype(np.uint8)
    bw = image.blocks_wide
    bh = n // bw
    full = samples.reshape(bh, bw, 8, 8).transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)
    return full[: image.height, : image.width].copy()
