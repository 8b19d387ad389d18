"""Embedding and extraction front end, plus the side-information segment."""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .dct_domain import (
    CodeLengthTable,
    DctEmbedPlan,
    FrequencyCostTable,
    code_length_tables,
    embed_dct,
    extract_dct,
    frequency_costs,
    plan_dct,
    sort_blocks,
)
from .distribution import DistributionState, initialize_distribution, judge_peak, refine_L2
from .entropy_domain import (
    EntropyCostTable,
    PeakZero,
    VlcHistogram,
    build_histogram,
    entropy_costs,
    extract_restore,
    optimize_table,
    select_peak,
    shift_and_embed,
)
from .errors import (
    AlreadyMarked,
    CapacityError,
    InsufficientCapacity,
    IntegrityFailure,
    NoFeasiblePeak,
    NonCanonicalScan,
    NonDefaultTable,
    NoZeroPoint,
    NotMarked,
)
from .huffman import CodeAssignment, standard_ac_spec
from .jpeg_codec import (
    CoefficientImage,
    JpegFile,
    Segment,
    TokenStream,
    encode_raw,
    entropy_decode,
    entropy_encode,
    parse,
    stuff,
    tokenize,
)

MODES = ("multi", "dct-only", "entropy-only", "huffopt-only")

APP15 = 0xEF
SIDE_ID = b"MDRDH\x00"
SIDE_VERSION = 1
_SIDE_FMT = ">BIIQIBI"
SIDE_RECORD_BYTES = struct.calcsize(_SIDE_FMT)  # 26
SIDE_SEGMENT_BYTES = 4 + len(SIDE_ID) + SIDE_RECORD_BYTES


@dataclass(frozen=True)
class SideInfo:
    L1: int
    L2: int
    freq_set: tuple
    n_bar: int
    run_bar: int
    payload_len: int
    version: int = SIDE_VERSION

    @property
    def freq_bitmap(self) -> int:
        bm = 0
        for k in self.freq_set:
            bm |= 1 << (k - 2)
        return bm

    @property
    def k_bar(self) -> int:
        return len(self.freq_set)

    def pack(self) -> bytes:
        return SIDE_ID + struct.pack(_SIDE_FMT, self.version, self.L1, self.L2, self.freq_bitmap,
                                     self.n_bar, self.run_bar, self.payload_len)

    @classmethod
    def unpack(cls, payload: bytes) -> "SideInfo":
        if not payload.startswith(SIDE_ID) or len(payload) != len(SIDE_ID) + SIDE_RECORD_BYTES:
            raise IntegrityFailure("malformed side-information segment")
        version, L1, L2, bm, n_bar, run_bar, plen = struct.unpack(_SIDE_FMT, payload[len(SIDE_ID):])
        if version != SIDE_VERSION:
            raise IntegrityFailure(f"unsupported side-information version {version}")
        if bm >> 63:
            raise IntegrityFailure("frequency bitmap sets a bit beyond 63 AC frequencies")
        freqs = tuple(k for k in range(2, 65) if bm >> (k - 2) & 1)
        if L1 + L2 != plen:
            raise IntegrityFailure("side information budgets do not add up")
        return cls(L1, L2, freqs, n_bar, run_bar, plen, version)

    def plan(self) -> DctEmbedPlan:
        return DctEmbedPlan(self.freq_set, self.n_bar, self.L1, self.run_bar)


def _is_side_segment(seg: Segment) -> bool:
    return seg.marker == APP15 and seg.payload is not None and seg.payload.startswith(SIDE_ID)


def find_side_info(jpeg: JpegFile) -> SideInfo | None:
    for seg in jpeg.segments:
        if _is_side_segment(seg):
            return SideInfo.unpack(seg.payload)
    return None


def insert_side_info(jpeg: JpegFile, info: SideInfo) -> JpegFile:
    """Place the segment after SOI and any leading APPn segments."""
    segs = list(jpeg.segments)
    i = 1
    while i < len(segs) and 0xE0 <= segs[i].marker <= 0xEF:
        i += 1
    segs.insert(i, Segment(APP15, info.pack()))
    return jpeg.with_segments(segs)


def strip_side_info(jpeg: JpegFile) -> JpegFile:
    return jpeg.with_segments(s for s in jpeg.segments if not _is_side_segment(s))


@dataclass
class EmbedResult:
    data: bytes
    mode: str
    side_info: SideInfo
    state: DistributionState | None = None
    peak: PeakZero | None = None
    peak_symbol: int | None = None
    notes: list = field(default_factory=list)

    @property
    def L1(self) -> int:
        return self.side_info.L1

    @property
    def L2(self) -> int:
        return self.side_info.L2


@dataclass
class _Stage:
    """Image after the DCT share is embedded, with its sorted histogram."""

    image: CoefficientImage
    plan: DctEmbedPlan
    hist: VlcHistogram
    assignment: CodeAssignment
    tokens: TokenStream


@dataclass
class _Source:
    jpeg: JpegFile
    image: CoefficientImage
    tokens: TokenStream
    std: CodeAssignment
    block_order: np.ndarray
    runs: np.ndarray

    def dct_costs(self, assignment: CodeAssignment) -> tuple[CodeLengthTable, FrequencyCostTable]:
        table = code_length_tables(assignment)
        return table, frequency_costs(self.image, table, self.runs)


def _load(data: bytes) -> _Source:
    jpeg = parse(data)
    if find_side_info(jpeg) is not None:
        raise AlreadyMarked("input already carries a side-information segment")
    std_spec = standard_ac_spec(jpeg.ac_spec.table_id)
    if jpeg.ac_spec != std_spec:
        raise NonDefaultTable("AC table differs from the standard luminance table")
    image, tokens = entropy_decode(jpeg)
    if entropy_encode(image) != jpeg.scan_data:
        raise NonCanonicalScan("scan does not re-encode to identical bytes")
    blocks = np.ascontiguousarray(image.blocks, dtype=np.int32)
    return _Source(jpeg, image, tokens, CodeAssignment(std_spec), sort_blocks(image),
                   K.preceding_runs(blocks))


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise ValueError("payload must be a sequence of 0/1 bits")
    return arr


def _tokens_of(image: CoefficientImage) -> TokenStream:
    symbols, values, block, k = tokenize(image.blocks)
    return TokenStream(symbols, values, block, k.astype(np.int16), np.zeros(symbols.shape[0], np.int16))


def _finish(src: _Source, image: CoefficientImage, tokens: TokenStream, assignment: CodeAssignment,
            info: SideInfo) -> bytes:
    raw, _ = encode_raw(image, assignment, tokens.positions)
    jpeg = src.jpeg.with_ac_spec(assignment.spec).with_scan_data(stuff(raw))
    return insert_side_info(jpeg, info).serialize()


def _entropy_stage(src: _Source, stage: _Stage, bits: np.ndarray, pz: PeakZero | None):
    tokens = stage.tokens.with_positions(stage.assignment.pos_by_symbol[stage.tokens.symbols.astype(np.int64)])
    if pz is None or bits.size == 0:
        return tokens, stage.assignment
    return shift_and_embed(tokens, stage.assignment, pz, bits)


def _peak_zero(hist: VlcHistogram, symbol: int) -> PeakZero | None:
    try:
        ec = entropy_costs(hist)
    except NoZeroPoint:
        return None
    P = ec.find_symbol(symbol)
    return None if P is None else PeakZero(P, ec.zero_of(P))


def _capacity_error(msg: str, uf: FrequencyCostTable | None, hist: VlcHistogram | None) -> CapacityError:
    dct = uf.total_capacity if uf is not None else 0
    ent = max(int(hist.counts.max()) - 1, 0) if hist is not None else 0
    return CapacityError(f"{msg} (DCT capacity {dct}, entropy capacity {ent})", dct, ent)


def _embed_multi(src: _Source, bits: np.ndarray) -> EmbedResult:
    length = int(bits.size)
    hist0 = build_histogram(src.tokens, src.std)
    _, uf = src.dct_costs(src.std)
    sorted0, _ = optimize_table(hist0, src.std)
    try:
        ec0: EntropyCostTable | None = entropy_costs(sorted0)
    except NoZeroPoint:
        ec0 = None
    state = initialize_distribution(uf, ec0, length)
    cache: dict[int, _Stage] = {}

    def stage_for(L1: int) -> _Stage:
        if L1 not in cache:
            plan = plan_dct(src.image, L1, uf, src.block_order)
            marked, run_bar = embed_dct(src.image, bits[:L1], plan, src.block_order)
            tokens = _tokens_of(marked)
            hs, asg = optimize_table(build_histogram(tokens, src.std), src.std)
            cache[L1] = _Stage(marked, plan.with_run_bar(run_bar), hs, asg, tokens)
        return cache[L1]

    def settle(s: DistributionState) -> DistributionState:
        try:
            return refine_L2(stage_for(s.L1).hist, s, remeasure=lambda t: stage_for(t.L1).hist,
                             dct_capacity=uf.total_capacity)
        except InsufficientCapacity as exc:
            raise _capacity_error(str(exc), uf, sorted0) from None

    state = settle(state)
    if state.L2 > 0:
        try:
            ec1 = entropy_costs(stage_for(state.L1).hist)
        except NoZeroPoint:
            ec1 = None
        if ec1 is not None:
            judged = judge_peak(ec1, state, uf)
            if judged.peak_symbol != state.peak_symbol:
                state = settle(judged)
            else:
                state = judged
    stage = stage_for(state.L1)
    pz = _peak_zero(stage.hist, state.peak_symbol) if state.L2 > 0 else None
    if state.L2 > 0 and (pz is None or stage.hist.count(pz.P) <= state.L2):
        # peak lost its zero point after re-sorting; everything goes to DCT
        if length > uf.total_capacity:
            raise _capacity_error("peak unusable after DCT embedding", uf, stage.hist)
        state = DistributionState(length, length, 0, fallback=True)
        stage = stage_for(length)
        pz = None
    tokens, asg = _entropy_stage(src, stage, bits[state.L1:], pz)
    info = SideInfo(state.L1, state.L2, stage.plan.freq_set, stage.plan.n_bar, stage.plan.run_bar, length)
    data = _finish(src, stage.image, tokens, asg, info)
    return EmbedResult(data, "multi", info, state, pz, state.peak_symbol)


def _embed_dct_only(src: _Source, bits: np.ndarray) -> EmbedResult:
    length = int(bits.size)
    _, uf = src.dct_costs(src.std)
    if length > uf.total_capacity:
        raise _capacity_error(f"{length} bits exceed the DCT domain", uf, None)
    plan = plan_dct(src.image, length, uf, src.block_order)
    marked, run_bar = embed_dct(src.image, bits, plan, src.block_order)
    tokens = _tokens_of(marked)
    tokens = tokens.with_positions(src.std.pos_by_symbol[tokens.symbols.astype(np.int64)])
    info = SideInfo(length, 0, plan.freq_set, plan.n_bar, run_bar, length)
    data = _finish(src, marked, tokens, src.std, info)
    return EmbedResult(data, "dct-only", info, DistributionState(length, length, 0))


def _embed_entropy_only(src: _Source, bits: np.ndarray) -> EmbedResult:
    length = int(bits.size)
    sorted0, asg = optimize_table(build_histogram(src.tokens, src.std), src.std)
    tokens = src.tokens.with_positions(asg.pos_by_symbol[src.tokens.symbols.astype(np.int64)])
    pz = None
    if length:
        try:
            pz = select_peak(sorted0, length)
        except (NoFeasiblePeak, NoZeroPoint) as exc:
            raise _capacity_error(f"{length} bits do not fit one peak: {exc}", None, sorted0) from None
        tokens, asg = shift_and_embed(tokens, asg, pz, bits)
    info = SideInfo(0, length, (), 0, 0, length)
    data = _finish(src, src.image, tokens, asg, info)
    symbol = int(sorted0.symbols[pz.P - 1]) if pz else None
    return EmbedResult(data, "entropy-only", info, DistributionState(length, 0, length), pz, symbol)


def _embed_huffopt(src: _Source, bits: np.ndarray) -> EmbedResult:
    if bits.size:
        raise CapacityError("huffopt-only carries no payload", 0, 0)
    _, asg = optimize_table(build_histogram(src.tokens, src.std), src.std)
    tokens = src.tokens.with_positions(asg.pos_by_symbol[src.tokens.symbols.astype(np.int64)])
    info = SideInfo(0, 0, (), 0, 0, 0)
    return EmbedResult(_finish(src, src.image, tokens, asg, info), "huffopt-only", info,
                       DistributionState(0, 0, 0))


_MODES = {
    "multi": _embed_multi,
    "dct-only": _embed_dct_only,
    "entropy-only": _embed_entropy_only,
    "huffopt-only": _embed_huffopt,
}


def embed_report(data: bytes, bits, mode: str = "multi") -> EmbedResult:
    if mode not in _MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    return _MODES[mode](_load(bytes(data)), _as_bits(bits))


def embed(data: bytes, bits, mode: str = "multi") -> bytes:
    """Hide ``bits`` in a baseline grayscale JPEG; returns the marked file."""
    return embed_report(data, bits, mode).data


def extract(data: bytes) -> tuple[np.ndarray, bytes]:
    """Recover (payload bits, original file bytes) from a marked file."""
    jpeg = parse(bytes(data))
    info = find_side_info(jpeg)
    if info is None:
        raise NotMarked("no side-information segment")
    image, tokens = entropy_decode(jpeg)
    assignment = CodeAssignment(jpeg.ac_spec)
    if info.L2 > 0:
        bits2, _, _ = extract_restore(tokens, assignment, info.L2)
    else:
        if assignment.duplicate_positions():
            raise IntegrityFailure("duplicated code present but side info says L2 = 0")
        bits2 = np.zeros(0, dtype=np.uint8)
    if info.L1 > 0:
        bits1, image = extract_dct(image, info.plan(), sort_blocks(image))
    else:
        bits1 = np.zeros(0, dtype=np.uint8)
    std = standard_ac_spec(jpeg.ac_spec.table_id)
    original = strip_side_info(jpeg.with_ac_spec(std)).with_scan_data(
        entropy_encode(image, CodeAssignment(std)))
    payload = np.concatenate([bits1, bits2]).astype(np.uint8)
    if payload.size != info.payload_len:
        raise IntegrityFailure("recovered payload length disagrees with side info")
    return payload, original.serialize()
