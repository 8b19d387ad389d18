"""Histogram-shifting embedding in the +-1 AC coefficients.

Frequencies are numbered 2..64 in zigzag order (1 is DC); internally the
block arrays are 0-based, so frequency ``k`` lives in column ``k - 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .errors import (
    CapacityExceeded,
    CoefficientOverflow,
    InsufficientCapacity,
    MissingSymbol,
    PayloadUnderrun,
    ZeroCoefficient,
)
from .huffman import CodeAssignment
from .jpeg_codec import CoefficientImage

FREQUENCIES = range(2, 65)
MAX_AC = 1023


def _sign(x: int) -> int:
    return (x > 0) - (x < 0)


def embed_coefficient(d: int, b: int) -> int:
    if d == 0:
        raise ZeroCoefficient("zero coefficients carry nothing")
    if abs(d) == 1:
        return d + _sign(d) * b
    return d + _sign(d)


def extract_recover_coefficient(d: int) -> tuple[int | None, int]:
    """Return (bit or None, original value) for a marked coefficient."""
    if d == 0:
        raise ZeroCoefficient("zero coefficients carry nothing")
    a = abs(d)
    if a == 1:
        return 0, d
    if a == 2:
        return 1, _sign(d)
    return None, d - _sign(d)


@dataclass(frozen=True)
class CodeLengthTable:
    """``hclt[r, c]``: VLC length of run ``r``, size ``c`` (c = 1..10);
    ``hcit[r, c] = hclt[r, c + 1] - hclt[r, c]`` (c = 1..9).  Column 0 of
    both arrays is unused so indices match run/size directly."""

    hclt: np.ndarray  # (16, 11)
    hcit: np.ndarray  # (16, 10)

    def hclt_grid(self) -> np.ndarray:
        return self.hclt[:, 1:]

    def hcit_grid(self) -> np.ndarray:
        return self.hcit[:, 1:]


def code_length_tables(assignment: CodeAssignment) -> CodeLengthTable:
    hclt = np.zeros((16, 11), dtype=np.int64)
    for r in range(16):
        for c in range(1, 11):
            sym = (r << 4) | c
            if sym not in assignment:
                raise MissingSymbol(f"run/size {r}/{c} missing from the AC table")
            hclt[r, c] = assignment.length_by_symbol[sym]
    hcit = np.zeros((16, 10), dtype=np.int64)
    hcit[:, 1:] = hclt[:, 2:] - hclt[:, 1:10]
    return CodeLengthTable(hclt, hcit)


def _size_category(a: np.ndarray) -> np.ndarray:
    """VLI size of magnitudes ``a`` (0 for 0)."""
    out = np.zeros(a.shape, dtype=np.int64)
    nz = a > 0
    out[nz] = np.floor(np.log2(a[nz])).astype(np.int64) + 1
    return out


@dataclass(frozen=True)
class FrequencyCostTable:
    """Per-frequency embedding costs, indexed by zigzag frequency 2..64.

    ``s2[k]`` is twice the expected expansion S(k) (an integer, since the
    weights are 1/2 and 1); ``nonzero[k]`` is L(k); ``capacity[k]`` counts
    the +-1 coefficients that actually carry bits.  ``block_cost2`` and
    ``carriers`` keep the per-block breakdown, column ``k - 1``.
    """

    s2: np.ndarray
    nonzero: np.ndarray
    capacity: np.ndarray
    overflow: np.ndarray
    block_cost2: np.ndarray
    carriers: np.ndarray

    def S(self, k: int) -> Fraction:
        return Fraction(int(self.s2[k]), 2)

    def L(self, k: int) -> int:
        return int(self.nonzero[k])

    def usable(self, k: int) -> bool:
        return self.nonzero[k] > 0 and self.capacity[k] > 0 and not self.overflow[k]

    def UF(self, k: int) -> Fraction | None:
        if self.nonzero[k] == 0:
            return None
        return Fraction(int(self.s2[k]), 2 * int(self.nonzero[k]))

    def INC1(self, k: int) -> Fraction | None:
        uf = self.UF(k)
        return None if uf is None else uf * self.L(k)

    def order(self) -> list[int]:
        """Usable frequencies by ascending UF, then ascending index."""
        ks = [k for k in FREQUENCIES if self.usable(k)]
        return sorted(ks, key=lambda k: (self.UF(k), k))

    @property
    def total_capacity(self) -> int:
        return int(sum(self.capacity[k] for k in FREQUENCIES if self.usable(k)))


def frequency_costs(image: CoefficientImage, table: CodeLengthTable,
                    runs: np.ndarray | None = None) -> FrequencyCostTable:
    blocks = np.ascontiguousarray(image.blocks, dtype=np.int32)
    if K.coefficient_costs is not None:
        block_cost2, carriers, col_overflow = K.coefficient_costs(blocks, table.hcit, MAX_AC)
        nz = blocks != 0
        nz[:, 0] = False
    else:
        block_cost2, carriers, nz, col_overflow = _coefficient_costs_np(blocks, table, runs)
    s2 = np.zeros(65, dtype=np.int64)
    nonzero = np.zeros(65, dtype=np.int64)
    capacity = np.zeros(65, dtype=np.int64)
    overflow = np.zeros(65, dtype=bool)
    s2[1:] = block_cost2.sum(axis=0)
    nonzero[1:] = nz.sum(axis=0)
    capacity[1:] = carriers.sum(axis=0)
    overflow[1:] = col_overflow
    s2[:2] = nonzero[:2] = capacity[:2] = 0
    return FrequencyCostTable(s2, nonzero, capacity, overflow, block_cost2, carriers)


def _coefficient_costs_np(blocks: np.ndarray, table: CodeLengthTable, runs: np.ndarray | None):
    if runs is None:
        runs = K.preceding_runs(blocks)
    a = np.abs(blocks.astype(np.int64))
    a[:, 0] = 0
    size = _size_category(a)
    boundary = (a > 0) & ((a & (a + 1)) == 0)  # |d| = 2^i - 1
    r16 = np.where(runs >= 0, runs % 16, 0)
    inc = table.hcit[r16, np.clip(size, 0, 9)] + 1
    sj = np.where(boundary & (size <= 9), inc, 0)
    # weight 1/2 for |d| = 1, 1 for |d| > 1 -> doubled: 1 and 2
    w2 = np.where(a == 1, 1, np.where(a > 1, 2, 0))
    return (sj * w2).astype(np.int64), a == 1, a > 0, (a >= MAX_AC).any(axis=0)


def sort_blocks(image: CoefficientImage) -> np.ndarray:
    """Block indices by descending zero-AC count, stable on index."""
    zeros = (image.blocks[:, 1:] == 0).sum(axis=1)
    return np.argsort(-zeros, kind="stable")


@dataclass(frozen=True)
class DctEmbedPlan:
    freq_set: tuple  # zigzag frequencies, ascending
    n_bar: int
    L1: int
    run_bar: int = 0
    estimated_expansion: Fraction = Fraction(0)

    @property
    def k_bar(self) -> int:
        return len(self.freq_set)

    def with_run_bar(self, run_bar: int) -> "DctEmbedPlan":
        return DctEmbedPlan(self.freq_set, self.n_bar, self.L1, run_bar, self.estimated_expansion)


def plan_dct(image: CoefficientImage, L1: int, costs: FrequencyCostTable,
             block_order: np.ndarray | None = None) -> DctEmbedPlan:
    """Pick how many lowest-UF frequencies and how many leading blocks to use.

    For every prefix length m of the UF ordering, the smallest block count
    holding ``L1`` carriers is found and its expected expansion summed over
    those blocks; the cheapest (m, n) wins, smaller m on ties.
    """
    if L1 <= 0:
        return DctEmbedPlan((), 0, 0)
    order = block_order if block_order is not None else sort_blocks(image)
    freqs = costs.order()
    if not freqs or costs.total_capacity < L1:
        raise InsufficientCapacity(f"DCT capacity {costs.total_capacity} < {L1}")
    cols = np.asarray(freqs) - 1
    cap = costs.carriers[order][:, cols].astype(np.int64)
    cst = costs.block_cost2[order][:, cols]
    # [n, m]: totals over the first n+1 blocks and the first m+1 frequencies
    capcum = np.cumsum(np.cumsum(cap, axis=1), axis=0)
    costcum = np.cumsum(np.cumsum(cst, axis=1), axis=0)
    best = None
    for m in range(len(freqs)):
        if capcum[-1, m] < L1:
            continue
        n = int(np.searchsorted(capcum[:, m], L1)) + 1
        c2 = int(costcum[n - 1, m])
        if best is None or c2 < best[0]:
            best = (c2, m, n)
    c2, m, n = best
    return DctEmbedPlan(tuple(sorted(freqs[: m + 1])), n, L1, 0, Fraction(c2, 2))


def _traversal(blocks: np.ndarray, plan: DctEmbedPlan, block_order: np.ndarray,
               runs: np.ndarray | None = None):
    """Candidate coefficients in embedding order: (block, col, run) arrays."""
    chosen = block_order[: plan.n_bar]
    if runs is None:
        runs = K.preceding_runs(np.ascontiguousarray(blocks, dtype=np.int32))
    cols = np.asarray(plan.freq_set, dtype=np.int64) - 1
    sub = runs[chosen][:, cols]
    rank, ci = np.nonzero(sub >= 0)
    run = sub[rank, ci].astype(np.int64)
    col = cols[ci]
    idx = np.lexsort((col, rank, run))
    return chosen[rank[idx]], col[idx], run[idx]


def embed_dct(image: CoefficientImage, bits, plan: DctEmbedPlan,
              block_order: np.ndarray | None = None) -> tuple[CoefficientImage, int]:
    bits = np.asarray(bits, dtype=np.int64)
    L1 = bits.size
    if L1 == 0:
        return image.copy(), 0
    order = block_order if block_order is not None else sort_blocks(image)
    blocks = image.blocks.copy()
    jb, jc, jr = _traversal(blocks, plan, order)
    vals = blocks[jb, jc]
    carrier = np.abs(vals) == 1
    cidx = np.flatnonzero(carrier)
    if cidx.size < L1:
        raise CapacityExceeded(f"plan holds {cidx.size} carriers, payload is {L1} bits")
    run_bar = int(jr[cidx[L1 - 1]])
    active = jr <= run_bar
    sign = np.sign(vals)
    new = vals.copy()
    shift = active & ~carrier
    new[shift] += sign[shift]
    used = cidx[:L1]
    new[used] += sign[used] * bits
    if np.abs(new).max(initial=0) > MAX_AC:
        raise CoefficientOverflow("shifting would leave the baseline AC range")
    blocks[jb, jc] = new
    return image.with_blocks(blocks), run_bar


def extract_dct(image: CoefficientImage, plan: DctEmbedPlan,
                block_order: np.ndarray | None = None) -> tuple[np.ndarray, CoefficientImage]:
    if plan.L1 == 0:
        return np.zeros(0, dtype=np.uint8), image.copy()
    order = block_order if block_order is not None else sort_blocks(image)
    blocks = image.blocks.copy()
    jb, jc, jr = _traversal(blocks, plan, order)
    active = jr <= plan.run_bar
    jb, jc = jb[active], jc[active]
    vals = blocks[jb, jc]
    a = np.abs(vals)
    carrier = a <= 2
    cidx = np.flatnonzero(carrier)
    if cidx.size < plan.L1:
        raise PayloadUnderrun(f"found {cidx.size} carriers, side info promises {plan.L1}")
    bits = (a[cidx[: plan.L1]] == 2).astype(np.uint8)
    sign = np.sign(vals)
    orig = np.where(carrier, sign, vals - sign)
    blocks[jb, jc] = orig
    return bits, image.with_blocks(blocks)
