"""Lossless embedding in the Huffman-coded stream.

Code patterns stay attached to DHT positions; only the symbol list is
permuted.  Positions in :class:`PeakZero` are 1-based over the 162 entries,
array indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    IntegrityFailure,
    MultipleDuplicates,
    NoDuplicate,
    NoFeasiblePeak,
    NoZeroPoint,
    PayloadOverflow,
    PayloadUnderrun,
)
from .huffman import AC_SYMBOL_DOMAIN, CodeAssignment
from .jpeg_codec import TokenStream


@dataclass(frozen=True)
class VlcHistogram:
    symbols: np.ndarray  # symbol at each position
    counts: np.ndarray   # occurrences in the scan
    lengths: np.ndarray  # code length at each position

    def __len__(self) -> int:
        return int(self.symbols.shape[0])

    def count(self, position: int) -> int:
        return int(self.counts[position - 1])

    def length(self, position: int) -> int:
        return int(self.lengths[position - 1])

    def position_of(self, symbol: int) -> int:
        hits = np.flatnonzero(self.symbols == symbol)
        if hits.size == 0:
            raise KeyError(symbol)
        return int(hits[0]) + 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.counts) <= 0))


@dataclass(frozen=True)
class PeakZero:
    P: int
    Z: int


def build_histogram(tokens, assignment: CodeAssignment) -> VlcHistogram:
    """Symbol counts laid out in the DHT order of ``assignment``.

    ``tokens`` is a :class:`TokenStream` or an array of AC symbols.
    """
    symbols = tokens.symbols if isinstance(tokens, TokenStream) else np.asarray(tokens)
    by_symbol = np.bincount(symbols.astype(np.int64), minlength=256)
    counts = by_symbol[assignment.symbols]
    return VlcHistogram(assignment.symbols.copy(), counts.astype(np.int64), assignment.lengths.copy())


def position_histogram(positions: np.ndarray, assignment: CodeAssignment) -> VlcHistogram:
    """Counts per code position; tells apart two codes of one symbol."""
    counts = np.bincount(np.asarray(positions, dtype=np.int64), minlength=len(assignment))
    return VlcHistogram(assignment.symbols.copy(), counts.astype(np.int64), assignment.lengths.copy())


def optimize_table(hist: VlcHistogram, assignment: CodeAssignment) -> tuple[VlcHistogram, CodeAssignment]:
    """Move the most frequent symbols onto the shortest codes.

    The sort is stable, so equal counts keep their DHT order.
    """
    order = np.argsort(-hist.counts, kind="stable")
    symbols = hist.symbols[order]
    new = CodeAssignment(assignment.spec.with_symbols(symbols))
    return VlcHistogram(symbols.copy(), hist.counts[order].copy(), new.lengths.copy()), new


@dataclass(frozen=True)
class EntropyCostTable:
    """Costs per candidate peak position (1-based)."""

    P: np.ndarray
    Z: np.ndarray
    counts: np.ndarray
    shift_cost: np.ndarray   # S(P), integer bits
    delta_len: np.ndarray    # len(P+1) - len(P)
    symbols: np.ndarray

    def __len__(self) -> int:
        return int(self.P.shape[0])

    def _i(self, P: int) -> int:
        hits = np.flatnonzero(self.P == P)
        if hits.size == 0:
            raise KeyError(P)
        return int(hits[0])

    def S(self, P: int) -> Fraction:
        return Fraction(int(self.shift_cost[self._i(P)]))

    def M(self, P: int) -> Fraction:
        i = self._i(P)
        return Fraction(int(self.counts[i]) * int(self.delta_len[i]), 2)

    def E(self, P: int) -> Fraction:
        i = self._i(P)
        return (self.S(P) + self.M(P)) / int(self.counts[i])

    def INC2(self, P: int) -> Fraction:
        return self.E(P) * self.count(P)

    def count(self, P: int) -> int:
        return int(self.counts[self._i(P)])

    def zero_of(self, P: int) -> int:
        return int(self.Z[self._i(P)])

    def symbol(self, P: int) -> int:
        return int(self.symbols[self._i(P)])

    def order(self) -> list[int]:
        """Candidate peaks by ascending E, then ascending position."""
        return sorted((int(p) for p in self.P), key=lambda p: (self.E(p), p))

    def find_symbol(self, symbol: int) -> int | None:
        hits = np.flatnonzero(self.symbols == symbol)
        return int(self.P[hits[0]]) if hits.size else None


def entropy_costs(hist: VlcHistogram) -> EntropyCostTable:
    counts = hist.counts.astype(np.int64)
    lengths = hist.lengths.astype(np.int64)
    n = counts.size
    # next zero-count position strictly right of each index (n = none)
    next_zero = np.full(n, n, dtype=np.int64)
    nz = n
    for i in range(n - 1, -1, -1):
        next_zero[i] = nz
        if counts[i] == 0:
            nz = i
    delta = np.zeros(n, dtype=np.int64)
    delta[:-1] = lengths[1:] - lengths[:-1]
    # cum[i] = sum_{t < i} counts[t] * delta[t]
    cum = np.concatenate(([0], np.cumsum(counts * delta)))
    cand = np.flatnonzero((counts > 0) & (next_zero < n))
    if cand.size == 0:
        raise NoZeroPoint("every VLC is in use; nothing can absorb the shift")
    z = next_zero[cand]
    shift = cum[z] - cum[cand + 1]  # indices cand+1 .. z-1
    return EntropyCostTable(
        P=cand + 1, Z=z + 1, counts=counts[cand], shift_cost=shift,
        delta_len=delta[cand], symbols=hist.symbols[cand].copy(),
    )


def select_peak(hist: VlcHistogram, L2: int) -> PeakZero:
    """Rightmost position whose count exceeds ``L2``, and the first zero
    position to its right."""
    above = np.flatnonzero(hist.counts > L2)
    if above.size == 0:
        raise NoFeasiblePeak(f"no VLC occurs more than {L2} times")
    p = int(above[-1])
    zeros = np.flatnonzero(hist.counts[p + 1:] == 0)
    if zeros.size == 0:
        raise NoZeroPoint("no unused VLC right of the peak")
    return PeakZero(p + 1, p + 2 + int(zeros[0]))


def shift_and_embed(tokens: TokenStream, assignment: CodeAssignment, pz: PeakZero,
                    bits) -> tuple[TokenStream, CodeAssignment]:
    """Shift positions P+1..Z-1 right by one, duplicate P's symbol at P+1 and
    code the first ``len(bits)`` occurrences of P as P (0) or P+1 (1).

    ``tokens.positions`` must refer to ``assignment``.
    """
    bits = np.asarray(bits, dtype=np.int64)
    p0, z0 = pz.P - 1, pz.Z - 1
    pos = tokens.positions.astype(np.int64)
    at_peak = np.flatnonzero(pos == p0)
    if bits.size > at_peak.size:
        raise PayloadOverflow(f"peak occurs {at_peak.size} times, payload is {bits.size} bits")
    sym = list(assignment.spec.symbols)
    new_sym = sym[:p0 + 1] + [sym[p0]] + sym[p0 + 1:z0] + sym[z0 + 1:]
    new_pos = pos.copy()
    shifted = (pos > p0) & (pos < z0)
    new_pos[shifted] += 1
    new_pos[at_peak[: bits.size]] += bits
    new = CodeAssignment(assignment.spec.with_symbols(new_sym))
    return tokens.with_positions(new_pos), new


def detect_peak_zero(assignment: CodeAssignment, marked_hist: VlcHistogram | None = None) -> PeakZero:
    """Recover P from the duplicated symbol; Z needs the scan's position
    histogram (the last used position, but at least P+1).  Without it Z is
    reported as P+1."""
    dups = assignment.duplicate_positions()
    if not dups:
        raise NoDuplicate("no duplicated run/length in the AC table")
    if len(dups) > 1 or dups[0][1] != dups[0][0] + 1:
        raise MultipleDuplicates(f"unexpected duplicate layout {dups}")
    p = dups[0][0] + 1
    z = p + 1
    if marked_hist is not None:
        used = np.flatnonzero(marked_hist.counts > 0)
        if used.size:
            z = max(z, int(used[-1]) + 1)
    return PeakZero(p, z)


def missing_symbol(assignment: CodeAssignment) -> int:
    gone = AC_SYMBOL_DOMAIN - set(assignment.spec.symbols)
    if len(gone) != 1:
        raise IntegrityFailure(f"{len(gone)} symbols missing from the marked table")
    return next(iter(gone))


def extract_restore(tokens: TokenStream, assignment: CodeAssignment, L2: int
                    ) -> tuple[np.ndarray, TokenStream, CodeAssignment]:
    """Read ``L2`` bits from the duplicated codes and undo the shift.

    Returns the bits, the tokens re-pointed at the pre-shift table, and that
    table.
    """
    pos = tokens.positions.astype(np.int64)
    pz = detect_peak_zero(assignment, position_histogram(pos, assignment))
    p0, z0 = pz.P - 1, pz.Z - 1
    hits = np.flatnonzero((pos == p0) | (pos == p0 + 1))
    if hits.size < L2:
        raise PayloadUnderrun(f"peak occurs {hits.size} times, side info promises {L2} bits")
    bits = (pos[hits[:L2]] == p0 + 1).astype(np.uint8)
    if np.any(pos[hits[L2:]] == p0 + 1):
        raise IntegrityFailure("duplicate code used past the end of the payload")
    restored = pos.copy()
    restored[pos == p0 + 1] = p0
    back = (pos > p0 + 1) & (pos <= z0)
    restored[back] -= 1
    sym = list(assignment.spec.symbols)
    old_sym = sym[:p0 + 1] + sym[p0 + 2:z0 + 1] + [missing_symbol(assignment)] + sym[z0 + 1:]
    old = CodeAssignment(assignment.spec.with_symbols(old_sym))
    return bits, tokens.with_positions(restored), old
