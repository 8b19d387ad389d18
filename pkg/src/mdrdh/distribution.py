"""Splitting a payload between the DCT and entropy-coding domains.

The estimate being minimized is

    cost(P, L2) = D(length - L2) + E(P) * L2

where D(x) is the cheapest way to place x bits on the DCT frequencies when
each bit at frequency k costs UF(k) (fill ascending UF) and E(P) is the
per-bit cost of peak P.  L2 is capped at count(P) - 1.  All arithmetic is
exact (``Fraction``).
"""
from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

from .dct_domain import FrequencyCostTable
from .entropy_domain import EntropyCostTable, VlcHistogram
from .errors import InsufficientCapacity, InsufficientTotalCapacity

REFINE_MAX_ITER = 8


@dataclass(frozen=True)
class DctFill:
    """Ascending-UF frequencies with prefix capacity and prefix cost."""

    freqs: tuple
    uf: tuple
    cap_prefix: tuple   # cap_prefix[i] = capacity of freqs[:i]
    cost_prefix: tuple  # cost of filling freqs[:i] completely
    inc1_prefix: tuple  # sum of INC1 over freqs[:i]

    @classmethod
    def from_costs(cls, costs: FrequencyCostTable) -> "DctFill":
        freqs = tuple(costs.order())
        uf = tuple(costs.UF(k) for k in freqs)
        caps = [int(costs.capacity[k]) for k in freqs]
        cap_prefix = [0]
        cost_prefix = [Fraction(0)]
        inc1_prefix = [Fraction(0)]
        for k, u, c in zip(freqs, uf, caps):
            cap_prefix.append(cap_prefix[-1] + c)
            cost_prefix.append(cost_prefix[-1] + u * c)
            inc1_prefix.append(inc1_prefix[-1] + costs.INC1(k))
        return cls(freqs, uf, tuple(cap_prefix), tuple(cost_prefix), tuple(inc1_prefix))

    @property
    def capacity(self) -> int:
        return self.cap_prefix[-1]

    def frequencies_needed(self, bits: int) -> int:
        if bits <= 0:
            return 0
        return bisect_left(self.cap_prefix, bits)

    def cost(self, bits: int) -> Fraction:
        if bits <= 0:
            return Fraction(0)
        i = self.frequencies_needed(bits)  # freqs[:i] hold them, freqs[i-1] partly
        return self.cost_prefix[i - 1] + self.uf[i - 1] * (bits - self.cap_prefix[i - 1])

    def capacity_below(self, price: Fraction) -> int:
        """Capacity of the frequencies strictly cheaper than ``price``."""
        i = bisect_left(self.uf, price)
        return self.cap_prefix[i]


@dataclass(frozen=True)
class DistributionState:
    length: int
    L1: int
    L2: int
    k: int = 0                      # frequencies the DCT share spills onto
    P: int | None = None            # peak position in the cost table used
    peak_symbol: int | None = None
    estimated_cost: Fraction = Fraction(0)
    fallback: bool = False
    iterations: int = 0
    # judgment-condition scratch
    j1: int | None = None
    j2: int | None = None
    k2: int | None = None
    S1: Fraction | None = None
    S2: Fraction | None = None
    notes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.L1 + self.L2 != self.length or self.L1 < 0 or self.L2 < 0:
            raise ValueError(f"bad budget L1={self.L1} L2={self.L2} length={self.length}")

    def move_to_dct(self, bits: int) -> "DistributionState":
        return replace(self, L1=self.L1 + bits, L2=self.L2 - bits)


def estimated_cost(fill: DctFill, ec: EntropyCostTable | None, L1: int,
                   P: int | None = None, L2: int = 0) -> Fraction:
    """Estimated expansion of ``L1`` DCT bits plus ``L2`` bits at peak ``P``."""
    entropy = ec.E(P) * L2 if (P is not None and L2 > 0) else Fraction(0)
    return fill.cost(L1) + entropy


def initialize_distribution(uf: FrequencyCostTable, ec: EntropyCostTable | None,
                            length: int) -> DistributionState:
    """Initial L1/L2 split minimizing the estimated expansion.

    A peak takes every bit whose DCT alternative costs at least E(P) per bit,
    up to count(P) - 1.  Ties go to the larger entropy share, then to the
    lower position.  Without any usable peak all bits go to the DCT domain.
    """
    fill = DctFill.from_costs(uf)
    if length <= 0:
        return DistributionState(0, 0, 0)
    best = None  # (cost, L1, P)
    if length <= fill.capacity:
        best = (fill.cost(length), length, 0)
    peak_seen = False
    if ec is not None:
        for i in range(len(ec)):
            P = int(ec.P[i])
            hi = min(int(ec.counts[i]) - 1, length)
            lo = max(1, length - fill.capacity)
            if hi < lo:
                continue
            peak_seen = True
            e = ec.E(P)
            L2 = min(hi, max(lo, length - fill.capacity_below(e)))
            key = (estimated_cost(fill, ec, length - L2, P, L2), length - L2, P)
            if best is None or key < best:
                best = key
    if best is None:
        top = max(int(ec.counts.max()) - 1, 0) if ec is not None and len(ec) else 0
        raise InsufficientTotalCapacity(
            f"{length} bits exceed DCT capacity {fill.capacity} plus peak capacity {top}",
            dct_capacity=fill.capacity, entropy_capacity=top,
        )
    cost, L1, P = best
    k = fill.frequencies_needed(L1)
    if P == 0:
        return DistributionState(length, L1, 0, k=k, estimated_cost=cost, fallback=not peak_seen)
    return DistributionState(length, L1, length - L1, k=k, P=P, peak_symbol=ec.symbol(P),
                             estimated_cost=cost)


def refine_L2(hist: VlcHistogram, state: DistributionState,
              remeasure: Callable[[DistributionState], VlcHistogram] | None = None,
              max_iter: int = REFINE_MAX_ITER, dct_capacity: int | None = None) -> DistributionState:
    """Keep L2 strictly below the marked-image count of the peak symbol.

    ``hist`` is the histogram of the image after embedding ``state.L1`` DCT
    bits; ``remeasure(state)`` re-embeds for a new state and returns the new
    histogram.  Without ``remeasure`` a single adjustment is made.
    """
    if state.L2 == 0 or state.peak_symbol is None:
        return state
    it = 0
    while True:
        cnt = _symbol_count(hist, state.peak_symbol)
        if state.L2 < cnt:
            return replace(state, iterations=state.iterations + it)
        excess = state.L2 - cnt + 1
        if dct_capacity is not None and state.L1 + excess > dct_capacity:
            raise InsufficientCapacity(f"DCT domain cannot absorb {excess} more bits")
        state = state.move_to_dct(excess)
        it += 1
        if state.L2 == 0:
            return replace(state, peak_symbol=None, P=None, iterations=state.iterations + it)
        if remeasure is None:
            return replace(state, iterations=state.iterations + it)
        if it >= max_iter:
            break
        hist = remeasure(state)
    # no convergence: try the most frequent symbol once, else go all-DCT
    top = int(hist.counts.argmax())
    sym = int(hist.symbols[top])
    L2 = min(state.L2, int(hist.counts[top]) - 1)
    cand = replace(state, L1=state.length - L2, L2=L2, peak_symbol=sym, P=top + 1,
                   fallback=True, iterations=state.iterations + it)
    if L2 > 0 and remeasure is not None:
        hist = remeasure(cand)
        if cand.L2 < _symbol_count(hist, sym):
            return cand
    return replace(cand, L1=state.length, L2=0, peak_symbol=None, P=None)


def _symbol_count(hist: VlcHistogram, symbol: int) -> int:
    hits = (hist.symbols == symbol).nonzero()[0]
    return int(hist.counts[hits].sum()) if hits.size else 0


def judge_peak(ec_marked: EntropyCostTable, state: DistributionState,
               uf: FrequencyCostTable) -> DistributionState:
    """Check whether a cheaper peak should take over (the S1 > S2 test).

    j' is the current peak in the marked-image cost table, j'' the most
    frequent peak among those with lower cost.  S1 is the extra expansion of
    keeping the bits beyond j''s capacity in the entropy domain, S2 the
    extra INC1 of moving them to the DCT domain instead.
    """
    if state.L2 == 0 or state.peak_symbol is None:
        return state
    j1 = ec_marked.find_symbol(state.peak_symbol)
    if j1 is None:
        return state
    e1 = ec_marked.E(j1)
    cheaper = [int(p) for p in ec_marked.P if ec_marked.E(int(p)) < e1]
    if not cheaper:
        return replace(state, j1=j1)
    j2 = max(cheaper, key=lambda p: (ec_marked.count(p), -ec_marked.E(p), -p))
    cnt2 = ec_marked.count(j2)
    remainder = max(0, state.L2 - (cnt2 - 1))
    fill = DctFill.from_costs(uf)
    k = fill.frequencies_needed(state.L1)
    if state.L1 + remainder > fill.capacity:
        return replace(state, j1=j1, j2=j2)
    k2 = fill.frequencies_needed(state.L1 + remainder)
    S1 = e1 * state.L2 - ec_marked.E(j2) * cnt2
    S2 = fill.inc1_prefix[k2] - fill.inc1_prefix[k]
    scratch = dict(j1=j1, j2=j2, k2=k2, S1=S1, S2=S2)
    if S1 > S2:
        moved = state.move_to_dct(remainder)
        return replace(moved, P=j2, peak_symbol=ec_marked.symbol(j2), k=k2, **scratch)
    return replace(state, k=k, **scratch)
