"""Slow, direct re-implementations used to check the library."""
from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from mdrdh.dct_domain import FrequencyCostTable
from mdrdh.entropy_domain import EntropyCostTable
from mdrdh.huffman import CodeAssignment, standard_ac_spec, standard_dc_spec
from mdrdh.jpeg_codec import CoefficientImage


def make_image(blocks: np.ndarray) -> CoefficientImage:
    n = blocks.shape[0]
    return CoefficientImage(8 * n, 8, np.ascontiguousarray(blocks, dtype=np.int32),
                            np.ones(64, dtype=np.int64), standard_dc_spec(), standard_ac_spec())


def random_blocks(rng: np.random.Generator, nblocks: int, density: float | None = None,
                  max_mag: int = 40) -> np.ndarray:
    density = rng.uniform(0.05, 0.6) if density is None else density
    blocks = np.zeros((nblocks, 64), dtype=np.int32)
    blocks[:, 0] = rng.integers(-100, 100, nblocks)
    mask = rng.random((nblocks, 63)) < density
    mags = np.minimum(rng.geometric(0.45, (nblocks, 63)), max_mag)
    blocks[:, 1:] = np.where(mask, mags * rng.choice([-1, 1], (nblocks, 63)), 0)
    return blocks


def coefficient_cost2(blocks: np.ndarray, asg: CodeAssignment) -> np.ndarray:
    """Twice the expected expansion of touching each coefficient, by loops."""
    n = blocks.shape[0]
    out = np.zeros((n, 64), dtype=np.int64)
    for b in range(n):
        run = 0
        for k in range(1, 64):
            v = int(blocks[b, k])
            if v == 0:
                run += 1
                continue
            a = abs(v)
            size = a.bit_length()
            if (a + 1) & a == 0 and size < 10:  # a = 2^size - 1
                r = run % 16
                grow = asg.length_by_symbol[(r << 4) | (size + 1)] - asg.length_by_symbol[(r << 4) | size]
                out[b, k] = (int(grow) + 1) * (1 if a == 1 else 2)
            run = 0
    return out


def brute_force_plan(blocks: np.ndarray, L1: int, costs: FrequencyCostTable, asg: CodeAssignment):
    """Every (frequency prefix m, block count n) pair holding ``L1`` carriers;
    cheapest wins, then smaller m, then smaller n.  Returns (cost2, freqs, n)."""
    freqs = sorted((k for k in range(2, 65) if costs.usable(k)), key=lambda k: (costs.UF(k), k))
    zeros = [(-(int((blocks[b, 1:] == 0).sum())), b) for b in range(blocks.shape[0])]
    order = [b for _, b in sorted(zeros)]
    c2 = coefficient_cost2(blocks, asg)
    found = []
    for m in range(1, len(freqs) + 1):
        use = freqs[:m]
        for n in range(1, len(order) + 1):
            carriers = sum(int(abs(blocks[b, k - 1]) == 1) for b in order[:n] for k in use)
            if carriers >= L1:
                cost = sum(int(c2[b, k - 1]) for b in order[:n] for k in use)
                found.append((cost, m, n, tuple(sorted(use))))
    if not found:
        return None
    cost, _, n, use = min(found)
    return cost, use, n


def toy_frequency_table(ufs, caps) -> FrequencyCostTable:
    """Frequencies 2, 3, ... with given UF (Fraction) and +-1 capacities.

    Each frequency gets L(k) = capacity, so s2 = 2 * UF * L must be integral.
    """
    s2 = np.zeros(65, dtype=np.int64)
    nz = np.zeros(65, dtype=np.int64)
    cap = np.zeros(65, dtype=np.int64)
    for i, (u, c) in enumerate(zip(ufs, caps)):
        k = 2 + i
        val = Fraction(u) * 2 * c
        assert val.denominator == 1
        s2[k], nz[k], cap[k] = int(val), c, c
    empty = np.zeros((1, 64), dtype=np.int64)
    return FrequencyCostTable(s2, nz, cap, np.zeros(65, bool), empty, empty.astype(bool))


def toy_entropy_table(counts, shift, delta) -> EntropyCostTable:
    n = len(counts)
    return EntropyCostTable(
        P=np.arange(1, n + 1), Z=np.full(n, n + 1), counts=np.asarray(counts, dtype=np.int64),
        shift_cost=np.asarray(shift, dtype=np.int64), delta_len=np.asarray(delta, dtype=np.int64),
        symbols=np.arange(1, n + 1),
    )


def brute_force_distribution(ufs, caps, peaks, length):
    """Exhaustive minimum of DCT cost + E(P) * L2 over every allocation.

    ``peaks`` is a list of (E, count) at positions 1..; returns
    (cost, L1, P) with P = 0 for the all-DCT option, ties broken by smaller
    L1 then smaller P.
    """
    ufs = [Fraction(u) for u in ufs]
    best_at = {}
    for alloc in itertools.product(*(range(c + 1) for c in caps)):
        s = sum(alloc)
        cost = sum(u * x for u, x in zip(ufs, alloc))
        if s not in best_at or cost < best_at[s]:
            best_at[s] = cost
    options = []
    if length in best_at:
        options.append((best_at[length], length, 0))
    for p, (e, cnt) in enumerate(peaks, start=1):
        for L2 in range(1, min(cnt - 1, length) + 1):
            L1 = length - L2
            if L1 in best_at:
                options.append((best_at[L1] + Fraction(e) * L2, L1, p))
    return min(options) if options else None
