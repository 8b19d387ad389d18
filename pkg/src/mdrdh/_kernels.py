"""Hot loops of the entropy codec and the coefficient traversal.

Each kernel is written once as plain Python over numpy arrays.  When numba is
importable and ``MDRDH_NO_NUMBA`` is unset (or "0"), the public names are the
``njit``-compiled versions; otherwise they are the interpreted originals.  The
interpreted versions stay reachable through :data:`PY` so tests and the
benchmark can compare both paths in one process.
"""
from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("MDRDH_NO_NUMBA", "0") in ("", "0")

# status codes returned by decode_scan
OK = 0
TRUNCATED = 1
INVALID_CODE = 2
BLOCK_OVERFLOW = 3


def _decode_scan(data, nblocks, dc_maxcode, dc_mincode, dc_valptr, dc_symbols,
                 ac_maxcode, ac_mincode, ac_valptr, ac_symbols):
    """Decode a de-stuffed single-component baseline scan.

    Returns ``(blocks, ac_pos, status, bits_used)``.  ``ac_pos`` holds, per AC
    token in stream order, the index of its code in the DHT symbol list; it
    is what distinguishes duplicate codes of one symbol.
    """
    blocks = np.zeros((nblocks, 64), dtype=np.int32)
    ac_pos = np.empty(nblocks * 64, dtype=np.int16)
    ntok = 0
    nbytes = data.shape[0]
    pos = 0
    buf = 0
    cnt = 0
    pred = 0
    status = OK
    for b in range(nblocks):
        # --- DC ---
        code = 0
        length = 0
        found = -1
        while length < 16:
            if cnt == 0:
                if pos >= nbytes:
                    status = TRUNCATED
                    break
                buf = np.int64(data[pos])
                pos += 1
                cnt = 8
            cnt -= 1
            code = (code << 1) | ((buf >> cnt) & 1)
            length += 1
            if dc_maxcode[length] >= 0 and code <= dc_maxcode[length]:
                found = dc_valptr[length] + code - dc_mincode[length]
                break
        if status != OK:
            break
        if found < 0:
            status = INVALID_CODE
            break
        s = dc_symbols[found]
        diff = 0
        if s > 0:
            while cnt < s:
                if pos >= nbytes:
                    status = TRUNCATED
                    break
                buf = (buf << 8) | np.int64(data[pos])
                pos += 1
                cnt += 8
            if status != OK:
                break
            cnt -= s
            diff = (buf >> cnt) & ((1 << s) - 1)
            if diff < (1 << (s - 1)):
                diff = diff - (1 << s) + 1
        buf &= (1 << cnt) - 1
        pred += diff
        blocks[b, 0] = pred
        # --- AC ---
        k = 1
        while k < 64:
            code = 0
            length = 0
            found = -1
            while length < 16:
                if cnt == 0:
                    if pos >= nbytes:
                        status = TRUNCATED
                        break
                    buf = np.int64(data[pos])
                    pos += 1
                    cnt = 8
                cnt -= 1
                code = (code << 1) | ((buf >> cnt) & 1)
                length += 1
                if ac_maxcode[length] >= 0 and code <= ac_maxcode[length]:
                    found = ac_valptr[length] + code - ac_mincode[length]
                    break
            if status != OK:
                break
            if found < 0:
                status = INVALID_CODE
                break
            ac_pos[ntok] = found
            ntok += 1
            sym = ac_symbols[found]
            r = sym >> 4
            s = sym & 15
            if s == 0:
                if r == 15:
                    k += 16
                    if k > 64:
                        status = BLOCK_OVERFLOW
                        break
                    continue
                break
            k += r
            if k > 63:
                status = BLOCK_OVERFLOW
                break
            while cnt < s:
                if pos >= nbytes:
                    status = TRUNCATED
                    break
                buf = (buf << 8) | np.int64(data[pos])
                pos += 1
                cnt += 8
            if status != OK:
                break
            cnt -= s
            v = (buf >> cnt) & ((1 << s) - 1)
            if v < (1 << (s - 1)):
                v = v - (1 << s) + 1
            buf &= (1 << cnt) - 1
            blocks[b, k] = v
            k += 1
        if status != OK:
            break
        buf &= (1 << cnt) - 1
    bits_used = pos * 8 - cnt
    return blocks, ac_pos[:ntok].copy(), status, bits_used


def _tokenize(blocks):
    """Canonical run-length tokenization of the AC part of every block.

    Returns ``(symbols, values, token_block, token_k)``; EOB and ZRL tokens
    carry value 0 and ``token_k`` -1.
    """
    n = blocks.shape[0]
    cap = n * 64
    symbols = np.empty(cap, dtype=np.uint8)
    values = np.empty(cap, dtype=np.int32)
    tblock = np.empty(cap, dtype=np.int32)
    tk = np.empty(cap, dtype=np.int8)
    t = 0
    for b in range(n):
        run = 0
        for k in range(1, 64):
            v = blocks[b, k]
            if v == 0:
                run += 1
                continue
            while run > 15:
                symbols[t] = 0xF0
                values[t] = 0
                tblock[t] = b
                tk[t] = -1
                t += 1
                run -= 16
            a = v if v > 0 else -v
            s = 0
            while a:
                s += 1
                a >>= 1
            symbols[t] = (run << 4) | s
            values[t] = v
            tblock[t] = b
            tk[t] = k
            t += 1
            run = 0
        if run > 0:
            symbols[t] = 0
            values[t] = 0
            tblock[t] = b
            tk[t] = -1
            t += 1
    return symbols[:t].copy(), values[:t].copy(), tblock[:t].copy(), tk[:t].copy()


def _encode_scan(blocks, dc_code, dc_len, ac_pos, ac_code, ac_len):
    """Entropy-code ``blocks``; the t-th AC token uses code ``ac_pos[t]``.

    ``dc_code``/``dc_len`` are indexed by DC size category.  Returns the
    de-stuffed byte array (final byte padded with 1-bits) and the exact
    number of payload bits written; ``-1`` bits signals a token-count
    mismatch with ``ac_pos``.
    """
    n = blocks.shape[0]
    out = np.empty(n * 64 * 4 + 16, dtype=np.uint8)
    o = 0
    acc = np.int64(0)
    nacc = 0
    total = 0
    t = 0
    ntok = ac_pos.shape[0]
    pred = 0
    for b in range(n):
        diff = blocks[b, 0] - pred
        pred = blocks[b, 0]
        a = diff if diff > 0 else -diff
        s = 0
        while a:
            s += 1
            a >>= 1
        # code
        acc = (acc << dc_len[s]) | dc_code[s]
        nacc += dc_len[s]
        total += dc_len[s]
        if s > 0:
            bits = diff if diff > 0 else diff + (1 << s) - 1
            acc = (acc << s) | bits
            nacc += s
            total += s
        while nacc >= 8:
            nacc -= 8
            out[o] = (acc >> nacc) & 0xFF
            o += 1
        acc &= (np.int64(1) << nacc) - 1
        run = 0
        for k in range(1, 64):
            v = blocks[b, k]
            if v == 0:
                run += 1
                continue
            while run > 15:
                if t >= ntok:
                    return out[:o].copy(), -1
                p = ac_pos[t]
                t += 1
                acc = (acc << ac_len[p]) | ac_code[p]
                nacc += ac_len[p]
                total += ac_len[p]
                while nacc >= 8:
                    nacc -= 8
                    out[o] = (acc >> nacc) & 0xFF
                    o += 1
                acc &= (np.int64(1) << nacc) - 1
                run -= 16
            a = v if v > 0 else -v
            s = 0
            while a:
                s += 1
                a >>= 1
            if t >= ntok:
                return out[:o].copy(), -1
            p = ac_pos[t]
            t += 1
            bits = v if v > 0 else v + (1 << s) - 1
            acc = (((acc << ac_len[p]) | ac_code[p]) << s) | bits
            nacc += ac_len[p] + s
            total += ac_len[p] + s
            while nacc >= 8:
                nacc -= 8
                out[o] = (acc >> nacc) & 0xFF
                o += 1
            acc &= (np.int64(1) << nacc) - 1
            run = 0
        if run > 0:
            if t >= ntok:
                return out[:o].copy(), -1
            p = ac_pos[t]
            t += 1
            acc = (acc << ac_len[p]) | ac_code[p]
            nacc += ac_len[p]
            total += ac_len[p]
            while nacc >= 8:
                nacc -= 8
                out[o] = (acc >> nacc) & 0xFF
                o += 1
            acc &= (np.int64(1) << nacc) - 1
    if t != ntok:
        return out[:o].copy(), -1
    if nacc > 0:
        pad = 8 - nacc
        out[o] = ((acc << pad) | ((1 << pad) - 1)) & 0xFF
        o += 1
    return out[:o].copy(), total


def _scan_bit_count(blocks, dc_len, ac_len_by_symbol):
    """Exact number of entropy-coded bits for ``blocks`` (padding excluded)."""
    n = blocks.shape[0]
    total = 0
    pred = 0
    for b in range(n):
        diff = blocks[b, 0] - pred
        pred = blocks[b, 0]
        a = diff if diff > 0 else -diff
        s = 0
        while a:
            s += 1
            a >>= 1
        total += dc_len[s] + s
        run = 0
        for k in range(1, 64):
            v = blocks[b, k]
            if v == 0:
                run += 1
                continue
            while run > 15:
                total += ac_len_by_symbol[0xF0]
                run -= 16
            a = v if v > 0 else -v
            s = 0
            while a:
                s += 1
                a >>= 1
            total += ac_len_by_symbol[(run << 4) | s] + s
            run = 0
        if run > 0:
            total += ac_len_by_symbol[0]
    return total


def _preceding_runs(blocks):
    """Zero-run preceding each nonzero AC coefficient; -1 elsewhere."""
    n = blocks.shape[0]
    runs = np.full((n, 64), -1, dtype=np.int16)
    for b in range(n):
        run = 0
        for k in range(1, 64):
            if blocks[b, k] == 0:
                run += 1
            else:
                runs[b, k] = run
                run = 0
    return runs


def _coefficient_costs(blocks, hcit, max_ac):
    """Doubled expected growth of touching each AC coefficient.

    Returns ``(cost2, carriers, overflow)``: ``cost2[b, k]`` is 2 or 4 times
    ``hcit[run % 16, size] + 1`` when ``|d| = 2^size - 1`` (weights 1/2 and
    1), ``carriers`` marks the +-1 entries and ``overflow[k]`` flags a
    column reaching ``max_ac``.
    """
    n = blocks.shape[0]
    cost2 = np.zeros((n, 64), dtype=np.int64)
    carriers = np.zeros((n, 64), dtype=np.bool_)
    overflow = np.zeros(64, dtype=np.bool_)
    for b in range(n):
        run = 0
        for k in range(1, 64):
            v = blocks[b, k]
            if v == 0:
                run += 1
                continue
            a = v if v > 0 else -v
            if a >= max_ac:
                overflow[k] = True
            if a == 1:
                carriers[b, k] = True
            if (a & (a + 1)) == 0:
                s = 0
                t = a
                while t:
                    s += 1
                    t >>= 1
                if s <= 9:
                    cost2[b, k] = (hcit[run % 16, s] + 1) * (1 if a == 1 else 2)
            run = 0
    return cost2, carriers, overflow


PY = SimpleNamespace(
    coefficient_costs=_coefficient_costs,
    decode_scan=_decode_scan,
    tokenize=_tokenize,
    encode_scan=_encode_scan,
    scan_bit_count=_scan_bit_count,
    preceding_runs=_preceding_runs,
)

if USE_NUMBA:
    _njit = numba.njit(cache=True, nogil=True)
    decode_scan = _njit(_decode_scan)
    tokenize = _njit(_tokenize)
    encode_scan = _njit(_encode_scan)
    scan_bit_count = _njit(_scan_bit_count)
    preceding_runs = _njit(_preceding_runs)
    coefficient_costs = _njit(_coefficient_costs)
else:
    decode_scan = _decode_scan
    tokenize = _tokenize
    encode_scan = _encode_scan
    scan_bit_count = _scan_bit_count
    preceding_runs = _preceding_runs
    coefficient_costs = None  # numpy path in dct_domain is faster than plain loops
