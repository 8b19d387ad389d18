"""Huffman table specs (DHT contents) and canonical code construction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KraftViolation, MissingSymbol

DC = 0
AC = 1

EOB = 0x00
ZRL = 0xF0

# ITU T.81 Annex K, tables K.3 and K.5 (luminance).
STD_DC_COUNTS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
STD_DC_SYMBOLS = tuple(range(12))

STD_AC_COUNTS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D)
STD_AC_SYMBOLS = (
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06,
    0x13, 0x51, 0x61, 0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
    0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0, 0x24, 0x33, 0x62, 0x72,
    0x82, 0x09, 0x0A, 0x16, 0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3A, 0x43, 0x44, 0x45,
    0x46, 0x47, 0x48, 0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6A, 0x73, 0x74, 0x75,
    0x76, 0x77, 0x78, 0x79, 0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3,
    0xA4, 0xA5, 0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
    0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9,
    0xCA, 0xD2, 0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA, 0xF1, 0xF2, 0xF3, 0xF4,
    0xF5, 0xF6, 0xF7, 0xF8, 0xF9, 0xFA,
)

# EOB, ZRL and run 0..15 x size 1..10
AC_SYMBOL_DOMAIN = frozenset([EOB, ZRL] + [(r << 4) | s for r in range(16) for s in range(1, 11)])
N_AC_SYMBOLS = len(AC_SYMBOL_DOMAIN)  # 162


@dataclass(frozen=True)
class HuffmanSpec:
    table_class: int
    table_id: int
    counts: tuple
    symbols: tuple

    def __post_init__(self):
        if len(self.counts) != 16:
            raise ValueError("counts must have 16 entries")
        if sum(self.counts) != len(self.symbols):
            raise ValueError("sum(counts) != len(symbols)")

    def to_bytes(self) -> bytes:
        return bytes([(self.table_class << 4) | self.table_id, *self.counts, *self.symbols])

    def with_symbols(self, symbols) -> "HuffmanSpec":
        return HuffmanSpec(self.table_class, self.table_id, self.counts, tuple(int(s) for s in symbols))


def standard_ac_spec(table_id: int = 0) -> HuffmanSpec:
    return HuffmanSpec(AC, table_id, STD_AC_COUNTS, STD_AC_SYMBOLS)


def standard_dc_spec(table_id: int = 0) -> HuffmanSpec:
    return HuffmanSpec(DC, table_id, STD_DC_COUNTS, STD_DC_SYMBOLS)


class CodeAssignment:
    """Canonical codes of a :class:`HuffmanSpec`, indexed by DHT position.

    Position ``i`` (0-based) is the i-th symbol of the DHT list; codes are
    handed out in that order, so code lengths never decrease with position.
    A symbol may sit at two positions (the marked-table beacon); in that case
    ``position_of`` reports the first.
    """

    def __init__(self, spec: HuffmanSpec):
        self.spec = spec
        n = len(spec.symbols)
        codes = np.zeros(n, dtype=np.int64)
        lengths = np.zeros(n, dtype=np.int64)
        maxcode = np.full(17, -1, dtype=np.int64)
        mincode = np.zeros(17, dtype=np.int64)
        valptr = np.zeros(17, dtype=np.int64)
        code = 0
        p = 0
        for length in range(1, 17):
            cnt = spec.counts[length - 1]
            if cnt:
                valptr[length] = p
                mincode[length] = code
                for _ in range(cnt):
                    codes[p] = code
                    lengths[p] = length
                    code += 1
                    p += 1
                maxcode[length] = code - 1
                if code > (1 << length):
                    raise KraftViolation(f"{cnt} codes of length {length} overflow the code space")
            code <<= 1
        self.symbols = np.asarray(spec.symbols, dtype=np.int64)
        self.codes = codes
        self.lengths = lengths
        self.maxcode = maxcode
        self.mincode = mincode
        self.valptr = valptr
        first = {}
        for i, s in enumerate(spec.symbols):
            first.setdefault(s, i)
        self._first = first
        length_by_symbol = np.zeros(256, dtype=np.int64)
        code_by_symbol = np.zeros(256, dtype=np.int64)
        pos_by_symbol = np.full(256, -1, dtype=np.int64)
        for s, i in first.items():
            length_by_symbol[s] = lengths[i]
            code_by_symbol[s] = codes[i]
            pos_by_symbol[s] = i
        self.length_by_symbol = length_by_symbol
        self.code_by_symbol = code_by_symbol
        self.pos_by_symbol = pos_by_symbol

    def __len__(self) -> int:
        return len(self.spec.symbols)

    def __contains__(self, symbol: int) -> bool:
        return symbol in self._first

    def position_of(self, symbol: int) -> int:
        try:
            return self._first[symbol]
        except KeyError:
            raise MissingSymbol(f"symbol 0x{symbol:02X} not in table") from None

    def code_string(self, symbol: int) -> str:
        i = self.position_of(symbol)
        return format(int(self.codes[i]), f"0{int(self.lengths[i])}b")

    def duplicate_positions(self) -> list[tuple[int, int]]:
        """Pairs of positions sharing one symbol."""
        seen: dict[int, int] = {}
        pairs = []
        for i, s in enumerate(self.spec.symbols):
            if s in seen:
                pairs.append((seen[s], i))
            else:
                seen[s] = i
        return pairs


def build_code_assignment(spec: HuffmanSpec) -> CodeAssignment:
    return CodeAssignment(spec)


def code_lengths_by_size(assignment: CodeAssignment, max_size: int = 11) -> tuple[np.ndarray, np.ndarray]:
    """DC-style lookup: code and length indexed by symbol value 0..max_size."""
    return (assignment.code_by_symbol[: max_size + 1].copy(),
            assignment.length_by_symbol[: max_size + 1].copy())
