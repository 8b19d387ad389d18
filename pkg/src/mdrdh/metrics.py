"""File expansion and PSNR."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .jpeg_codec import decode_pixels, entropy_decode, parse
from .pipeline import SIDE_SEGMENT_BYTES, find_side_info

INF = math.inf


def file_expansion(original: bytes, marked: bytes) -> int:
    return (len(marked) - len(original)) * 8


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0:
        return INF
    return float(10.0 * np.log10(255.0 ** 2 / mse))


def format_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.4f}"


def jpeg_pixels(data: bytes) -> np.ndarray:
    image, _ = entropy_decode(parse(data))
    return decode_pixels(image)


@dataclass(frozen=True)
class EvalReport:
    expansion_bits: int
    expansion_excl_sideinfo_bits: int
    psnr_db: float
    payload_bits: int
    qf_label: str = ""

    @property
    def sideinfo_bits(self) -> int:
        return self.expansion_bits - self.expansion_excl_sideinfo_bits


def evaluate(original: bytes, marked: bytes, payload_bits: int, qf_label: str = "",
             original_pixels: np.ndarray | None = None) -> EvalReport:
    side = SIDE_SEGMENT_BYTES if find_side_info(parse(marked)) is not None else 0
    exp = file_expansion(original, marked)
    ref = original_pixels if original_pixels is not None else jpeg_pixels(original)
    return EvalReport(exp, exp - 8 * side, psnr(ref, jpeg_pixels(marked)), payload_bits, qf_label)
