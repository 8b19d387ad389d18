import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from skimage.metrics import peak_signal_noise_ratio

from mdrdh import embed
from mdrdh.errors import DimensionMismatch
from mdrdh.metrics import evaluate, file_expansion, format_db, jpeg_pixels, psnr
from mdrdh.pipeline import SIDE_SEGMENT_BYTES


def test_identical_is_inf():
    a = np.full((8, 8), 7, np.uint8)
    assert psnr(a, a) == math.inf and format_db(psnr(a, a)) == "inf"


def test_single_unit_error():
    a = np.zeros((8, 8), np.uint8)
    b = a.copy()
    b += 1
    # mse = 1 -> 20 log10(255)
    assert psnr(a, b) == pytest.approx(48.1308, abs=1e-4)
    assert format_db(psnr(a, b)) == "48.1308"


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        psnr(np.zeros((8, 8)), np.zeros((8, 16)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_skimage_and_is_symmetric(seed):
    r = np.random.default_rng(seed)
    a = r.integers(0, 256, (16, 24), dtype=np.uint8)
    b = np.clip(a.astype(int) + r.integers(-9, 10, a.shape), 0, 255).astype(np.uint8)
    if np.array_equal(a, b):
        return
    ref = peak_signal_noise_ratio(a, b, data_range=255)
    assert abs(psnr(a, b) - ref) < 0.01
    assert psnr(a, b) == psnr(b, a)


def test_file_expansion():
    assert file_expansion(b"abc", b"abcde") == 16
    assert file_expansion(b"abcde", b"abc") == -16


def test_evaluate(camera_bytes):
    bits = np.random.default_rng(2).integers(0, 2, 2000)
    marked = embed(camera_bytes, bits)
    rep = evaluate(camera_bytes, marked, 2000, "50")
    assert rep.expansion_bits == 8 * (len(marked) - len(camera_bytes))
    assert rep.sideinfo_bits == 8 * SIDE_SEGMENT_BYTES
    assert rep.psnr_db == psnr(jpeg_pixels(camera_bytes), jpeg_pixels(marked))
    assert 30 < rep.psnr_db < math.inf
