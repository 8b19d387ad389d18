"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [image.jpg] [--repeat 5]

Without an image argument a 512x384 QF50 crop of the scikit-image camera
picture is encoded with Pillow (both must be installed).  Outputs of the two
paths are compared before timing.
"""
from __future__ import annotations

import argparse
import io
import statistics
import time

import numpy as np

from mdrdh import _kernels as K
from mdrdh.dct_domain import MAX_AC, code_length_tables
from mdrdh.huffman import CodeAssignment
from mdrdh.jpeg_codec import destuff, parse


def default_image() -> bytes:
    import skimage.data
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(skimage.data.camera()[:384, :512]).save(buf, "JPEG", quality=50)
    return buf.getvalue()


def cases(data: bytes):
    jpeg = parse(data)
    dca = CodeAssignment(jpeg.dc_spec)
    aca = CodeAssignment(jpeg.ac_spec)
    raw = destuff(jpeg.scan_data)
    nblocks = jpeg.frame.blocks_wide * jpeg.frame.blocks_high
    dec_args = (raw, nblocks, dca.maxcode, dca.mincode, dca.valptr, dca.symbols,
                aca.maxcode, aca.mincode, aca.valptr, aca.symbols)
    blocks, positions, _, _ = K.PY.decode_scan(*dec_args)
    enc_args = (blocks, dca.code_by_symbol[:12].copy(), dca.length_by_symbol[:12].copy(),
                positions, aca.codes, aca.lengths)
    return {
        "decode_scan": dec_args,
        "tokenize": (blocks,),
        "encode_scan": enc_args,
        "scan_bit_count": (blocks, dca.length_by_symbol[:12].copy(), aca.length_by_symbol),
        "preceding_runs": (blocks,),
        "coefficient_costs": (blocks, code_length_tables(aca).hcit, MAX_AC),
    }


def same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(np.asarray(a), np.asarray(b)))


def timeit(fn, args, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("image", nargs="?")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not K.USE_NUMBA:
        print("numba disabled (MDRDH_NO_NUMBA set or numba missing); nothing to compare")
        return 1
    data = open(args.image, "rb").read() if args.image else default_image()
    print(f"{'kernel':<16}{'python ms':>12}{'numba ms':>12}{'speedup':>10}  match")
    for name, fargs in cases(data).items():
        fast, slow = getattr(K, name), getattr(K.PY, name)
        ok = same(fast(*fargs), slow(*fargs))  # also triggers compilation
        t_py = timeit(slow, fargs, max(1, args.repeat // 2))
        t_nb = timeit(fast, fargs, args.repeat)
        print(f"{name:<16}{t_py * 1e3:>12.2f}{t_nb * 1e3:>12.3f}{t_py / t_nb:>10.1f}  {ok}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
