"""Command-line front end.

    mdrdh embed in.jpg out.jpg --random-bits 5000 --seed 7
    mdrdh extract out.jpg --payload-out msg.bin --restored-out back.jpg
    mdrdh verify in.jpg out.jpg
    mdrdh analyze in.jpg
    mdrdh bench corpus/ --payloads 2000,5000 --modes multi,dct-only --out bench.csv

Library errors exit with the code listed in ``errors.EXIT_CODES`` and print
``error: <Name>: <message>`` on stderr.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import re
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .dct_domain import code_length_tables, frequency_costs
from .entropy_domain import build_histogram, entropy_costs, optimize_table
from .errors import EXIT_CODES, IntegrityFailure, MdrdhError, NoZeroPoint
from .huffman import CodeAssignment
from .jpeg_codec import entropy_decode, parse
from .metrics import evaluate, format_db, jpeg_pixels
from .pipeline import MODES, embed_report, extract

log = logging.getLogger("mdrdh")

PRNG_NAME = "numpy.PCG64"
EXIT_USAGE = 2
EXIT_UNEXPECTED = 1


def payload_bits(nbits: int, seed: int, *key: int) -> np.ndarray:
    """Seeded uniform bits; ``key`` decorrelates streams (image, size...)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.PCG64(ss)).integers(0, 2, nbits, dtype=np.uint8)


def bytes_to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def bits_to_bytes(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def qf_from_name(name: str, default: str = "") -> str:
    m = re.search(r"qf[_-]?(\d+)", name, re.IGNORECASE)
    return m.group(1) if m else default


# ---------------------------------------------------------------- embed


def cmd_embed(args) -> int:
    original = Path(args.input).read_bytes()
    if args.payload is not None:
        bits = bytes_to_bits(Path(args.payload).read_bytes())
    elif args.random_bits is not None:
        bits = payload_bits(args.random_bits, args.seed)
    else:
        bits = np.zeros(0, dtype=np.uint8)
    res = embed_report(original, bits, args.mode)
    back_bits, back = extract(res.data)
    if back != original or not np.array_equal(back_bits, bits):
        raise IntegrityFailure("marked file does not extract to its inputs; nothing written")
    Path(args.output).write_bytes(res.data)
    rep = evaluate(original, res.data, int(bits.size))
    print(f"mode={res.mode} L1={res.L1} L2={res.L2} payload_bits={bits.size} "
          f"expansion_bits={rep.expansion_bits} "
          f"expansion_excl_sideinfo_bits={rep.expansion_excl_sideinfo_bits} "
          f"psnr_db={format_db(rep.psnr_db)}")
    return 0


# -------------------------------------------------------------- extract


def cmd_extract(args) -> int:
    bits, original = extract(Path(args.input).read_bytes())
    if args.payload_out:
        Path(args.payload_out).write_bytes(bits_to_bytes(bits))
    if args.restored_out:
        Path(args.restored_out).write_bytes(original)
    print(f"payload_bits={bits.size} restored_sha256={sha256_hex(original)}")
    return 0


def cmd_verify(args) -> int:
    original = Path(args.original).read_bytes()
    bits, restored = extract(Path(args.marked).read_bytes())
    if restored != original:
        raise IntegrityFailure("restored file differs from the original")
    if args.payload is not None and not np.array_equal(bits, bytes_to_bits(Path(args.payload).read_bytes())):
        raise IntegrityFailure("extracted payload differs from the expected one")
    print(f"ok payload_bits={bits.size} sha256={sha256_hex(original)}")
    return 0


# -------------------------------------------------------------- analyze


def analyze_text(data: bytes) -> str:
    jpeg = parse(data)
    image, tokens = entropy_decode(jpeg)
    asg = CodeAssignment(jpeg.ac_spec)
    out = io.StringIO()
    table = code_length_tables(asg)
    out.write("# hclt (rows run 0..15, columns size 1..10)\n")
    for r in range(16):
        out.write(",".join(str(int(v)) for v in table.hclt[r, 1:]) + "\n")
    out.write("# hcit (rows run 0..15, columns size 1..9)\n")
    for r in range(16):
        out.write(",".join(str(int(v)) for v in table.hcit[r, 1:]) + "\n")
    costs = frequency_costs(image, table)
    out.write("# frequency costs: k,L,capacity,S,UF\n")
    for k in costs.order():
        out.write(f"{k},{costs.L(k)},{int(costs.capacity[k])},{float(costs.S(k)):.4f},{float(costs.UF(k)):.6f}\n")
    hist = build_histogram(tokens, asg)
    sorted_hist, _ = optimize_table(hist, asg)
    out.write("# sorted histogram: position,symbol,count,length\n")
    for i in range(len(sorted_hist)):
        out.write(f"{i + 1},0x{int(sorted_hist.symbols[i]):02X},{int(sorted_hist.counts[i])},"
                  f"{int(sorted_hist.lengths[i])}\n")
    out.write(f"# tokens {len(tokens)} histogram total {sorted_hist.total}\n")
    out.write("# peak costs: P,Z,count,S,M,E\n")
    try:
        ec = entropy_costs(sorted_hist)
        for p in ec.order():
            out.write(f"{p},{ec.zero_of(p)},{ec.count(p)},{float(ec.S(p)):.1f},{float(ec.M(p)):.1f},"
                      f"{float(ec.E(p)):.6f}\n")
    except NoZeroPoint:
        out.write("# no zero point\n")
    return out.getvalue()


def cmd_analyze(args) -> int:
    sys.stdout.write(analyze_text(Path(args.input).read_bytes()))
    return 0


# ---------------------------------------------------------------- bench


@dataclass
class BenchRow:
    image_id: str
    qf: str
    payload_bits: int
    mode: str
    L1: int
    L2: int
    expansion_bits: int
    expansion_excl_sideinfo_bits: int
    psnr_db: str
    elapsed_ms: float
    reversibility: str


BENCH_FIELDS = [f.name for f in fields(BenchRow)]


def _bench_one(job) -> tuple[list, list]:
    idx, path, qf, payloads, modes, seed = job
    data = Path(path).read_bytes()
    image_id = Path(path).stem
    rows, errors = [], []
    try:
        ref_px = jpeg_pixels(data)
    except MdrdhError as exc:
        return rows, [(image_id, qf, "", "", exc.name, str(exc))]
    key = zlib.crc32(image_id.encode())
    for nbits in payloads:
        bits = payload_bits(nbits, seed, key, nbits)
        for mode in modes:
            if mode == "huffopt-only":
                continue
            rows_or_err = _run_case(data, image_id, qf, bits, mode, ref_px)
            (rows if isinstance(rows_or_err, BenchRow) else errors).append(rows_or_err)
    if "huffopt-only" in modes:
        r = _run_case(data, image_id, qf, np.zeros(0, np.uint8), "huffopt-only", ref_px)
        (rows if isinstance(r, BenchRow) else errors).append(r)
    return rows, errors


def _run_case(data, image_id, qf, bits, mode, ref_px):
    t0 = time.perf_counter()
    try:
        res = embed_report(data, bits, mode)
    except MdrdhError as exc:
        return (image_id, qf, int(bits.size), mode, exc.name, str(exc))
    elapsed = (time.perf_counter() - t0) * 1000.0
    try:
        back_bits, back = extract(res.data)
        ok = back == data and np.array_equal(back_bits, bits)
    except MdrdhError:
        ok = False
    rep = evaluate(data, res.data, int(bits.size), qf, original_pixels=ref_px)
    return BenchRow(image_id, qf, int(bits.size), mode, res.L1, res.L2, rep.expansion_bits,
                    rep.expansion_excl_sideinfo_bits, format_db(rep.psnr_db), round(elapsed, 3),
                    "pass" if ok else "fail")


def run_bench(files, payloads, modes, seed=0, qf_default="", jobs=1):
    work = [(i, str(p), qf_from_name(Path(p).name, qf_default), tuple(payloads), tuple(modes), seed)
            for i, p in enumerate(files)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_one, work))
    else:
        results = [_bench_one(w) for w in work]
    rows = [r for rs, _ in results for r in rs]
    errors = [e for _, es in results for e in es]
    return rows, errors


def aggregate(rows: list[BenchRow]) -> list[dict]:
    groups: dict[tuple, list[BenchRow]] = {}
    for r in rows:
        groups.setdefault((r.qf, r.mode, r.payload_bits), []).append(r)
    out = []
    for (qf, mode, nbits), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][2], kv[0][1])):
        ps = [float(r.psnr_db) for r in rs]
        out.append({
            "qf": qf, "mode": mode, "payload_bits": nbits, "n_images": len(rs),
            "mean_expansion_bits": f"{np.mean([r.expansion_bits for r in rs]):.3f}",
            "mean_expansion_excl_sideinfo_bits": f"{np.mean([r.expansion_excl_sideinfo_bits for r in rs]):.3f}",
            "mean_psnr_db": format_db(float(np.mean(ps))),
            "pass_rate": f"{sum(r.reversibility == 'pass' for r in rs) / len(rs):.4f}",
        })
    return out


def _write_csv(path: Path, header_note: str, fieldnames, rows) -> None:
    with path.open("w", newline="") as fh:
        fh.write(header_note + "\n")
        w = csv.DictWriter(fh, fieldnames=fieldnames)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def cmd_bench(args) -> int:
    corpus = Path(args.corpus)
    files = sorted(p for p in corpus.iterdir() if p.suffix.lower() in (".jpg", ".jpeg"))
    payloads = [int(x) for x in args.payloads.split(",") if x]
    modes = [m for m in args.modes.split(",") if m]
    for m in modes:
        if m not in MODES:
            raise SystemExit(f"unknown mode {m!r}")
    rows, errors = run_bench(files, payloads, modes, args.seed, args.qf, args.jobs)
    note = f"# prng={PRNG_NAME} seed={args.seed} tool=mdrdh-{__version__}"
    out = Path(args.out)
    _write_csv(out, note, BENCH_FIELDS, [asdict(r) for r in rows])
    agg = out.with_name(out.stem + "_aggregate" + out.suffix)
    _write_csv(agg, note, ["qf", "mode", "payload_bits", "n_images", "mean_expansion_bits",
                           "mean_expansion_excl_sideinfo_bits", "mean_psnr_db", "pass_rate"], aggregate(rows))
    err = out.with_name(out.stem + "_errors" + out.suffix)
    _write_csv(err, note, ["image_id", "qf", "payload_bits", "mode", "error", "message"],
               [dict(zip(["image_id", "qf", "payload_bits", "mode", "error", "message"], e)) for e in errors])
    print(f"rows={len(rows)} errors={len(errors)} out={out} aggregate={agg}")
    return 0 if all(r.reversibility == "pass" for r in rows) else EXIT_CODES["IntegrityFailure"]


# ----------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdrdh", description="Reversible data hiding in baseline JPEG files")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="hide a payload")
    p.add_argument("input")
    p.add_argument("output")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--payload", help="file whose bytes are embedded")
    src.add_argument("--random-bits", type=int, help="embed N seeded random bits")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=MODES, default="multi")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("extract", help="recover payload and original file")
    p.add_argument("input")
    p.add_argument("--payload-out")
    p.add_argument("--restored-out")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("verify", help="check a marked file against its original")
    p.add_argument("original")
    p.add_argument("marked")
    p.add_argument("--payload")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("analyze", help="dump cost tables of a file")
    p.add_argument("input")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("bench", help="run a corpus benchmark to CSV")
    p.add_argument("corpus")
    p.add_argument("--payloads", default="2000,5000,8000,11000")
    p.add_argument("--modes", default="multi,dct-only,entropy-only")
    p.add_argument("--qf", default="", help="QF label when file names carry none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="bench.csv")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except MdrdhError as exc:
        print(f"error: {exc.name}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.name, EXIT_UNEXPECTED)
    except OSError as exc:
        print(f"error: OSError: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
