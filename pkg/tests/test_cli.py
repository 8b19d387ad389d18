import csv

import numpy as np
import pytest

import corpus
from mdrdh.cli import aggregate, bits_to_bytes, bytes_to_bits, main, payload_bits, qf_from_name, sha256_hex
from mdrdh.errors import EXIT_CODES


@pytest.fixture
def cam(tmp_path, camera_bytes):
    p = tmp_path / "cam_qf50.jpg"
    p.write_bytes(camera_bytes)
    return p


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


def _fields(line):
    return dict(kv.split("=", 1) for kv in line.split())


def test_embed_extract_verify(tmp_path, cam, capsys):
    out = tmp_path / "m.jpg"
    code, res = _run(capsys, "embed", cam, out, "--random-bits", 5000, "--seed", 7)
    assert code == 0
    f = _fields(res.out)
    assert int(f["L1"]) + int(f["L2"]) == 5000 and f["mode"] == "multi"
    first = out.read_bytes()
    _run(capsys, "embed", cam, out, "--random-bits", 5000, "--seed", 7)
    assert out.read_bytes() == first

    pay, rest = tmp_path / "p.bin", tmp_path / "r.jpg"
    code, res = _run(capsys, "extract", out, "--payload-out", pay, "--restored-out", rest)
    assert code == 0
    assert _fields(res.out)["restored_sha256"] == sha256_hex(cam.read_bytes())
    assert rest.read_bytes() == cam.read_bytes()
    assert np.array_equal(bytes_to_bits(pay.read_bytes()), payload_bits(5000, 7))
    code, res = _run(capsys, "verify", cam, out)
    assert code == 0 and res.out.startswith("ok")


def test_payload_file(tmp_path, cam, capsys):
    msg = tmp_path / "msg.txt"
    msg.write_bytes(b"reversible hiding\n")
    out = tmp_path / "m.jpg"
    assert _run(capsys, "embed", cam, out, "--payload", msg, "--mode", "dct-only")[0] == 0
    code, res = _run(capsys, "verify", cam, out, "--payload", msg)
    assert code == 0


def test_mode_contracts(tmp_path, cam, capsys):
    out = tmp_path / "m.jpg"
    code, res = _run(capsys, "embed", cam, out, "--random-bits", 3000, "--mode", "dct-only")
    assert code == 0 and _fields(res.out)["L2"] == "0"
    code, res = _run(capsys, "embed", cam, out, "--random-bits", 60000, "--mode", "entropy-only")
    assert code == EXIT_CODES["CapacityError"]
    assert "error: CapacityError" in res.err


def test_error_exit_codes(tmp_path, cam, capsys):
    code, res = _run(capsys, "extract", cam)
    assert code == EXIT_CODES["NotMarked"] and "NotMarked" in res.err
    out = tmp_path / "m.jpg"
    _run(capsys, "embed", cam, out, "--random-bits", 1000)
    cut = tmp_path / "cut.jpg"
    cut.write_bytes(out.read_bytes()[: len(out.read_bytes()) // 2])
    code, res = _run(capsys, "extract", cut)
    assert code == EXIT_CODES["TruncatedStream"]
    assert len(set(EXIT_CODES.values())) == len(EXIT_CODES)


def test_helpers():
    bits = payload_bits(77, 3)
    assert bits.size == 77 and set(np.unique(bits)) <= {0, 1}
    assert np.array_equal(payload_bits(77, 3), bits)
    assert not np.array_equal(payload_bits(77, 4), bits)
    assert bits_to_bytes(bytes_to_bits(b"\x00\xa5\xff")) == b"\x00\xa5\xff"
    assert qf_from_name("boat_qf70.jpg") == "70" and qf_from_name("x.jpg", "50") == "50"


def test_analyze(cam, capsys):
    code, res = _run(capsys, "analyze", cam)
    assert code == 0
    lines = res.out.splitlines()
    i = lines.index("# hclt (rows run 0..15, columns size 1..10)")
    assert lines[i + 1] == "2,2,3,4,5,7,8,10,16,16"
    j = lines.index("# hcit (rows run 0..15, columns size 1..9)")
    assert lines[j + 1] == "0,1,1,1,2,1,2,6,0"
    h = lines.index("# sorted histogram: position,symbol,count,length")
    counts = []
    for line in lines[h + 1:]:
        if line.startswith("#"):
            tail = line
            break
        counts.append(int(line.split(",")[2]))
    ntok = int(tail.split()[2])
    assert sum(counts) == ntok
    assert counts == sorted(counts, reverse=True)


def test_analyze_flat_image(tmp_path, capsys):
    p = tmp_path / "flat.jpg"
    p.write_bytes(corpus.encode(np.full((64, 64), 120, np.uint8), 50))
    code, res = _run(capsys, "analyze", p)
    lines = res.out.splitlines()
    k = lines.index("# frequency costs: k,L,capacity,S,UF")
    assert lines[k + 1].startswith("#")


def _read_csv(path):
    with open(path) as fh:
        head = fh.readline()
        return head, list(csv.DictReader(fh))


def test_bench(tmp_path, qf50, capsys):
    d = tmp_path / "c"
    d.mkdir()
    for src in qf50[:2]:
        (d / src.name).write_bytes(src.read_bytes())
    outs = []
    for run in range(2):
        out = tmp_path / f"b{run}.csv"
        code, _ = _run(capsys, "bench", d, "--payloads", "2000,3500", "--modes", "multi,dct-only",
                       "--seed", 5, "--out", out)
        assert code == 0
        outs.append(out)
    head, rows = _read_csv(outs[0])
    assert head.startswith("# prng=numpy.PCG64 seed=5")
    assert len(rows) == 8
    assert all(r["reversibility"] == "pass" for r in rows)
    assert {r["qf"] for r in rows} == {"50"}
    strip = lambda rs: [{k: v for k, v in r.items() if k != "elapsed_ms"} for r in rs]
    assert strip(rows) == strip(_read_csv(outs[1])[1])
    _, agg = _read_csv(tmp_path / "b0_aggregate.csv")
    assert len(agg) == 4 and all(r["n_images"] == "2" for r in agg)
    assert (tmp_path / "b0_aggregate.csv").read_bytes() == (tmp_path / "b1_aggregate.csv").read_bytes()


def test_bench_parallel_matches_serial(qf50):
    from mdrdh.cli import run_bench

    a, _ = run_bench(qf50[:3], [2000], ["multi", "huffopt-only"], seed=1, jobs=1)
    b, _ = run_bench(qf50[:3], [2000], ["multi", "huffopt-only"], seed=1, jobs=2)
    key = lambda rs: [(r.image_id, r.mode, r.L1, r.L2, r.expansion_bits, r.psnr_db) for r in rs]
    assert key(a) == key(b)
    assert sum(r.mode == "huffopt-only" for r in a) == 3
    assert {row["mode"] for row in aggregate(a)} == {"multi", "huffopt-only"}
