import csv
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from qcpd.admm import AdmmConfig, quantized_cpd
from qcpd.bench import load_schema, synthetic_tensor
from qcpd.cli import main
from qcpd.quantize import QuantScheme
from qcpd.tensor import reconstruct, rel_error
from qcpd.tensorfile import encode_tensor, read_tensor, write_tensor

FAST = ["--outer-max", "5", "--inner-max", "5", "--als-iters", "3"]


def run(*argv):
    return main([str(a) for a in argv])


def report(path):
    return json.loads(path.read_text())


@pytest.fixture
def low_rank(tmp_path):
    path = tmp_path / "t.qtns"
    assert run("gen", "--shape", "8,7,9", "--rank", "2", "--noise", "0.01", "--seed", "3", "--output", path) == 0
    return path


def test_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.qtns", tmp_path / "b.qtns"
    for p in (a, b):
        assert run("gen", "--shape", "5,4,3", "--rank", "2", "--bits", "4", "--seed", "7", "--output", p) == 0
    assert a.read_bytes() == b.read_bytes()
    run("gen", "--shape", "5,4,3", "--rank", "2", "--bits", "4", "--seed", "8", "--output", b)
    assert a.read_bytes() != b.read_bytes()


def test_gen_noise_level():
    for seed in range(5):
        syn = synthetic_tensor((16, 12, 9), 3, noise=0.01, seed=seed)
        clean = reconstruct(syn.factors)
        assert np.linalg.norm(syn.tensor - clean) == pytest.approx(0.01 * np.linalg.norm(clean), rel=1e-12)
        assert syn.floor == pytest.approx(rel_error(syn.tensor, clean), rel=1e-12)
        assert syn.floor == pytest.approx(0.01, rel=1e-3)


def test_gen_on_grid_rank_two_is_recoverable(tmp_path, capsys):
    path = tmp_path / "g.qtns"
    assert run("gen", "--shape", "8,8,8", "--rank", "2", "--bits", "4", "--seed", "0", "--output", path) == 0
    assert "e_quant floor" in capsys.readouterr().out
    syn = synthetic_tensor((8, 8, 8), 2, bits=4, seed=0)
    t = read_tensor(path)
    assert t.tobytes() == syn.tensor.tobytes()
    q = quantized_cpd(t, 2, AdmmConfig(bits=4, scheme=QuantScheme("minmax", False)), syn.factors)
    assert q.e_quant < 1e-10


def test_qfactorize_exact_rank_one(tmp_path):
    path, rep, trace = tmp_path / "g.qtns", tmp_path / "r.json", tmp_path / "t.csv"
    run("gen", "--shape", "9,8,7", "--rank", "1", "--bits", "4", "--seed", "1", "--output", path)
    code = run(
        "qfactorize", "--input", path, "--rank", "1", "--bits", "4", "--scheme", "minmax",
        "--asymmetric", "--report", rep, "--trace", trace,
    )
    assert code == 0
    r = report(rep)
    assert r["e_quant"] < 1e-10
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["sweep", "e_quant", "rel_error"]
    assert len(rows) - 1 == r["sweeps"]
    assert min(float(row[1]) for row in rows[1:]) == r["e_quant"]


def test_qfactorize_deterministic_and_schema(low_rank, tmp_path):
    outs = []
    for name in ("a", "b"):
        rep = tmp_path / f"{name}.json"
        assert run("qfactorize", "--input", low_rank, "--rank", "2", "--bits", "4", "--hw", "4,4",
                   "--report", rep, *FAST) == 0
        outs.append(report(rep))
    jsonschema.validate(outs[0], load_schema("qfactorize"))
    assert outs[0]["wall_time"] >= 0
    for r in outs:
        del r["wall_time"]
    assert json.dumps(outs[0]) == json.dumps(outs[1])
    assert outs[0]["bops"] == outs[0]["macs"] * 4 * 8


def test_qfactorize_rate(low_rank, tmp_path):
    rep = tmp_path / "r.json"
    assert run("qfactorize", "--input", low_rank, "--rate", "1.5", "--report", rep, *FAST) == 0
    assert report(rep)["rank"] == int(504 / 24 / 1.5)


def test_factorize(low_rank, tmp_path):
    rep = tmp_path / "r.json"
    assert run("factorize", "--input", low_rank, "--rank", "2", "--report", rep) == 0
    assert report(rep)["rel_error"] < 0.02


def test_compare_report(low_rank, tmp_path):
    rep = tmp_path / "c.json"
    assert run("compare", "--input", low_rank, "--rank", "2", "--bits", "4", "--report", rep, *FAST) == 0
    r = report(rep)
    jsonschema.validate(r, load_schema("compare"))
    e = r["e_quant"]
    w = r["winners"]["admm_als_balanced_vs_successive"]
    assert w == ("admm_als_balanced" if e["admm_als_balanced"] <= e["successive"] else "successive")


def test_compare_zero_als_sweeps_coincide(low_rank, tmp_path):
    rep = tmp_path / "c.json"
    args = ["compare", "--input", low_rank, "--rank", "2", "--report", rep, "--outer-max", "4"]
    assert run(*args, "--als-iters", "0") == 0
    e = report(rep)["e_quant"]
    assert e["admm_random"] == e["admm_als_balanced"]


def test_compress_conv(tmp_path):
    k = tmp_path / "k.qtns"
    write_tensor(k, np.random.default_rng(0).standard_normal((64, 64, 3, 3)))
    rep, prefix = tmp_path / "r.json", tmp_path / "w"
    code = run("compress-conv", "--input", k, "--rate", "2", "--bits", "4", "--report", rep,
               "--output-prefix", prefix, "--outer-max", "2", "--inner-max", "5", "--als-iters", "2")
    assert code == 0
    r = report(rep)
    jsonschema.validate(r, load_schema("compress_conv"))
    assert r["rank"] == 134 and r["path"] == "cp3"
    assert read_tensor(tmp_path / "w_first.qtns").shape == (134, 64)
    assert read_tensor(tmp_path / "w_mid.qtns").shape == (3, 3, 134)
    assert read_tensor(tmp_path / "w_last.qtns").shape == (64, 134)
    assert r["original"]["bops"] == 1024 * r["original"]["macs"]


def test_compress_conv_pointwise(tmp_path):
    k = tmp_path / "k.qtns"
    write_tensor(k, np.random.default_rng(1).standard_normal((6, 5, 1, 1)))
    rep = tmp_path / "r.json"
    assert run("compress-conv", "--input", k, "--rank", "2", "--report", rep, *FAST) == 0
    r = report(rep)
    jsonschema.validate(r, load_schema("compress_conv"))
    assert r["path"] == "matrix"
    assert 0 <= r["probe_deviation"] < 1


def test_compress_conv_rejects_even_kernel(tmp_path, capsys):
    k = tmp_path / "k.qtns"
    write_tensor(k, np.ones((2, 2, 2, 2)))
    assert run("compress-conv", "--input", k, "--rank", "1") == 2
    assert "odd" in capsys.readouterr().err


@pytest.mark.parametrize("bits", ["1", "9", "32"])
def test_bits_out_of_range(low_rank, bits):
    with pytest.raises(SystemExit) as exc:
        run("compare", "--input", low_rank, "--rank", "2", "--bits", bits)
    assert exc.value.code == 2


def test_usage_errors(low_rank, tmp_path, capsys):
    assert run("qfactorize", "--input", low_rank, "--rank", "2", "--asymmetric") == 2
    assert run("qfactorize", "--input", tmp_path / "missing.qtns", "--rank", "2") == 2
    assert run("qfactorize", "--input", low_rank, "--rank", "0") == 2
    write_tensor(tmp_path / "z.qtns", np.zeros((3, 3)))
    assert run("qfactorize", "--input", tmp_path / "z.qtns", "--rank", "1") == 2
    write_tensor(tmp_path / "4d.qtns", np.ones((2, 2, 2, 2)))
    assert run("qfactorize", "--input", tmp_path / "4d.qtns", "--rank", "1") == 2
    with pytest.raises(SystemExit):
        run("qfactorize", "--input", low_rank, "--rank", "2", "--rate", "2")
    capsys.readouterr()


def test_truncated_file_subprocess(tmp_path):
    path = tmp_path / "bad.qtns"
    path.write_bytes(encode_tensor(np.ones((3, 4)))[:-5])
    proc = subprocess.run(
        [sys.executable, "-m", "qcpd", "qfactorize", "--input", str(path), "--rank", "1"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert "byte offset 115" in proc.stderr
