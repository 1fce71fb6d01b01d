import json
import random
import subprocess
import sys

import pytest

from ringdot import cli
from ringdot.codec import derive_seed
from ringdot.dot import DotProductInstance
from ringdot.errors import ProtocolAbort
from ringdot.netsim import METRICS_HEADER


def run(*argv):
    return cli.main([str(a) for a in argv])


def read(path):
    return json.loads(path.read_text())


def test_dotprod_matches_recomputed_oracle(tmp_path):
    out = tmp_path / "r.json"
    assert run("dotprod", "--protocol", "dsdp", "--n", 5, "--B", 100, "--seed", 7, "--out", out) == 0
    doc = read(out)
    rng = random.Random(derive_seed("cli", "dsdp", 5, 100, 7))
    inst = DotProductInstance.random(5, 100, rng)
    assert int(doc["S"], 16) == sum(u * v for u, v in zip(inst.U, inst.V))
    assert doc["aborted"] is False and doc["metrics"]["messages"] == 12


@pytest.mark.parametrize("protocol,expected", [("dsdp", "dot"), ("esdp", "ring"), ("mpwp", "ring"),
                                               ("pmpwp", "ring"), ("wiretap", "dot")])
def test_dotprod_protocols(tmp_path, protocol, expected):
    out = tmp_path / "r.json"
    assert run("dotprod", "--protocol", protocol, "--n", 4, "--B", 20, "--seed", 1, "--d", 2, "--out", out) == 0
    doc = read(out)
    inst = DotProductInstance.from_json(doc["inputs"])
    want = inst.dot() if expected == "dot" else inst.ring_dot()
    assert int(doc["S"], 16) == want


def test_dotprod_input_file(tmp_path):
    inp = tmp_path / "in.json"
    inp.write_text(json.dumps({"n": 3, "B": 10, "U": ["2", "3", "4"], "V": ["5", "6", "7"]}))
    out = tmp_path / "r.json"
    assert run("dotprod", "--input", inp, "--out", out) == 0
    assert int(read(out)["S"], 16) == 56


def test_matmul_identity(tmp_path):
    out = tmp_path / "m.json"
    assert run("matmul", "--n", 3, "--identity", "--out", out) == 0
    C = [[int(x, 16) for x in row] for row in read(out)["C"]]
    assert C == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]


def test_matmul_input(tmp_path):
    inp = tmp_path / "in.json"
    inp.write_text(json.dumps({"A": [[1, 2, 3], [4, 5, 6], [7, 8, 9]], "B": [[9, 8, 7], [6, 5, 4], [3, 2, 1]]}))
    out = tmp_path / "m.json"
    assert run("matmul", "--input", inp, "--B", 10, "--out", out) == 0
    C = [[int(x, 16) for x in row] for row in read(out)["C"]]
    assert C == [[30, 24, 18], [84, 69, 54], [138, 114, 90]]


def test_trust_command(tmp_path):
    out = tmp_path / "t.json"
    assert run("trust", "--n", 3, "--p", 2, "--seed", 2, "--out", out) == 0
    doc = read(out)
    assert len(doc["C"]) == 3 and all(len(row) == 3 for row in doc["C"])


def test_keygen(tmp_path):
    out = tmp_path / "k.json"
    assert run("keygen", "--n", 4, "--B", 10, "--seed", 3, "--out", out) == 0
    assert read(out)["n"] == 4


@pytest.mark.parametrize("argv", [
    ("dotprod", "--protocol", "dsdp", "--n", 2),
    ("dotprod", "--protocol", "nope"),
    ("dotprod", "--bogus"),
    ("frobnicate",),
    ("dotprod", "--d", 0),
    ("attack", "--scenario", "/nonexistent.json"),
])
def test_usage_errors(argv):
    assert run(*argv) == 2


def test_precondition_violation_is_usage_error(tmp_path):
    inp = tmp_path / "in.json"
    inp.write_text(json.dumps({"n": 3, "B": 10, "U": ["2", "3", "ff"], "V": ["5", "6", "7"]}))
    assert run("dotprod", "--input", inp) == 2


def test_abort_exit_code(tmp_path, monkeypatch):
    def boom(inst, net):
        raise ProtocolAbort(3, "affine-check", "affine relation does not hold")

    monkeypatch.setattr(cli, "run_dsdp", boom)
    out = tmp_path / "r.json"
    assert run("dotprod", "--out", out) == 3
    doc = read(out)
    assert doc["aborted"] is True and doc["abort_step"] == "affine-check"


@pytest.mark.parametrize("doc,code", [
    ({"attack": "alice_key", "n": 3, "compromised": [1]}, 4),
    ({"attack": "alice_key", "n": 3, "compromised": [1], "countermeasures": {"proofs": True}}, 0),
    ({"attack": "charlie_key", "n": 3, "compromised": [3]}, 4),
    ({"attack": "charlie_key", "n": 3, "compromised": [3], "countermeasures": {"signatures": True}}, 0),
    ({"attack": "sandwich", "n": 5, "compromised": [1, 2, 4], "target": 3}, 4),
    ({"attack": "sandwich", "n": 5, "compromised": [1, 2], "target": 3}, 0),
    ({"attack": "sandwich", "n": 5, "compromised": [9], "target": 3}, 2),
])
def test_attack_exit_codes(tmp_path, doc, code):
    sc = tmp_path / "s.json"
    sc.write_text(json.dumps(doc))
    out = tmp_path / "o.json"
    assert run("attack", "--scenario", sc, "--out", out) == code
    if code != 2:
        assert read(out)["succeeded"] is (code == 4)


def test_config_defaults(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 4, "B": 9, "seed": 5}))
    out = tmp_path / "r.json"
    assert run("--config", cfg, "dotprod", "--out", out) == 0
    doc = read(out)
    assert doc["n"] == 4 and doc["seed"] == 5 and doc["inputs"]["B"] == 9
    assert run("--config", cfg, "dotprod", "--n", 3, "--out", out) == 0
    assert read(out)["n"] == 3
    cfg.write_text(json.dumps({"colour": "red"}))
    assert run("--config", cfg, "dotprod") == 2


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.SEED_ENV, "11")
    out = tmp_path / "r.json"
    assert run("dotprod", "--out", out) == 0
    assert read(out)["seed"] == 11
    monkeypatch.setenv(cli.SEED_ENV, "eleven")
    assert run("dotprod", "--out", out) == 2


def test_metrics_csv_and_timing(tmp_path):
    m = tmp_path / "m.csv"
    assert run("dotprod", "--n", 4, "--metrics", m) == 0
    header, row = m.read_text().splitlines()
    assert header.split(",") == METRICS_HEADER
    assert row.split(",")[6] == ""
    assert run("dotprod", "--n", 4, "--metrics", m, "--timing") == 0
    assert float(m.read_text().splitlines()[1].split(",")[6]) >= 0


def test_bench_small(tmp_path, capsys):
    out = tmp_path / "b.csv"
    assert run("bench", "--protocols", "dsdp", "--sizes", 4, 8, "--key-bits", 128, "--no-timing", "--fit",
               "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",") == METRICS_HEADER and len(lines) == 3
    assert "dsdp: bytes ~ n^" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ("dotprod", "--protocol", "dsdp", "--n", 5, "--seed", 3, "--proofs", "--signatures"),
    ("dotprod", "--protocol", "wiretap", "--n", 5, "--d", 3, "--seed", 3),
    ("dotprod", "--protocol", "mpwp", "--n", 4, "--seed", 3),
    ("matmul", "--n", 4, "--seed", 3),
    ("trust", "--n", 3, "--seed", 3),
])
def test_repeated_runs_are_byte_identical(tmp_path, argv):
    blobs = []
    for k in range(2):
        out, met, tr = tmp_path / f"o{k}", tmp_path / f"m{k}", tmp_path / f"t{k}"
        assert run(*argv, "--out", out, "--metrics", met, "--transcript", tr) == 0
        blobs.append((out.read_bytes(), met.read_bytes(), tr.read_bytes()))
    assert blobs[0] == blobs[1]


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "ringdot.cli", "dotprod", "--n", "3", "--seed", "1", "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "S" in read(out)
