import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from lshrendezvous.cli import THEORY_COLUMNS, main, parse_range
from lshrendezvous.simengine import CSV_COLUMNS

SRC = str(Path(__file__).resolve().parents[1] / "src")
SIM = ["sim", "--setting", "sync", "--alg", "lsh2", "--N", "64", "--n1", "15", "--n2", "15",
       "--experiments", "20", "--slots", "300", "--threads", "1"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_range():
    assert parse_range("1:15") == list(range(1, 16))
    assert parse_range("5:15:5") == [5, 10, 15]


def test_sweep_row_count(capsys):
    code, out, err = run(capsys, *SIM, "--n12-sweep", "1:15", "--seed", "42")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 16
    manifest = json.loads(err.split("manifest: ", 1)[1])
    assert manifest["seed"] == 42 and manifest["config"]["n12"] == list(range(1, 16))


def test_same_flags_same_bytes(capsys):
    a = run(capsys, *SIM, "--n12", "5", "--alg", "random,lsh4:20:0.75")[1]
    b = run(capsys, *SIM, "--n12", "5", "--alg", "random,lsh4:20:0.75")[1]
    assert a == b and len(a.splitlines()) == 4


def test_threads_do_not_change_output(capsys):
    base = [a for a in SIM if a not in ("--threads", "1")]
    a = run(capsys, *base, "--n12", "5", "--threads", "1")[1]
    b = run(capsys, *base, "--n12", "5", "--threads", "2")[1]
    assert a == b


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("RENDEZVOUS_SEED", "17")
    env_out = run(capsys, *SIM, "--n12", "4", "--alg", "random")[1]
    flag_out = run(capsys, *SIM, "--n12", "4", "--alg", "random", "--seed", "17")[1]
    monkeypatch.delenv("RENDEZVOUS_SEED")
    zero_out = run(capsys, *SIM, "--n12", "4", "--alg", "random")[1]
    assert env_out == flag_out != zero_out


def test_async_row(capsys):
    code, out, _ = run(capsys, "sim", "--setting", "async", "--alg", "lsh3", "--N", "256", "--n1", "60",
                       "--n2", "60", "--n12", "60", "--experiments", "5", "--slots", "500", "--threads", "1")
    row = dict(zip(CSV_COLUMNS, out.splitlines()[1].split(",")))
    assert code == 0
    assert (row["setting"], row["algorithm"], row["jaccard"]) == ("async", "lsh3", "1.000000")
    assert float(row["theory_ettr"]) == pytest.approx(30.5)


def test_bare_lsh4_expands_over_p(capsys):
    out = run(capsys, *SIM, "--n12", "5", "--alg", "lsh4", "--t0", "10", "--p", "0.5,0.75")[1]
    algs = [line.split(",")[1] for line in out.splitlines()[1:]]
    assert algs == ["lsh2", "lsh4:10:0.5", "lsh4:10:0.75"]


def test_json_format(capsys):
    out = run(capsys, *SIM, "--n12", "15", "--format", "json")[1]
    (row,) = json.loads(out)
    assert row["ettr_mean"] == 1.0 and row["algorithm"] == "lsh2"


@pytest.mark.parametrize("n12,needle", [("2", "exceeds N"), ("16", "min(n1, n2)"), ("0", "n12")])
def test_infeasible_exit_3(capsys, n12, needle):
    code, out, err = run(capsys, "sim", "--N", "20", "--n1", "15", "--n2", "15", "--n12", n12)
    assert code == 3 and out == ""
    assert needle in err


@pytest.mark.parametrize(
    "argv",
    [
        ["sim", "--N", "64", "--n1", "15", "--n2", "15"],
        ["sim", "--N", "64", "--n1", "15", "--n2", "15", "--n12", "5", "--alg", "bogus"],
        ["sim", "--N", "64", "--n1", "15", "--n2", "15", "--n12", "5", "--n12-sweep", "1"],
        ["sim", "--N", "8", "--n1", "3", "--n2", "3", "--n12", "1", "--alg", "lsh4:9:0.5"],
        ["theory", "--profile", "1,2"],
    ],
)
def test_usage_exit_2(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_argparse_usage_exit_2(capsys):
    with pytest.raises(SystemExit) as info:
        main(["sim", "--N", "x"])
    assert info.value.code == 2


def test_theory_rows(capsys):
    code, out, _ = run(capsys, "theory", "--profile", "15,15,5", "--profile", "60,60,60")
    lines = out.splitlines()
    assert code == 0 and lines[0] == ",".join(THEORY_COLUMNS)
    r1 = dict(zip(THEORY_COLUMNS, lines[1].split(",")))
    r2 = dict(zip(THEORY_COLUMNS, lines[2].split(",")))
    assert float(r1["jaccard"]) == 0.2 and float(r1["random_ettr"]) == 45
    assert float(r2["lsh3_approx_prob"]) == pytest.approx(2 / 61, abs=1e-6)


def test_theory_sweep(capsys):
    out = run(capsys, "theory", "--n1", "60", "--n2", "60", "--n12-sweep", "10:60:10")[1]
    assert len(out.splitlines()) == 7


def test_theory_empty_grid(capsys):
    code, out, _ = run(capsys, "theory")
    assert code == 0 and out == ",".join(THEORY_COLUMNS) + "\n"


def test_theory_invalid_profile(capsys):
    assert run(capsys, "theory", "--profile", "3,3,5")[0] != 0


def test_oracle_pass(capsys):
    code, out, _ = run(capsys, "oracle", "--N", "5", "--c1", "0,1", "--c2", "1,2")
    assert code == 0
    assert out.splitlines()[0] == "exact=1/3 jaccard=1/3 PASS"
    assert "montecarlo=" in out and "FAIL" not in out


def test_oracle_identical_sets(capsys):
    out = run(capsys, "oracle", "--N", "4", "--c1", "1,3", "--c2", "1,3")[1]
    assert out.startswith("exact=1 jaccard=1 PASS")


def test_oracle_lsh3(capsys):
    code, out, _ = run(capsys, "oracle", "--N", "6", "--c1", "0,1,2", "--c2", "1,2,3", "--alg", "lsh3")
    assert code == 0 and "exact=41/180" in out


def test_oracle_guard(capsys):
    code, _, err = run(capsys, "oracle", "--N", "12", "--c1", "0,1", "--c2", "1,2")
    assert code == 4 and "N <= 8" in err


def test_oracle_disjoint(capsys):
    assert run(capsys, "oracle", "--N", "4", "--c1", "0", "--c2", "1")[0] == 3


def test_manifest_and_replay(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(SIM + ["--n12-sweep", "3:9:3", "--alg", "random,lsh", "--out", str(out)])
    manifest = tmp_path / "sweep.csv.manifest.json"
    assert code == 0 and manifest.exists()
    doc = json.loads(manifest.read_text())
    assert {"version", "seed", "config", "wall_clock_seconds", "argv"} <= doc.keys()
    again = tmp_path / "again.csv"
    assert main(["replay", str(manifest), "--out", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()
    capsys.readouterr()


def test_replay_detects_tampering(capsys, tmp_path):
    out = tmp_path / "t.csv"
    main(["theory", "--profile", "15,15,5", "--out", str(out)])
    manifest = tmp_path / "t.csv.manifest.json"
    doc = json.loads(manifest.read_text())
    doc["output_sha256"] = "0" * 64
    manifest.write_text(json.dumps(doc))
    assert main(["replay", str(manifest)]) == 1
    capsys.readouterr()


def test_module_entry_point():
    env = dict(os.environ, PYTHONPATH=SRC)
    proc = subprocess.run([sys.executable, "-m", "lshrendezvous", "oracle", "--N", "9", "--c1", "0", "--c2", "0"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 4
