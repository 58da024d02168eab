"""End-to-end checks of the command line, including the exit-code contract."""

import csv
import io
import json
import subprocess
import sys
from importlib import resources

import pytest

import oracles
from momentlab.cli import expected_verdict, main

DATA = resources.files("momentlab") / "data"


def data(name):
    return str(DATA / f"{name}.json")


def exit_code(argv):
    """Exit status of main, whether returned or raised by the argument parser."""
    try:
        return main(argv)
    except SystemExit as stop:
        return stop.code


def run(*args):
    proc = subprocess.run([sys.executable, "-m", "momentlab", *args],
                          capture_output=True, text=True, timeout=120)
    return proc.returncode, proc.stdout, proc.stderr


def test_verify_counterexample(tmp_path):
    out = tmp_path / "r3.json"
    assert main(["verify", data("counterexample_r3"), "--r", "3", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    rec = report["records"][0]
    assert rec["verdict"] == "fails" and rec["expected"] == "fails"
    assert rec["delta"]["value"] == float(oracles.R3_DELTA)
    assert rec["counterexample"]["rational"]["delta"] == "-13528549/65536"
    assert report["positivity"]["verdict"] == "certified"
    assert (tmp_path / "r3.json.meta.json").exists()


def test_verify_cauchy_holds(tmp_path):
    out = tmp_path / "c.json"
    assert main(["verify", data("cauchy_n4"), "--r", "0.5,1,1.5,2", "--out", str(out)]) == 0
    records = json.loads(out.read_text())["records"]
    assert [r["verdict"] for r in records] == ["holds"] * 4
    assert all("channels" in r for r in records if r["r"] < 2)
    assert all(r["delta"]["method"] == "exact" for r in records)


def test_verify_default_grid(tmp_path):
    out = tmp_path / "c.json"
    assert main(["verify", data("cauchy_n4"), "--out", str(out)]) == 0
    assert [r["r"] for r in json.loads(out.read_text())["records"]] == [0.25, 0.5, 1, 1.5, 1.9, 2]


def test_verify_broken(tmp_path, capsys):
    bad = tmp_path / "broken.json"
    bad.write_text('{"kind": "cauchy-discrete", "params": {"atoms": [1]}}')
    assert main(["verify", str(bad)]) == 2
    assert "SchemaError" in capsys.readouterr().err


def test_verify_unexpected_verdict(tmp_path):
    # X = -Y is not positive-type and violates the inequality at r = 1
    f = tmp_path / "bad.json"
    f.write_text(json.dumps({"kind": "general-discrete",
                             "params": {"atoms": [-1, 1], "weights": [[0, 0.5], [0.5, 0]]},
                             "r": [1]}))
    assert main(["verify", str(f), "--out", str(tmp_path / "o.json")]) == 1
    report = json.loads((tmp_path / "o.json").read_text())
    assert report["positivity"]["verdict"] == "falsified"
    assert not report["all_as_expected"]


def test_verify_negative_remark(tmp_path):
    out = tmp_path / "u.json"
    assert main(["verify", data("uniform_remark"), "--out", str(out)]) == 0
    recs = json.loads(out.read_text())["records"]
    assert [r["verdict"] for r in recs] == ["fails"] * 3
    assert recs[2]["e_minus"]["value"] == "inf"


def test_reports_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["verify", data("smoothed_r3"), "--method", "mc", "--mc-n", "300000", "--seed", "5"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_digest_tracks_model(tmp_path):
    f1, f2, f3 = (tmp_path / n for n in ("1.json", "2.json", "3.json"))
    f1.write_text('{"kind": "two-point", "params": {"r": 3}}')
    f2.write_text('{"params": {"r": 3.0},\n "kind": "two-point"}')
    f3.write_text('{"kind": "two-point", "params": {"r": 4}}')
    digests = []
    for f in (f1, f2, f3):
        out = tmp_path / (f.name + ".out")
        main(["verify", str(f), "--r", "1", "--out", str(out)])
        digests.append(json.loads(out.read_text())["model_digest"])
    assert digests[0] == digests[1] != digests[2]


def test_representation_table(tmp_path):
    out = tmp_path / "rep.csv"
    assert main(["representation", data("cauchy_n4"), "--r", "1", "--n", "10,100,1000",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    gaps = [float(r["gap"]) for r in rows]
    assert gaps[0] > gaps[1] > gaps[2]
    assert float(rows[0]["exact_delta"]) == pytest.approx(oracles.CAUCHY4_DELTA_R1, rel=1e-14)


def test_representation_r2_is_error():
    assert main(["representation", data("cauchy_n4"), "--r", "2", "--n", "10"]) == 2


def test_representation_needs_discrete():
    assert exit_code(["representation", data("uniform_remark"), "--r", "1", "--n", "10"]) == 2


def test_sweep(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--r", "3", "--a", "60:68:5", "--p", "0.004:0.008:5",
                 "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "a,p,delta" and len(rows) > 1
    empty = tmp_path / "e.csv"
    assert main(["sweep", "--r", "1", "--a=-5:100:30", "--p", "0.01:0.99:30",
                 "--out", str(empty)]) == 0
    assert empty.read_text() == "a,p,delta\n"


@pytest.mark.parametrize("argv", [
    ["sweep", "--r", "3", "--a", "1:2:0", "--p", "0.1:0.2:3"],
    ["sweep", "--r", "-1", "--a", "1:2:3", "--p", "0.1:0.2:3"],
    ["sweep", "--r", "3", "--a", "1:2", "--p", "0.1:0.2:3"],
    ["verify"],
    ["frobnicate"],
    ["verify", "x.json", "--method", "magic"],
    ["verify", "x.json", "--mc-n", "0"],
    ["verify", "x.json", "--r", "a,b"],
])
def test_usage_errors(argv):
    assert exit_code(argv) == 2


def test_missing_file():
    assert main(["verify", "/nonexistent/model.json"]) == 2


def test_subprocess_entry_point():
    code, out, err = run("verify", data("counterexample_r3"))
    assert code == 0
    assert json.loads(out)["records"][0]["verdict"] == "fails"
    assert "r=3: fails" in err


def test_expected_policy():
    assert expected_verdict("two-point", 3.0, 3.0) == "fails"
    assert expected_verdict("two-point", 1.0, 3.0) == "holds"
    assert expected_verdict("uniform-remark", -0.5) == "fails"
    assert expected_verdict("cauchy-discrete", 1.9) == "holds"
    assert expected_verdict("cauchy-discrete", 2.5) is None
