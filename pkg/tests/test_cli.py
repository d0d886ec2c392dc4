import json
from importlib import resources

import pytest

from biochip_fva.cli import main

FIXTURE = str(resources.files("biochip_fva").joinpath("fixtures/glucose.json"))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_approx(capsys):
    code, out, _ = run(capsys, "approx", "--ratio", "1:2")
    assert code == 0 and out.startswith("5:11 (error 1/48")


def test_global_flags_after_command(capsys):
    code, out, _ = run(capsys, "approx", "--ratio", "1:9", "--precision", "6")
    assert code == 0 and out.startswith("3:29")


def test_tree(capsys):
    code, out, _ = run(capsys, "tree", "--ratio", "5:11")
    assert code == 0 and "optimal variant" in out
    code, out, _ = run(capsys, "tree", "--ratio", "1:3", "--format", "dot")
    assert out.startswith("digraph")


def test_optimize_text(capsys):
    code, out, _ = run(capsys, "optimize", "--app", FIXTURE)
    assert code == 0
    assert "reuse O2 -> O4" in out and "reuse O3 -> O4" in out
    assert "G\t3\t4\t1\t" in out


def test_optimize_json_and_out_dir(capsys, tmp_path):
    code, out, _ = run(capsys, "optimize", "--app", FIXTURE, "--format", "json", "--out", str(tmp_path))
    doc = json.loads(out)
    assert doc["savings"] == {"G": "1", "R": "4"}
    assert len(doc["lof_edges"]) == 2
    assert {p.name for p in tmp_path.iterdir()} == {"optimized.json", "optimized.dot", "report.tsv"}


def test_no_lof(capsys):
    code, out, _ = run(capsys, "optimize", "--app", FIXTURE, "--no-lof")
    assert code == 0 and "leftover O4" in out and "reuse" not in out


def test_assign_and_dot(capsys):
    code, out, _ = run(capsys, "assign", "--app", FIXTURE)
    assert code == 0 and json.loads(out)["application"]["nodes"]
    code, out, _ = run(capsys, "export-dot", "--app", FIXTURE)
    assert code == 0 and out.startswith("digraph")


def test_bench(capsys):
    code, out, _ = run(capsys, "bench", "--case", "cca", "--mixer", "arbitrary")
    assert code == 0
    assert "60 R" in out and "200 B" in out and "[PAPER" in out


def test_compare(capsys):
    code, out, _ = run(capsys, "compare", "--count", "3", "--seed", "1")
    assert code == 0 and out.count("\n") >= 6


def test_exit_codes(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert run(capsys, "optimize", "--app", str(bad))[0] == 1
    assert run(capsys, "optimize", "--app", str(tmp_path / "missing.json"))[0] == 1
    assert run(capsys, "approx", "--ratio", "x")[0] == 1
    doc = json.loads(open(FIXTURE).read())
    doc["architecture"]["ffu_classes"][0]["mhc"] = "1"
    small = tmp_path / "small.json"
    small.write_text(json.dumps(doc))
    assert run(capsys, "optimize", "--app", str(small))[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["nope"])
    assert exc.value.code == 1
