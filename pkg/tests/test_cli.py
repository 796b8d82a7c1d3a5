import json
import subprocess
import sys

import pytest

from twoweight import deserialize, random_instance, serialize
from twoweight.cli import main


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def instance_file(tmp_path):
    def write(inst, name="inst.json"):
        path = tmp_path / name
        path.write_text(serialize(inst))
        return path
    return write


def test_gen_writes_instance(tmp_path, capsys):
    out = tmp_path / "a.json"
    code, stdout, _ = run(["gen", "--seed", 1, "--branching", 2, "--depth", 3, "--out", out], capsys)
    assert code == 0
    assert "leaves=8" in stdout
    assert deserialize(out.read_text()).lattice.n_leaves == 8


def test_gen_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["gen", "--seed", 4, "--depth", 3, "--out", path], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_to_stdout(capsys):
    code, out, err = run(["gen", "--seed", 2, "--depth", 2], capsys)
    assert code == 0 and "cells=" in err
    assert deserialize(out).lattice.n_leaves == 4


@pytest.mark.parametrize("argv", [["gen", "--depth", 0], ["gen", "--branching", 1],
                                  ["bogus"], ["cantor", "--depths", "4,x"]])
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_verify_zero_alpha_instance(instance_file, capsys):
    path = instance_file(random_instance(3, depth=3, p=3.0, q=1.0, alpha_zero_fraction=1.0))
    code, out, _ = run(["verify", path], capsys)
    assert code == 0
    assert json.loads(out)["all_hold"]


def test_verify_batch_chain(capsys):
    code, out, _ = run(["verify", "--batch", 200, "--p", 1.5, "--q", 2, "--f-samples", 3,
                        "--restarts", 2], capsys)
    doc = json.loads(out)
    assert code == 0
    chain = next(c for c in doc["checks"] if c["name"] == "chain")
    assert chain["holds"] and chain["count"] > 0


def test_verify_rejects_corrupted_instance(tmp_path, capsys):
    doc = json.loads(serialize(random_instance(1)))
    doc["mu"][next(iter(doc["mu"]))] = "-1.0"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(["verify", path], capsys)
    assert code == 2 and "mu/" in err


def test_verify_missing_file(tmp_path, capsys):
    assert run(["verify", tmp_path / "nope.json"], capsys)[0] == 2


def test_verify_reports_violation(instance_file, capsys, monkeypatch):
    from twoweight import suite

    def broken(instance, f, rtol=0.0):
        return 2.0, 1.0, False

    monkeypatch.setattr(suite, "doob_check", broken)
    code, out, err = run(["verify", instance_file(random_instance(5))], capsys)
    assert code == 3
    assert "FAILED doob" in err


def test_norm_exact_and_ascent(instance_file, capsys):
    path = instance_file(random_instance(21, depth=2, p=2.0, q=2.0))
    code, out, _ = run(["norm", path, "--method", "exact"], capsys)
    exact = json.loads(out)
    assert code == 0 and exact["method"] == "exact-quadratic"
    code, out, _ = run(["norm", path, "--restarts", 16], capsys)
    ascent = json.loads(out)
    assert ascent["norm_estimate"] == pytest.approx(exact["norm_estimate"], rel=1e-6)
    assert set(ascent["estimate"]["witness"]) == {str(c) for c in
                                                  random_instance(21, depth=2).lattice.leaves}


def test_norm_exact_needs_p2q2(instance_file, capsys):
    code, _, err = run(["norm", instance_file(random_instance(1)), "--method", "exact"], capsys)
    assert code == 2 and "p = q = 2" in err


def test_cantor_sweep(capsys):
    code, out, err = run(["cantor", "--depths", "4,8,16,32,64"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("depth,c1")
    lower = [float(line.split(",")[3]) for line in lines[1:]]
    assert all(b > a for a, b in zip(lower, lower[1:]))
    assert "C1 alone insufficient" in err


def test_cantor_materialized_column(capsys):
    code, out, _ = run(["cantor", "--depths", "4"], capsys)
    assert code == 0 and out.strip().splitlines()[1].split(",")[4] != ""


def test_cantor_rejects_r_out_of_range(capsys):
    code, _, err = run(["cantor", "--r", 0.4], capsys)
    assert code == 2 and "0.5 < r < 1" in err


def test_rubio_command(instance_file, tmp_path, capsys):
    inst = random_instance(29, depth=3, p=3.0, q=1.0)
    fpath = tmp_path / "f.json"
    fpath.write_text(json.dumps({str(c): 1.0 + i for i, c in enumerate(inst.lattice.leaves)}))
    code, out, _ = run(["rubio", instance_file(inst), fpath], capsys)
    doc = json.loads(out)
    assert code == 0
    assert doc["norm_ratio"] <= doc["norm_ratio_bound"]
    assert doc["a1_constant"] <= doc["a1_bound"] * (1 + 1e-10)


def test_rubio_needs_q_below_p(instance_file, tmp_path, capsys):
    fpath = tmp_path / "f.json"
    fpath.write_text("{}")
    code, _, _ = run(["rubio", instance_file(random_instance(1, p=2.0, q=2.0)), fpath], capsys)
    assert code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "twoweight", "cantor", "--depths", "4,8"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("depth,")
