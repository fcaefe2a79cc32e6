import json

import numpy as np
import pytest

from bclkit.cli import EXIT_INCONSISTENT, EXIT_INVALID, EXIT_OK, main
from bclkit.model import random_triple
from bclkit.numcore import Frame
from bclkit.triplefile import dumps_triple, write_frame


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def rot_file(tmp_path, capsys):
    path = tmp_path / "rot.json"
    assert run(capsys, "named", "t_rot", "--theta", np.pi / 4, "--out", path)[0] == EXIT_OK
    return path


def test_analyze_t_rot(rot_file, capsys):
    code, out, _ = run(capsys, "analyze", rot_file, "--format", "json")
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["defect"]["eigenvalues"] == [-0.707106781187, 0.707106781187]
    assert rep["index"]["value"] == 0
    assert rep["congruence_signature"] == [1, 1, 0]
    assert rep["status"]["ok"]


def test_analyze_t_id(tmp_path, capsys):
    path = tmp_path / "id.json"
    run(capsys, "named", "t_id", "--out", path)
    code, out, _ = run(capsys, "analyze", path, "--format", "json")
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["classification"]["defect_zero"] and rep["classification"]["doubly_commuting"]


def test_analyze_text_and_csv(rot_file, capsys):
    code, out, _ = run(capsys, "analyze", rot_file)
    assert code == EXIT_OK and "index.value" in out
    code, out, _ = run(capsys, "analyze", rot_file, "--format", "csv")
    assert out.startswith("key,value\n")


def test_analyze_non_unitary_exits_2(rot_file, capsys):
    doc = json.loads(rot_file.read_text())
    doc["u"][0][0] = [2.0, 0.0]
    rot_file.write_text(json.dumps(doc))
    code, _, err = run(capsys, "analyze", rot_file)
    assert code == EXIT_INVALID and "NotUnitary" in err


def test_analyze_json_is_deterministic(rot_file, capsys):
    a = run(capsys, "analyze", rot_file, "--format", "json")[1]
    b = run(capsys, "analyze", rot_file, "--format", "json")[1]
    assert a == b


def test_random_is_seeded(capsys):
    a = run(capsys, "random", "--d1", 2, "--d2", 2, "--m", 3, "--p", 1, "--seed", 4)[1]
    b = run(capsys, "random", "--d1", 2, "--d2", 2, "--m", 3, "--p", 1, "--seed", 4)[1]
    c = run(capsys, "random", "--d1", 2, "--d2", 2, "--m", 3, "--p", 1, "--seed", 5)[1]
    assert a == b != c


@pytest.mark.parametrize("twist", ["flip", "random"])
def test_random_then_analyze(tmp_path, capsys, twist):
    path = tmp_path / "r.json"
    code = run(capsys, "random", "--d1", 2, "--d2", 2, "--m", 3, "--p", 1, "--twist", twist, "--out", path)[0]
    assert code == EXIT_OK
    code, out, _ = run(capsys, "analyze", path, "--depth", 3, "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out)["index"]["value"] in (0, 1)


def test_random_infeasible_exits_2(capsys):
    code, _, err = run(capsys, "random", "--d1", 2, "--d2", 2, "--m", 3, "--p", 0)
    assert code == EXIT_INVALID and err


def test_depth_below_two_exits_2(rot_file, capsys):
    assert run(capsys, "analyze", rot_file, "--depth", 1)[0] == EXIT_INVALID


def _corrupted(tmp_path):
    t = random_triple(2, 2, 3, 1, seed=1)
    u = t.u.copy()
    u[[3, 5], :] = 0
    doc = json.loads(dumps_triple(t))
    doc["u"] = [[[float(z.real), float(z.imag)] for z in row] for row in u]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    return path


def test_check_corrupted_file(tmp_path, capsys):
    path = _corrupted(tmp_path)
    assert run(capsys, "check", path, "--no-extras", "--depth", 3)[0] == EXIT_INVALID
    code, out, _ = run(capsys, "check", path, "--unchecked", "--no-extras", "--depth", 3, "--verbose")
    assert code == EXIT_INCONSISTENT
    lines = out.splitlines()
    for label in ("EEE", "AAA"):
        k = next(i for i, line in enumerate(lines) if line.startswith(label))
        assert "FAIL" in lines[k] and "IndexMismatch" in lines[k + 1]


def test_analyze_corrupted_unchecked_exits_3(tmp_path, capsys):
    code, _, err = run(capsys, "analyze", _corrupted(tmp_path), "--unchecked", "--depth", 3)
    assert code == EXIT_INCONSISTENT and "IndexMismatch" in err


def test_check_small_corpus_passes(capsys):
    code, out, _ = run(capsys, "check", "--corpus", 4, "--no-extras", "--depth", 3)
    assert code == EXIT_OK
    assert "WWW" in out and "FAIL" not in out


def test_check_depth_two_warns(rot_file, capsys):
    code, out, _ = run(capsys, "check", rot_file, "--no-extras", "--depth", 2, "--verbose")
    assert code == EXIT_OK
    assert "depth" in out.lower()


def test_reduce(tmp_path, capsys):
    run(capsys, "named", "t_id", "--out", tmp_path / "id.json")
    run(capsys, "named", "t_rot", "--out", tmp_path / "rot.json")
    write_frame(Frame.coordinates(2, [0]), tmp_path / "e1.json")
    code, out, _ = run(capsys, "reduce", tmp_path / "id.json", "--subspace", tmp_path / "e1.json", "--format", "json")
    assert code == EXIT_OK and json.loads(out)["reducing"] is True
    code, out, _ = run(capsys, "reduce", tmp_path / "rot.json", "--subspace", tmp_path / "e1.json", "--format", "json")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["reducing"] is False and rep["oracle_leak"] > 1
    write_frame(Frame.full(3), tmp_path / "big.json")
    assert run(capsys, "reduce", tmp_path / "id.json", "--subspace", tmp_path / "big.json")[0] == EXIT_INVALID


def test_tolerance_from_environment(rot_file, capsys, monkeypatch):
    monkeypatch.setenv("BCL_TOL", "1e-6")
    assert run(capsys, "analyze", rot_file)[0] == EXIT_OK
    monkeypatch.setenv("BCL_TOL", "bogus")
    with pytest.raises(SystemExit):
        main(["analyze", str(rot_file)])
