import csv
import json
import subprocess
import sys

import pytest

from conclust.cli import main, resolve_solver, run_bench
from conclust.model import InputError

from conftest import path_instance, twins_instance


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture
def path4_file(tmp_path):
    return _write(tmp_path / "path4.json", path_instance().to_dict())


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def test_solve_exact_center(tmp_path, path4_file):
    out, rep = tmp_path / "sol.json", tmp_path / "rep.json"
    code = main(["solve", "--objective", "center", "--solver", "exact", "--in", path4_file,
                 "--out", str(out), "--report", str(rep)])
    assert code == 0
    assert _load(out)["value"] == 1
    report = _load(rep)
    assert report["validation"] == [] and report["status"] == "ok" and report["wall_time"] >= 0


def test_solve_msr_twins(tmp_path, capsys):
    src = _write(tmp_path / "twins.json", twins_instance().to_dict())
    assert main(["solve", "--objective", "msr", "--eps", "0.5", "--in", src]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == 0


@pytest.mark.parametrize("solver", ["fpt-center", "fpt-median", "fpt-means", "msd", "msd-unconstrained", "oracle"])
def test_solve_every_solver(tmp_path, path4_file, solver):
    out = tmp_path / "sol.json"
    args = ["solve", "--solver", solver, "--in", path4_file, "--out", str(out)]
    if solver == "oracle":
        args += ["--objective", "median"]
    assert main(args) == 0
    assert _load(out)["value"] >= 0


def test_input_errors(tmp_path, path4_file, capsys):
    assert main(["solve", "--in", str(tmp_path / "missing.json")]) == 1
    assert main(["solve", "--objective", "median", "--solver", "exact", "--in", path4_file]) == 1
    assert main(["solve", "--solver", "msr", "--eps", "0", "--in", path4_file]) == 1
    bad = _write(tmp_path / "bad.json", {"n": 2, "k": 1, "edges": [[0, 1]], "metric": {"coords": [[0], [1, 2]]}})
    assert main(["solve", "--in", bad]) == 1
    assert "error" in capsys.readouterr().err


def test_infeasible_exit(tmp_path):
    data = {"n": 3, "k": 1, "edges": [], "metric": {"coords": [[0], [1], [2]], "norm": "l1"}}
    src = _write(tmp_path / "split.json", data)
    rep = tmp_path / "rep.json"
    assert main(["solve", "--in", src, "--report", str(rep)]) == 2
    assert _load(rep)["status"] == "infeasible"


def test_resolve_solver():
    assert resolve_solver("exact", None) == ("exact-center", "center")
    assert resolve_solver(None, None) == ("exact-center", "center")
    assert resolve_solver(None, "msd") == ("msd", "msd")
    assert resolve_solver("fpt", "means") == ("fpt-means", "means")
    assert resolve_solver("fpt", "msr") == ("msr", "msr")
    with pytest.raises(InputError):
        resolve_solver("msr", "center")
    with pytest.raises(InputError):
        resolve_solver("oracle", None)
    with pytest.raises(InputError):
        resolve_solver("magic", None)


def test_generate_hardness(tmp_path):
    out = tmp_path / "h.json"
    assert main(["generate", "--family", "hardness", "--L", "1", "--formula", "x1", "--out", str(out)]) == 0
    bundle = _load(out)
    assert bundle["instance"]["n"] == 6 and bundle["centers"] == [0, 1]
    assert main(["generate", "--family", "hardness", "--L", "3", "--formula", "x1"]) == 1
    assert main(["generate", "--family", "hardness"]) == 1


def test_tampered_solution(tmp_path, path4_file):
    sol = {"clusters": [[0, 2], [1, 3]], "centers": [0, 1], "objective": "center", "value": 2}
    src = _write(tmp_path / "sol.json", sol)
    rep = tmp_path / "rep.json"
    assert main(["validate", "--in", path4_file, "--solution", src, "--report", str(rep)]) == 2
    assert any("disconnected" in p for p in _load(rep)["solution"])
    assert main(["validate", "--in", path4_file, "--solution", src, "--unconstrained"]) == 0


@pytest.mark.parametrize("family", ["tree", "geometric", "ktree"])
def test_round_trip(tmp_path, family):
    bundle, sol, rep = (str(tmp_path / name) for name in ("b.json", "s.json", "r.json"))
    assert main(["generate", "--family", family, "--n", "8", "--k", "2", "--seed", "3", "--out", bundle]) == 0
    assert main(["solve", "--in", bundle, "--out", sol]) == 0
    assert main(["validate", "--in", bundle, "--solution", sol, "--report", rep]) == 0
    assert _load(rep)["status"] == "ok"


def test_determinism(tmp_path):
    bundle = str(tmp_path / "b.json")
    main(["generate", "--family", "geometric", "--n", "8", "--seed", "7", "--out", bundle])
    outputs = []
    for i, solver in enumerate(["exact-center", "exact-center", "msr", "msr"]):
        out = tmp_path / f"s{i}.json"
        main(["solve", "--solver", solver, "--in", bundle, "--out", str(out)])
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] and outputs[2] == outputs[3]


def test_decompose_and_oracle(tmp_path, capsys):
    bundle = str(tmp_path / "b.json")
    main(["generate", "--family", "ktree", "--n", "7", "--w", "2", "--out", bundle])
    capsys.readouterr()
    assert main(["decompose", "--in", bundle, "--nice"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["width"] <= 2 and out["nice"]["kinds"]
    assert main(["oracle", "--in", bundle, "--objective", "center", "--facilities", "0,1"]) == 0
    assert json.loads(capsys.readouterr().out)["facility_relaxed"]
    assert main(["oracle", "--in", bundle, "--objective", "center", "--max-n", "3"]) == 1
    assert main(["oracle", "--in", bundle, "--objective", "center", "--facilities", "a"]) == 1


def test_bench_csv(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--families", "tree,ktree", "--solvers", "exact-center,fpt-center", "--n", "7",
                 "--trials", "5", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 * 5 * 2
    for row in rows:
        r = float(row["ratio"])
        assert 1 <= r <= 6 if row["solver"] == "fpt-center" else r == 1


def test_bench_parallel_matches_serial():
    strip = lambda rows: [{k: v for k, v in r.items() if k != "time"} for r in rows]
    a = run_bench(["tree"], ["exact-center", "msr"], 7, 2, 3)
    b = run_bench(["tree"], ["exact-center", "msr"], 7, 2, 3, jobs=2)
    assert strip(a) == strip(b)


def test_module_entry_point(path4_file):
    proc = subprocess.run([sys.executable, "-m", "conclust.cli", "solve", "--in", path4_file],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["value"] == 1
    proc = subprocess.run([sys.executable, "-m", "conclust.cli", "solve", "--in", "nope.json"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and proc.stderr
