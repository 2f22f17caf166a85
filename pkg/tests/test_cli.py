import json
import subprocess
import sys

import jsonschema

from coalform.cli import main
from coalform.pipeline import RUN_RESULT_SCHEMA


def test_gen_then_solve(tmp_path, capsys):
    scen = tmp_path / "s.json"
    assert main(["gen", "--n", "25", "--seed", "3", "--out", str(scen)]) == 0
    assert main(["solve", "--scenario", str(scen), "--seed", "1", "--population", "20", "--iterations", "5",
                 "--out", str(tmp_path / "o"), "--format", "json"]) == 0
    doc = json.loads((tmp_path / "o" / "run.json").read_text())
    jsonschema.validate(doc, RUN_RESULT_SCHEMA)
    assert doc["status"] == "ok"


def test_no_feasible_exit_code(capsys):
    code = main(["solve", "--n", "20", "--population", "20", "--iterations", "3", "--max-time", "1e-9"])
    assert code == 2
    assert json.loads(capsys.readouterr().out)["status"] == "no-feasible-coalition"


def test_error_exit_code(tmp_path, capsys):
    assert main(["solve", "--scenario", str(tmp_path / "nope.json")]) == 1
    assert "nope.json" in capsys.readouterr().err
    assert main(["solve"]) == 1


def test_weights_flag_parsed(capsys):
    assert main(["solve", "--n", "15", "--population", "20", "--iterations", "3",
                 "--weights", "0.2,0.4,0.4", "--no-timing"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["provenance"]["config"]["weights"] == [0.2, 0.4, 0.4]
    assert "timing" not in doc


def test_solve_output_reproducible(capsys):
    args = ["solve", "--n", "30", "--seed", "7", "--population", "20", "--iterations", "5", "--no-timing"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_bench_csv(tmp_path):
    assert main(["bench", "--sizes", "10", "--seeds", "0,1", "--iterations", "5", "--population", "20",
                 "--out", str(tmp_path), "--no-timing"]) == 0
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == "schema,algorithm,seed,n,population,metric,value"
    assert {l.split(",")[1] for l in lines[1:]} == {"nsga2", "qmopso", "spea2"}


def test_oracle(capsys):
    assert main(["oracle", "--n", "8", "--seed", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "oracle" and doc["front"]


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "coalform.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "solve" in out.stdout
