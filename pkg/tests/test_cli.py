import csv
import json

import pytest

from rtsched.cli import ExperimentConfig, main
from rtsched.engine import SimMetrics

EX1 = {
    "num_apps": 2,
    "num_workers": 4,
    "gen_prob": [[1, 1, 0, 0], [0, 1, 1, 1]],
    "completion": {"constant": [[0.8] * 4, [0.9] * 4]},
    "requirement": [0.48, 0.5],
}
SINGLE = {"num_apps": 1, "num_workers": 1, "gen_prob": [[0.5]], "completion": {"constant": [[0.9]]}}


@pytest.fixture
def write(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(doc if isinstance(doc, str) else json.dumps(doc, indent=1))
        return str(path)
    return _write


def test_simulate_minimal(write, tmp_path):
    out = tmp_path / "m.json"
    assert main(["simulate", "--config", write("c.json", SINGLE), "--frames", "10", "--out", str(out)]) == 0
    metrics = SimMetrics.from_dict(json.loads(out.read_text()))
    assert metrics.frames == 10


@pytest.mark.parametrize("policy, app", [("exact", 1), ("greedy", 0)])
def test_worked_example_decision_log(write, tmp_path, capsys, policy, app):
    out = tmp_path / "m.json"
    code = main(["simulate", "--config", write("ex1.json", EX1), "--frames", "1", "--seed", "3",
                 "--policy", policy, "--trace", "--out", str(out)])
    assert code == 0
    assert f"frame 1: scheduled apps [{app}]" in capsys.readouterr().err
    assert json.loads(out.read_text())["decisions"] == [[app]]


def test_negative_probability_exits_2(write, capsys):
    bad = dict(SINGLE, gen_prob=[[-0.2]])
    assert main(["simulate", "--config", write("bad.json", bad)]) == 2
    err = capsys.readouterr().err
    assert "gen_prob[0][0]" in err and len(err.strip().splitlines()) == 1


def test_parse_error_is_line_anchored(write, capsys):
    path = write("bad.json", '{\n  "num_apps": 1,\n  oops\n}')
    assert main(["simulate", "--config", path]) == 2
    assert f"{path}:3:" in capsys.readouterr().err


def test_unknown_policy_in_config(write, capsys):
    assert main(["simulate", "--config", write("c.json", dict(SINGLE, policy="fifo"))]) == 2
    assert "policy" in capsys.readouterr().err


def test_trace_csv(write, tmp_path):
    trace = tmp_path / "t.csv"
    main(["simulate", "--config", write("c.json", SINGLE), "--frames", "30", "--requirement", "0.3",
          "--trace-csv", str(trace), "--out", str(tmp_path / "m.json")])
    rows = list(csv.reader(trace.open()))
    assert rows[0] == ["frame", "q_0"] and len(rows) == 4


def test_sweep_single_app_boundary(write, tmp_path):
    out = tmp_path / "region.csv"
    assert main(["sweep", "--config", write("c.json", SINGLE), "--out", str(out)]) == 0
    boundary = json.loads((tmp_path / "region.csv.boundary.json").read_text())
    assert abs(boundary["boundary"] - 0.45) <= 0.01
    assert out.read_text().startswith("r_0,fulfilled,min_margin\n")


def test_sweep_grid_output(write, tmp_path):
    cfg = dict(EX1, frames=200, replicates=1, step=0.5)
    del cfg["requirement"]
    out = tmp_path / "g.csv"
    assert main(["sweep", "--config", write("g.json", cfg), "--policy", "greedy", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "r_0,r_1,fulfilled,min_margin" and len(lines) == 10


def test_verify_ratio_default(tmp_path):
    out = tmp_path / "r.json"
    assert main(["verify-ratio", "--frames", "200", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["violations"] == 0
    assert {r["num_workers"] for r in doc["reports"]} == {1, 4, 9, 16}


def test_reduce(write, tmp_path, capsys):
    path = write("inst.txt", "3 3\n1 2\n2 3\n3\n")
    out = tmp_path / "model.json"
    assert main(["reduce", path, "--out", str(out)]) == 0
    assert "packing size 2" in capsys.readouterr().out
    assert json.loads(out.read_text())["num_apps"] == 3


def test_reduce_rejects_empty_set(write):
    assert main(["reduce", write("inst.txt", "3 2\n1 2\n\n")]) == 2


def test_outputs_are_byte_identical(write, tmp_path):
    cfg = write("c.json", dict(EX1, frames=300))
    for k in range(2):
        main(["simulate", "--config", cfg, "--seed", "9", "--out", str(tmp_path / f"m{k}.json")])
    assert (tmp_path / "m0.json").read_bytes() == (tmp_path / "m1.json").read_bytes()


def test_experiment_config_round_trip(write):
    from rtsched.model import load_json

    cfg = ExperimentConfig.from_dict(load_json(write("c.json", dict(EX1, policy="greedy", frames=50))))
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
