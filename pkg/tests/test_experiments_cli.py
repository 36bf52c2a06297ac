import json

import numpy as np
import pytest

from mfrecon import io
from mfrecon.cli import main
from mfrecon.config import make_config
from mfrecon.experiments import run_experiment_1, run_experiment_2, run_experiment_3
from mfrecon.graph import read_graph

SMALL = {"n": 60, "p_step": 4, "p_max": 40}


def test_exp1_small(tmp_path):
    cfg = make_config("exp1", "smoke", SMALL)
    res = run_experiment_1(cfg, tmp_path)
    assert set(res.p_c) == {(0.5, 1e-9), (0.2, 1e-9)}
    header, rows = io.read_csv(tmp_path / "exp1_mcc.csv")
    assert header == ["eps", "p", "max_out_degree", "P", "P_over_N", "tau", "mcc"]
    assert len(rows) == 2 * len(cfg.p_grid())
    echo = io.read_comment_config(tmp_path / "exp1_pc.csv")
    assert echo["config"]["n"] == 60 and echo["seeds"]["master"] == 0
    assert "workers" not in echo["config"]


def test_exp2_small(tmp_path):
    cfg = make_config("exp2", "smoke", {"n": 60, "p_step": 3, "eps_values": [0.2, 0.6]})
    res = run_experiment_2(cfg, tmp_path)
    assert {r[4] for r in res.table} == {1e-9, 1e-10}
    assert len(res.table) == 2 * 2 * 2
    report = io.read_json(tmp_path / "exp2_report.json")
    assert set(report["checks"]) == {"monotone_in_density", "tighter_threshold_needs_more"}


def test_exp3_small(tmp_path):
    cfg = make_config("exp3", "smoke", {"n": 40, "horizon": 3})
    res = run_experiment_3(cfg, tmp_path)
    assert sorted(res.mse) == [1, 2, 3]
    assert res.checks == {}
    _, rows = io.read_csv(tmp_path / "exp3_cumulative_mcc.csv")
    assert [int(r[0]) for r in rows] == [1, 2, 3]
    # recovered t = 0 is the known pinch
    assert np.array_equal(res.recovered[0], res.states[0])


@pytest.mark.parametrize("runner,exp,over", [
    (run_experiment_1, "exp1", SMALL),
    (run_experiment_2, "exp2", {"n": 60, "p_step": 3, "eps_values": [0.2, 0.6]}),
    (run_experiment_3, "exp3", {"n": 40, "horizon": 3}),
])
def test_outputs_identical_across_workers(tmp_path, runner, exp, over):
    cfg = make_config(exp, "smoke", over)
    runner(cfg, tmp_path / "a", workers=1)
    runner(cfg, tmp_path / "b", workers=4)
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_cli_pipeline(tmp_path, capsys):
    d = tmp_path
    assert main(["gen-graph", "--n", "20", "--p", "0.1", "--seed", "2", "--out", str(d / "g.txt")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 20
    assert main(["simulate", "--graph", str(d / "g.txt"), "--T", "2", "--out", str(d / "x.csv")]) == 0
    assert main(["measure", "--states", str(d / "x.csv"), "--P", "19", "--skip-initial",
                 "--phi-out", str(d / "phi.csv"), "--out", str(d / "y.csv")]) == 0
    assert main(["recover", "--phi", str(d / "phi.csv"), "--meanfields", str(d / "y.csv"),
                 "--out", str(d / "rec.csv")]) == 0
    assert (d / "rec_support.csv").exists() and (d / "rec_diagnostics.json").exists()
    assert main(["topology", "--supports", str(d / "rec_support.csv"), "--n", "20",
                 "--truth", str(d / "g.txt"), "--out", str(d / "ghat.txt")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["mcc"] == 1.0
    assert read_graph(d / "ghat.txt") == read_graph(d / "g.txt")
    assert main(["fit-dynamics", "--states", str(d / "x.csv"), "--library", "custom",
                 "--system", str(d / "x.csv.json"), "--T", "2", "--out", str(d / "c.csv")]) == 0
    _, rows = io.read_csv(d / "c.csv")
    assert rows and all(len(r) == 3 for r in rows)
    assert main(["certify", "--phi", str(d / "phi.csv"), "--delta", "2", "--out", str(d / "cert.json")]) == 0
    assert io.read_json(d / "cert.json")["wtrc"] is True


def test_cli_linear_fit_and_errors(tmp_path, capsys):
    d = tmp_path
    main(["gen-graph", "--n", "15", "--p", "0.15", "--out", str(d / "g.txt")])
    main(["simulate", "--graph", str(d / "g.txt"), "--dynamics", "linear", "--sign", "1",
          "--T", "3", "--out", str(d / "x.csv")])
    assert main(["fit-dynamics", "--states", str(d / "x.csv"), "--threshold", "0.05", "--out", str(d / "c.csv")]) == 0
    header, rows = io.read_csv(d / "c_matrix.csv")
    assert header[:3] == ["node", "1", "x1"] and len(rows) == 15
    assert main(["fit-dynamics", "--states", str(d / "x.csv"), "--library", "custom", "--out", str(d / "c.csv")]) == 2
    assert main(["measure", "--states", str(d / "x.csv"), "--out", str(d / "y.csv")]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_experiment_and_pc_search(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"schema_version": 1, "n": 40, "horizon": 2}))
    assert main(["exp3", "--config", str(cfg), "--out-dir", str(tmp_path / "e3")]) == 0
    assert (tmp_path / "e3" / "exp3_mse.csv").exists()
    pc = tmp_path / "pc.json"
    pc.write_text(json.dumps({"schema_version": 1, "n": 40, "eps_values": [0.5], "p_step": 5}))
    assert main(["pc-search", "--config", str(pc), "--out-dir", str(tmp_path / "pc")]) == 0
    rep = io.read_json(tmp_path / "pc" / "pc_search.json")
    assert rep["points"][0]["grid"][0][0] == 5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"schema_version": 1, "surprise": True}))
    assert main(["exp1", "--config", str(bad), "--out-dir", str(tmp_path / "x")]) == 2
