import csv
import io
import json
import math

import pytest

from tailkit import bounds as B
from tailkit.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    ExperimentRow,
    MCOutOfReach,
    SandwichViolation,
    Truth,
    build_instances,
    parse_graph,
    rate_function_trend,
    run_experiment,
    run_trend,
    sandwich_problems,
)
from tailkit.instances import complete, path, single_edge


def _cfg(**kw):
    base = {"instance": {"kind": "subgraph", "H": "K3", "n": 5, "p": [0.3, 0.7]},
            "eps": [0.1, 0.5, 1.0], "figures": False}
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_parse_graph_shorthands():
    assert parse_graph("K3") == complete(2, 3)
    assert parse_graph("P3") == path(2)
    assert parse_graph("edge") == single_edge(2)
    assert parse_graph("C4").e == 4
    assert parse_graph({"k": 2, "v": 3, "edges": [[0, 1]]}).e == 1


def test_config_validation():
    with pytest.raises(ValueError):
        _cfg(eps=[1.5])
    with pytest.raises(ValueError):
        _cfg(bounds=["nope"])
    with pytest.raises(ValueError):
        _cfg(truth={"mode": "guess"})
    with pytest.raises(ValueError):
        _cfg(truth={"mode": "mc"})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"instance": {"kind": "ap"}, "colour": 1})


def test_build_instances_grid_and_power():
    assert len(build_instances({"kind": "subgraph", "H": "K3", "n": [4, 5], "p": [0.1, 0.2, 0.3]})) == 6
    (inst,) = build_instances({"kind": "ap", "k": 3, "n": 16, "p_power": -0.5})
    assert inst.p == pytest.approx(0.25)


def test_empty_eps_grid():
    res = run_experiment(_cfg(eps=[]))
    assert res.rows == []


def test_run_writes_files_and_is_deterministic(tmp_path):
    cfg = _cfg(bounds=["janson", "harris", "lt2", "lt4", "rsize", "turan"])
    a = run_experiment(cfg, output=str(tmp_path / "a"))
    b = run_experiment(cfg, output=str(tmp_path / "b"))
    ta = (tmp_path / "a.csv").read_bytes()
    assert ta == (tmp_path / "b.csv").read_bytes()
    assert "figure" not in a.files
    rows = list(csv.DictReader(io.StringIO(ta.decode())))
    assert len(rows) == 6 and list(rows[0]) == list(CSV_COLUMNS)
    assert all(r["schema_version"] == "1" for r in rows)
    data = json.loads((tmp_path / "a.json").read_text())
    assert len(data["rows"]) == 6


def test_figure_written(tmp_path):
    res = run_experiment(_cfg(figures=True), output=str(tmp_path / "f"))
    assert (tmp_path / "f.png").stat().st_size > 0
    assert res.files["figure"].endswith(".png")


def test_mc_run_on_progressions():
    cfg = ExperimentConfig.from_dict({
        "instance": {"kind": "ap", "k": 3, "n": 18, "p": 0.5},
        "eps": [0.25, 0.5, 1.0],
        "truth": {"mode": "mc", "samples": 20000, "seed": 3},
        "figures": False})
    res = run_experiment(cfg)
    assert len(res.rows) == 3
    assert all(r.truth.mode == "mc" and "tail_le" in r.truth.ci for r in res.rows)
    again = run_experiment(cfg)
    assert [r.truth.tail_le for r in res.rows] == [r.truth.tail_le for r in again.rows]


def _row(truth, bound):
    return ExperimentRow("x", "family", None, None, 0.5, truth, {}, {bound.name: bound}, {})


def test_sandwich_detection_exact():
    t = Truth("exact", 0.1, 0.05, 0.01)
    too_high = B.BoundResult("fake", math.log(0.2), True, B.LOWER, [])
    assert sandwich_problems(_row(t, too_high))
    fine = B.BoundResult("fake", math.log(0.09), True, B.LOWER, [])
    assert not sandwich_problems(_row(t, fine))
    inapplicable = B.BoundResult("fake", math.log(0.2), False, B.LOWER, [])
    assert not sandwich_problems(_row(t, inapplicable))
    upper_bad = B.BoundResult("fake", math.log(0.05), True, B.UPPER, [])
    assert sandwich_problems(_row(t, upper_bad))


def test_sandwich_detection_mc():
    t = Truth("mc", 0.1, 0.1, 0.01, {"tail_le": (0.09, 0.11, 0.005)})
    assert not sandwich_problems(_row(t, B.BoundResult("f", math.log(0.11), True, B.LOWER, [])))
    assert sandwich_problems(_row(t, B.BoundResult("f", math.log(0.2), True, B.LOWER, [])))


def test_violation_raised(monkeypatch):
    import tailkit.harness as H

    def bad(inst, eps, stats, names):
        return {"fake": B.BoundResult("fake", 0.0, True, B.LOWER, [])}

    monkeypatch.setattr(H, "evaluate_bounds", bad)
    with pytest.raises(SandwichViolation):
        run_experiment(_cfg(eps=[0.5]))


def test_trend_single_edge(tmp_path):
    cfg = {"instance": {"kind": "subgraph", "H": "edge", "n": [5, 6, 7], "p": 0.5},
           "trend": {"eps": 0.5}, "figures": True}
    rep = run_trend(cfg, output=str(tmp_path / "t"))
    assert len(rep.rows) == 3 and all(r.source == "exact" for r in rep.rows)
    assert rep.within["janson"] is True
    assert (tmp_path / "t_trend.json").exists() and (tmp_path / "t_trend.png").exists()


def test_trend_refuses_below_mc_floor():
    with pytest.raises(MCOutOfReach):
        rate_function_trend({"kind": "subgraph", "H": "edge", "n": 30, "p": 0.5}, 1.0,
                            {"mode": "mc", "samples": 1000, "seed": 0})
    with pytest.raises(ValueError):
        rate_function_trend({"kind": "subgraph", "H": "edge", "n": 5, "p": 0.5}, 0.0)
