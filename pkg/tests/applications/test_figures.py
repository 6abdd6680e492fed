import importlib
import json

import pytest

from erasurecast.applications.figures import (
    AGGREGATE_COLUMNS,
    SWEEP_COLUMNS,
    SweepSpec,
    aggregate,
    create_figure_sweep,
    figures,
    run_sweep,
)
from erasurecast.tools.simulator import SimConfig
from erasurecast.utils.checks import RejectedInputException

# The package re-exports the preset registry under the module's name.
figures_module = importlib.import_module("erasurecast.applications.figures")

BASE = SimConfig(n_symbols=200, eps=(0.3, 0.4, 0.5), d=(0.09, 0.16, 0.25))


def _spec(**kwargs):
    defaults = dict(base=BASE, axis="eps3", values=(0.6, 0.5), seeds=(1, 0))
    defaults.update(kwargs)
    return SweepSpec(**defaults)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__config_at():
    spec = _spec(distortion_rule="quadratic")
    cfg = spec.config_at(0.6, 3)
    assert cfg.eps == (0.3, 0.4, 0.6)
    assert cfg.d == pytest.approx((0.09, 0.16, 0.36))
    assert cfg.seed == 3

    spec = _spec(axis="n_symbols", values=(10, 20))
    assert spec.config_at(20, 0).n_symbols == 20

    spec = _spec(axis="d2", values=(0.5,))
    assert spec.config_at(0.5, 0).d == (0.09, 0.5, 0.25)


@pytest.mark.fast
@pytest.mark.precommit
@pytest.mark.parametrize(
    "kwargs",
    [
        {"axis": "colour"},
        {"comparisons": ("t_star", "oracle")},
        {"distortion_rule": "cubic"},
        {"values": (0.5, 1.0)},
        {"axis": "n_symbols", "values": (10.5,)},
    ],
)
def test_fast__spec_rejects(kwargs):
    with pytest.raises(RejectedInputException):
        _spec(**kwargs)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__spec_save_load(tmp_path):
    spec = _spec(comparisons=("t_star", "boundary"), distortion_rule="quadratic")
    assert SweepSpec.load(spec.save()) == spec
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(spec.save()))
    assert SweepSpec.load_json(str(path)) == spec
    assert spec.replace(seeds=(7,)).seeds == (7,)

    state = spec.save()
    state["extra"] = 1
    with pytest.raises(RejectedInputException):
        SweepSpec.load(state)
    with pytest.raises(RejectedInputException):
        SweepSpec.load({"axis": "eps3", "values": [0.5]})


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__empty_seeds():
    output = run_sweep(_spec(seeds=()))
    assert output.rows == []
    assert output.aggregates == []


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__small_sweep():
    output = run_sweep(_spec(comparisons=("t_star", "w_plus", "boundary")))
    assert [(r["value"], r["seed"]) for r in output.rows] == [
        (0.5, 0),
        (0.5, 1),
        (0.6, 0),
        (0.6, 1),
    ]
    for row in output.rows:
        assert set(row) <= set(SWEEP_COLUMNS)
        assert row["error"] == ""
        assert row["t_star"] > 1.0
        assert row["uncoded_latency"] > 0
    assert output.rows[0]["w_plus"] == pytest.approx(1.5)
    assert output.rows[2]["w_plus"] == pytest.approx(0.75 / 0.4)

    assert len(output.aggregates) == 2
    first = output.aggregates[0]
    assert set(first) <= set(AGGREGATE_COLUMNS)
    assert first["runs"] == 2
    assert first["failures"] == 0
    assert first["latency_mean"] == pytest.approx(
        (output.rows[0]["latency"] + output.rows[1]["latency"]) / 2
    )
    assert first["latency_se"] is not None


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__sweep_rows_do_not_depend_on_workers():
    spec = _spec(values=(0.5,), seeds=(0, 1, 2))
    assert run_sweep(spec, workers=2).rows == run_sweep(spec, workers=1).rows


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__failed_points_become_error_rows(monkeypatch):
    def fail(cfg):
        raise RuntimeError("boom")

    monkeypatch.setattr(figures_module, "run_experiment", fail)
    output = run_sweep(_spec(values=(0.5,), seeds=(0,)))
    (row,) = output.rows
    assert row["error"] == "RuntimeError: boom"
    assert row["seed"] == 0
    assert row["eps3"] == 0.5
    (agg,) = output.aggregates
    assert agg["failures"] == 1
    assert agg["latency_mean"] is None


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__aggregate_single_run():
    rows = [
        {
            "axis": "eps3",
            "value": 0.5,
            "latency": 1.6,
            "uncoded_latency": 1.4,
            "dist1": 0.0,
            "dist2": 0.1,
            "dist3": 0.2,
            "t_star": 1.4,
            "w_plus": 1.5,
            "error": "",
        }
    ]
    (agg,) = aggregate(rows)
    assert agg["latency_mean"] == 1.6
    assert agg["latency_se"] is None
    assert agg["boundary"] is None


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__presets():
    assert set(figures) == {"fig2", "fig3", "fig4", "fig4_latency"}
    spec = create_figure_sweep("fig2", n_symbols=1000, seeds=(0,))
    assert spec.axis == "eps3"
    assert spec.values == (0.5, 0.6, 0.7, 0.8)
    assert not spec.base.event_handler
    assert create_figure_sweep("fig3").base.tail_scheme == "preprocess_coding"
    fig4 = create_figure_sweep("fig4")
    assert fig4.base.builder == 0
    assert "boundary" in fig4.comparisons
    assert not fig4.simulate
    latency = create_figure_sweep("fig4_latency", seeds=(0,))
    assert latency.base.tail_scheme == "chaining"
    assert latency.values == create_figure_sweep("fig3").values
    assert latency.simulate
    with pytest.raises(KeyError):
        create_figure_sweep("fig5")


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__analytic_sweep_runs_nothing(monkeypatch):
    def fail(cfg):
        raise RuntimeError("simulated")

    monkeypatch.setattr(figures_module, "run_experiment", fail)
    spec = _spec(comparisons=("w_plus", "boundary"), seeds=(0,), simulate=False)
    assert SweepSpec.load(spec.save()) == spec
    output = run_sweep(spec)
    assert [row["error"] for row in output.rows] == ["", ""]
    assert all("latency" not in row for row in output.rows)
    assert output.rows[0]["eps3"] == 0.5
    assert output.rows[0]["w_plus"] == pytest.approx(1.5)
    for agg in output.aggregates:
        assert agg["failures"] == 0
        assert agg["latency_mean"] is None
        assert agg["boundary"] is not None


@pytest.mark.application
@pytest.mark.slow
def test_application__fig4_boundary():
    output = run_sweep(create_figure_sweep("fig4"))
    assert len(output.rows) == 5
    assert all(row["error"] == "" for row in output.rows)
    assert all(agg["boundary"] is not None for agg in output.aggregates)


@pytest.mark.application
@pytest.mark.slow
def test_application__fig4_latency_small():
    spec = create_figure_sweep("fig4_latency", n_symbols=5000, seeds=(0, 1))
    output = run_sweep(spec.replace(values=(0.9, 0.95)), workers=2)
    assert len(output.rows) == 4
    assert all(row["error"] == "" for row in output.rows)
    assert all(row["tail_scheme"].startswith("chaining") for row in output.rows)
