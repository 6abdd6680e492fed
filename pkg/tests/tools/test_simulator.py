import json

import numpy as np
import pytest

from erasurecast.tools.channel import BroadcastChannel, ReplayChannel
from erasurecast.tools.experiment import run_experiment, run_state
from erasurecast.tools.simulator import (
    RESULT_COLUMNS,
    SimConfig,
    SimState,
    run_network_coding,
    run_systematic,
    run_two_user_fallback,
    stopping_condition_holds,
)
from erasurecast.utils import mask_of
from erasurecast.utils.checks import RejectedInputException

from tests.helpers import erasure_rows


def _config(**kwargs):
    defaults = dict(n_symbols=2, eps=(0.3, 0.4, 0.5), d=(0.0, 0.0, 0.0), check_invariants=True)
    defaults.update(kwargs)
    return SimConfig(**defaults)


###############################################################################
# Config.
###############################################################################


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__config_save_load(tmp_path):
    cfg = _config(seed=5, tail_scheme="preprocess_coding", builder=1)
    assert SimConfig.load(cfg.save()) == cfg
    path = str(tmp_path / "cfg.json")
    cfg.save_json(path)
    assert SimConfig.load_json(path) == cfg
    assert cfg.replace(seed=6).seed == 6


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__config_defaults():
    cfg = SimConfig.load({"n_symbols": 10, "eps": [0.1, 0.2, 0.3], "d": [0.0, 0.1, 0.2]})
    assert cfg.seed == 0
    assert cfg.tail_scheme == "chaining"
    assert cfg.chaining_restricted
    assert cfg.event_handler
    assert cfg.eps == (0.1, 0.2, 0.3)


@pytest.mark.fast
@pytest.mark.precommit
@pytest.mark.parametrize(
    "state",
    [
        {"n_symbols": 10, "eps": [0.1, 0.2, 0.3], "d": [0.0, 0.1, 0.2], "colour": "red"},
        {"n_symbols": 10, "eps": [0.1, 0.2, 0.3]},
        {"n_symbols": 0, "eps": [0.1, 0.2, 0.3], "d": [0.0, 0.1, 0.2]},
        {"n_symbols": 1.5, "eps": [0.1, 0.2, 0.3], "d": [0.0, 0.1, 0.2]},
        {"n_symbols": 10, "eps": [0.1, 1.0, 0.3], "d": [0.0, 0.1, 0.2]},
        {"n_symbols": 10, "eps": [0.1, 0.2, 0.3], "d": [0.0, 1.1, 0.2]},
        {"n_symbols": 10, "eps": [0.1, 0.2, 0.3], "d": [0.0, 0.1, 0.2], "seed": -1},
        {"n_symbols": 10, "eps": [0.1, 0.2, 0.3], "d": [0.0, 0.1, 0.2], "builder": 3},
    ],
)
def test_fast__config_rejects(state):
    with pytest.raises(RejectedInputException):
        SimConfig.load(state)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__config_rejects_invalid_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(RejectedInputException):
        SimConfig.load_json(str(path))
    path.write_text(json.dumps([1, 2, 3]))
    with pytest.raises(RejectedInputException):
        SimConfig.load_json(str(path))


###############################################################################
# Scripted runs.
###############################################################################


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__systematic_then_pairing():
    # x0 reaches user 1 only, x1 reaches users 2 and 3; x1 + x0 then serves
    # everyone in one slot.
    cfg = _config(trace=True)
    channel = ReplayChannel(erasure_rows(["011", "100", "000"]))
    state = run_state(cfg, channel)
    result = state.result()

    assert result.phase_slots == {
        "systematic": 2,
        "network_coding": 1,
        "fallback": 0,
        "tail": 0,
    }
    assert result.latency == pytest.approx(1.5)
    assert result.pairing_slots == (1, 0, 0)
    assert result.triple_slots == 0
    assert result.t_hat == pytest.approx((1.0, 0.5, 0.0, 0.0))
    assert result.uncoded_latency == pytest.approx(1.5)
    assert [u["reconstructed"] for u in result.per_user] == [2, 2, 2]
    assert [u["satisfied_slot"] for u in result.per_user] == [3, 3, 3]
    assert result.tail_scheme_used is None
    assert result.trace == (
        "1,systematic,0,1,1,x0",
        "2,systematic,1,0,0,x1",
        "3,network_coding,0,0,0,x1+x0",
    )


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__systematic_repeats_erased_symbols():
    cfg = _config(n_symbols=1, trace=True)
    channel = ReplayChannel(erasure_rows(["111", "111", "000"]))
    result = run_experiment(cfg, channel)
    assert result.phase_slots["systematic"] == 3
    assert result.latency == 3.0
    assert result.trace == (
        "1,systematic,1,1,1,x0",
        "2,systematic,1,1,1,x0",
        "3,systematic,0,0,0,x0",
    )


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__triple_combination():
    # Each of x0, x1, x2 reaches exactly two users; x0 + x1 + x2 then
    # completes all three.
    cfg = _config(n_symbols=3)
    channel = ReplayChannel(erasure_rows(["100", "010", "001", "000"]))
    result = run_experiment(cfg, channel)
    assert result.pairing_slots == (0, 0, 0)
    assert result.triple_slots == 1
    assert result.latency == pytest.approx(4.0 / 3.0)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__user_without_demand_goes_to_fallback():
    cfg = _config(d=(1.0, 0.0, 0.0))
    channel = ReplayChannel(erasure_rows(["000", "000"]))
    result = run_experiment(cfg, channel)
    assert result.phase_slots["systematic"] == 0
    assert result.phase_slots["fallback"] == 2
    assert result.per_user[0]["discarded"] == 2
    assert result.per_user[0]["distortion"] == 1.0
    assert result.per_user[0]["satisfied_slot"] == 0
    assert [u["reconstructed"] for u in result.per_user] == [0, 2, 2]


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__event_hands_over_to_fallback():
    # User 1 needs one symbol and gets it in the first slot.
    cfg = _config(n_symbols=2, d=(0.5, 0.0, 0.0))
    channel = ReplayChannel(erasure_rows(["011", "000", "000"]))
    state = SimState(cfg, channel)
    run_systematic(cfg, state)
    assert state.phase_slots["systematic"] == 1
    assert state.queues.pending_events() == [0]
    # x0 waits for users 2 and 3, x1 is unsent.
    assert list(state.queues.queue(mask_of([1, 2]))) == [0]
    assert list(state.queues.queue(0b111)) == [1]

    run_two_user_fallback(cfg, state, 0)
    assert state.queues.all_satisfied()
    assert state.phase_slots["fallback"] == 2


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__fallback_rejects_unsatisfied_user():
    cfg = _config()
    state = SimState(cfg, ReplayChannel(erasure_rows(["000"])))
    with pytest.raises(RejectedInputException):
        run_two_user_fallback(cfg, state, 0)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__network_coding_stopping_condition():
    cfg = _config(n_symbols=4, event_handler=False)
    channel = BroadcastChannel(cfg.eps, seed=3)
    state = SimState(cfg, channel)
    run_systematic(cfg, state)
    run_network_coding(cfg, state)
    assert stopping_condition_holds(state.queues)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__result_row():
    cfg = _config(n_symbols=50, d=(0.09, 0.16, 0.25), seed=2)
    result = run_experiment(cfg)
    row = result.to_row()
    assert set(row) == set(RESULT_COLUMNS)
    assert row["N"] == 50
    assert row["w_plus"] == pytest.approx(1.5)
    assert row["slots_systematic"] + row["slots_nc"] + row["slots_tail"] == result.total_slots
    assert row["latency"] == pytest.approx(result.total_slots / 50)
    for u in range(3):
        assert row[f"dist{u + 1}"] <= cfg.d[u] + 1e-9


###############################################################################
# Random runs.
###############################################################################


@pytest.mark.fast
@pytest.mark.precommit
@pytest.mark.parametrize("seed", [0, 1, 2, 3])
@pytest.mark.parametrize(
    "eps,tail_scheme",
    [
        ((0.3, 0.4, 0.5), "chaining"),
        ((0.3, 0.4, 0.8), "chaining"),
        ((0.1, 0.2, 0.6), "preprocess_coding"),
        ((0.3, 0.4, 0.9), "preprocess_coding"),
    ],
)
def test_fast__runs_satisfy_everyone(seed, eps, tail_scheme):
    d = tuple(e * e for e in eps)
    cfg = SimConfig(
        n_symbols=400,
        eps=eps,
        d=d,
        seed=seed,
        tail_scheme=tail_scheme,
        check_invariants=True,
    )
    result = run_experiment(cfg)
    for u in range(3):
        assert result.per_user[u]["distortion"] <= d[u] + 1e-9
    assert result.total_slots == round(result.latency * 400)
    assert result.latency > 0


@pytest.mark.fast
@pytest.mark.precommit
@pytest.mark.parametrize("restricted", [True, False])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fast__runs_without_event_handler(seed, restricted):
    cfg = SimConfig(
        n_symbols=400,
        eps=(0.1, 0.2, 0.6),
        d=(0.01, 0.04, 0.36),
        seed=seed,
        event_handler=False,
        chaining_restricted=restricted,
        builder=0,
        check_invariants=True,
    )
    result = run_experiment(cfg)
    for u in range(3):
        assert result.per_user[u]["distortion"] <= cfg.d[u] + 1e-9


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__runs_are_deterministic():
    cfg = SimConfig(n_symbols=300, eps=(0.3, 0.4, 0.6), d=(0.09, 0.16, 0.36), seed=11)
    assert run_experiment(cfg).to_row() == run_experiment(cfg).to_row()


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__recorded_run_replays():
    cfg = SimConfig(n_symbols=200, eps=(0.3, 0.4, 0.5), d=(0.09, 0.16, 0.25), seed=4)
    channel = BroadcastChannel(cfg.eps, cfg.seed, record=True)
    first = run_experiment(cfg, channel)
    replay = run_experiment(cfg, ReplayChannel(channel.recorded()))
    assert replay.to_row() == first.to_row()


@pytest.mark.precommit
@pytest.mark.slow
def test_slow__uncoded_slots_track_t_star():
    from erasurecast.analysis.uncoded import solve_uncoded_lp

    for eps3 in (0.5, 0.6, 0.7, 0.8):
        eps = (0.3, 0.4, eps3)
        cfg = SimConfig(
            n_symbols=10**5,
            eps=eps,
            d=(0.0, 0.0, 0.0),
            event_handler=False,
        )
        measured = np.mean(
            [run_experiment(cfg.replace(seed=s)).uncoded_latency for s in range(20)]
        )
        assert measured == pytest.approx(solve_uncoded_lp(eps).t_star, rel=0.02)

