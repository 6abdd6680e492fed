import math

import numpy as np
import pytest

from erasurecast.analysis.chaining import (
    DECODED,
    REWARD_NAMES,
    STALLED,
    ChainRoles,
    absorption_split,
    build_chain_mrp,
    chain_tables,
    distortion_boundary,
    expected_run_length,
    expected_run_reward,
    m_lower,
    per_run_rewards,
    simulate_chain_runs,
    sufficiency_check,
)
from erasurecast.utils.checks import RejectedInputException, UnreachableAbsorptionException


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__tables_cover_every_pattern():
    tables = chain_tables()
    assert sorted(tables) == [1, 2, 3, 4]
    for rows in tables.values():
        assert len(rows) == 8
        assert len({row.noise for row in rows}) == 8
        for row in rows:
            assert 1 <= row.next_state <= 6
            assert len(row.rewards) == len(REWARD_NAMES)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__state3_mirrors_state2():
    tables = chain_tables()
    state3 = {row.noise: row for row in tables[3]}
    # State 2 on Z = 010 goes to state 3 with rho_k and rho_E; state 3 on
    # Z = 001 is the mirror image.
    row = state3[(0, 0, 1)]
    assert row.next_state == 2
    assert row.rewards == (1, 0, 1, 0, 0, 0, 0)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__state4_decodes_whenever_the_builder_receives():
    for row in chain_tables()[4]:
        if row.noise[0] == 0:
            assert row.next_state == DECODED


@pytest.mark.fast
@pytest.mark.precommit
@pytest.mark.parametrize("eps", [(0.1, 0.2, 0.6), (0.3, 0.4, 0.5), (0.0, 0.5, 0.5)])
def test_fast__chain_mrp_is_stochastic(eps):
    model = build_chain_mrp(*eps)
    p = model.transition.entries
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert p[STALLED - 1, STALLED - 1] == 1.0
    assert p[DECODED - 1, DECODED - 1] == 1.0
    stalled, decoded = absorption_split(model)
    assert stalled + decoded == pytest.approx(1.0, abs=1e-12)
    assert expected_run_length(model) >= 1.0


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__perfect_channel_always_stalls():
    # Everyone receives the first slot: targets are served, the builder
    # holds one equation about two symbols.
    model = build_chain_mrp(0.0, 0.0, 0.0)
    assert absorption_split(model) == pytest.approx((1.0, 0.0))
    assert expected_run_length(model) == pytest.approx(1.0)
    assert expected_run_reward(model, "rho_Qstar") == pytest.approx(1.0)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__deaf_builder_never_decodes():
    model = build_chain_mrp(1.0, 0.3, 0.4)
    assert absorption_split(model)[1] == pytest.approx(0.0, abs=1e-12)
    roles = ChainRoles.create(0, 1)
    with pytest.raises(UnreachableAbsorptionException):
        per_run_rewards(model, roles)
    e_u, e_e = per_run_rewards(model, roles, unconditional_decode=True)
    assert e_u > 0


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__targets_need_working_channels():
    with pytest.raises(RejectedInputException):
        build_chain_mrp(0.1, 1.0, 0.5)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__expected_run_reward_conditions():
    model = build_chain_mrp(0.1, 0.2, 0.6)
    with pytest.raises(RejectedInputException):
        expected_run_reward(model, "rho_E", conditional_on=3)
    stalled, decoded = absorption_split(model)
    given_stall = expected_run_reward(model, "rho_E", conditional_on=STALLED)
    given_decode = expected_run_reward(model, "rho_E", conditional_on=DECODED)
    total = expected_run_reward(model, "rho_E")
    assert stalled * given_stall + decoded * given_decode == pytest.approx(total, abs=1e-10)
    with pytest.raises(KeyError):
        model.spec("rho_X")


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__roles():
    roles = ChainRoles.create(0, 1)
    assert roles.targets == (1, 2)
    assert roles.u_reward == "rho_j"
    assert roles.role_eps((0.1, 0.2, 0.6)) == (0.1, 0.2, 0.6)
    assert ChainRoles.create(1, 2).u_reward == "rho_k"

    with pytest.raises(RejectedInputException):
        ChainRoles(builder=0, targets=(2, 1), bottleneck_excluded=1)
    with pytest.raises(RejectedInputException):
        ChainRoles.create(0, 0)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__roles_from_demands():
    # w_2 = 0.5 / 0.8 < w_3 = 0.5 / 0.4.
    roles = ChainRoles.from_demands(0, (0.1, 0.2, 0.6), (0.9, 0.5, 0.5))
    assert roles.bottleneck_excluded == 1
    roles = ChainRoles.from_demands(0, (0.1, 0.6, 0.2), (0.9, 0.5, 0.5))
    assert roles.bottleneck_excluded == 2
    # Ties go to the lower index.
    roles = ChainRoles.from_demands(2, (0.3, 0.3, 0.1), (0.5, 0.5, 0.5))
    assert roles.bottleneck_excluded == 0


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__m_lower():
    assert m_lower(10, 0.5, 1.0) == 5
    assert m_lower(3, 0.7, 0.7) == 3
    assert m_lower(10, 0.0, 1.0) == 0
    with pytest.raises(RejectedInputException):
        m_lower(10, 0.5, 0.0)
    with pytest.raises(RejectedInputException):
        m_lower(0, 0.5, 1.0)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__sufficiency_check():
    model = build_chain_mrp(0.1, 0.2, 0.6)
    roles = ChainRoles.create(0, 1)
    report = sufficiency_check(model, roles, 10**5, (0.99, 0.96, 0.64))
    assert report.m_lower == m_lower(10**5, 0.96, report.e_reward_u)
    assert report.holds == (report.lhs >= report.rhs)
    assert report.d_i_boundary == pytest.approx(
        1.0 - report.m_lower * report.e_reward_E_given_decode / 10**5
    )

    satisfied = sufficiency_check(model, roles, 10**5, (0.0, 0.96, 0.64))
    assert satisfied.rhs == 0.0
    assert satisfied.holds


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__sufficiency_check_warns_for_bottleneck_u():
    model = build_chain_mrp(0.1, 0.2, 0.6)
    # User 3 needs 1.6 slots per symbol, user 2 only 1.2.
    with pytest.warns(RuntimeWarning, match="bottleneck"):
        sufficiency_check(model, ChainRoles.create(0, 2), 10**5, (0.99, 0.96, 0.64))


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__distortion_boundary_decreases_along_eps_u():
    roles = ChainRoles.create(0, 1)
    sweep = [0.2, 0.3, 0.4, 0.5, 0.6]
    points = distortion_boundary((0.1, 0.2, 0.6), roles, sweep)
    assert [p.eps_u for p in points] == sweep
    boundaries = [p.d_i_boundary for p in points]
    assert all(b1 >= b2 - 1e-12 for b1, b2 in zip(boundaries, boundaries[1:]))
    for p in points:
        assert p.d_hat_u == pytest.approx(p.eps_u ** 2)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__distortion_boundary_finite_n_approaches_asymptote():
    roles = ChainRoles.create(0, 1)
    asymptotic = distortion_boundary((0.1, 0.2, 0.6), roles, [0.3])[0]
    finite = distortion_boundary((0.1, 0.2, 0.6), roles, [0.3], n_symbols=10**7)[0]
    assert finite.d_i_boundary >= asymptotic.d_i_boundary - 1e-12
    assert finite.d_i_boundary == pytest.approx(asymptotic.d_i_boundary, abs=1e-5)
    with pytest.raises(RejectedInputException):
        distortion_boundary((0.1, 0.2, 0.6), roles, [])


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__simulate_chain_runs_matches_model():
    eps = (0.3, 0.4, 0.5)
    model = build_chain_mrp(*eps)
    runs = 20000
    stats = simulate_chain_runs(*eps, runs=runs, seed=1)
    assert stats.runs == runs
    assert stats.absorption_counts[STALLED] + stats.absorption_counts[DECODED] == runs

    _, decoded = absorption_split(model)
    sigma = math.sqrt(decoded * (1 - decoded) / runs)
    assert abs(stats.absorption_counts[DECODED] / runs - decoded) < 4 * sigma

    for n, name in enumerate(REWARD_NAMES):
        expected = expected_run_reward(model, name)
        error = stats.reward_stds[n] / math.sqrt(runs)
        assert abs(stats.reward_means[n] - expected) <= 4 * error + 1e-12, name


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__simulate_chain_runs_transition_frequencies():
    eps = (0.2, 0.3, 0.6)
    model = build_chain_mrp(*eps)
    stats = simulate_chain_runs(*eps, runs=20000, seed=4)
    counts = stats.transition_counts[:4]
    p = model.transition.entries[:4]
    for state in range(4):
        total = counts[state].sum()
        if total < 1000:
            continue
        freq = counts[state] / total
        sigma = np.sqrt(p[state] * (1 - p[state]) / total)
        assert np.all(np.abs(freq - p[state]) <= 4 * sigma + 1e-12)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__simulate_chain_runs_is_seeded():
    first = simulate_chain_runs(0.3, 0.4, 0.5, runs=500, seed=2)
    second = simulate_chain_runs(0.3, 0.4, 0.5, runs=500, seed=2)
    assert np.array_equal(first.transition_counts, second.transition_counts)
    assert np.array_equal(first.reward_means, second.reward_means)


@pytest.mark.precommit
@pytest.mark.slow
def test_slow__simulate_chain_runs_matches_model_at_scale():
    eps = (0.1, 0.4, 0.6)
    runs = 10**6
    model = build_chain_mrp(*eps)
    stats = simulate_chain_runs(*eps, runs=runs, seed=0)

    _, decoded = absorption_split(model)
    sigma = math.sqrt(decoded * (1 - decoded) / runs)
    assert abs(stats.absorption_counts[DECODED] / runs - decoded) < 3 * sigma

    e_u, e_e = per_run_rewards(model, ChainRoles.create(0, 1))
    u_index = REWARD_NAMES.index("rho_j")
    u_error = stats.reward_stds[u_index] / math.sqrt(runs)
    assert abs(stats.reward_means[u_index] - e_u) < 3 * u_error
    e_error = stats.std_rho_E_given_decode / math.sqrt(stats.absorption_counts[DECODED])
    assert abs(stats.mean_rho_E_given_decode - e_e) < 3 * e_error

    counts = stats.transition_counts[:4]
    p = model.transition.entries[:4]
    for state in range(4):
        total = counts[state].sum()
        if total == 0:
            continue
        freq = counts[state] / total
        sigma = np.sqrt(p[state] * (1 - p[state]) / total)
        # Twenty-four entries are compared at once.
        assert np.all(np.abs(freq - p[state]) <= 4 * sigma + 1e-12), state
