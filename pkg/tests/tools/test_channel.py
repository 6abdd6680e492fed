import numpy as np
import pytest

from erasurecast.tools.channel import BLOCK_SIZE, BroadcastChannel, ReplayChannel
from erasurecast.utils.checks import PhaseExhaustedException, RejectedInputException

from tests.helpers import erasure_rows


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__seeded_patterns():
    a = BroadcastChannel((0.3, 0.4, 0.5), seed=7)
    b = BroadcastChannel((0.3, 0.4, 0.5), seed=7)
    rows_a = np.array([a.draw() for _ in range(100)])
    # Look-ahead does not change the sequence.
    b.peek(5000)
    rows_b = np.array([b.draw() for _ in range(100)])
    assert np.array_equal(rows_a, rows_b)
    assert a.slot == 100


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__erasure_frequencies():
    channel = BroadcastChannel((0.1, 0.5, 0.9), seed=0)
    rows = channel.peek(4 * BLOCK_SIZE)
    assert rows.shape == (4 * BLOCK_SIZE, 3)
    assert np.allclose(rows.mean(axis=0), [0.1, 0.5, 0.9], atol=0.02)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__perfect_channel_never_erases():
    channel = BroadcastChannel((0.0, 0.0, 0.0), seed=3)
    assert not channel.peek(1000).any()


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__peek_does_not_consume():
    channel = ReplayChannel(erasure_rows(["100", "010", "001"]))
    assert channel.peek(2).tolist() == erasure_rows(["100", "010"]).tolist()
    assert channel.slot == 0
    channel.advance(2)
    assert channel.draw().tolist() == [False, False, True]
    assert channel.slot == 3


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__replay_runs_out():
    channel = ReplayChannel(erasure_rows(["000"]))
    channel.draw()
    with pytest.raises(PhaseExhaustedException):
        channel.draw()


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__partial_peek():
    channel = ReplayChannel(erasure_rows(["000", "111"]))
    assert channel.peek(10, partial=True).shape == (2, 3)
    with pytest.raises(PhaseExhaustedException):
        channel.peek(10)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__record_and_replay():
    channel = BroadcastChannel((0.3, 0.4, 0.5), seed=1, record=True)
    first = np.array([channel.draw() for _ in range(10)])
    channel.advance(5)
    recorded = channel.recorded()
    assert recorded.shape == (15, 3)
    replay = ReplayChannel(recorded)
    assert np.array_equal(np.array([replay.draw() for _ in range(10)]), first)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__channel_rejects():
    with pytest.raises(RejectedInputException):
        ReplayChannel(np.zeros((3, 2), dtype=bool))
    with pytest.raises(RejectedInputException):
        BroadcastChannel((0.1, 0.1, 0.1), seed=0).recorded()
    with pytest.raises(RejectedInputException):
        BroadcastChannel((0.1, 0.1, 0.1), seed=0).advance(-1)
