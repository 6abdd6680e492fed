import numpy as np
import pytest

from erasurecast.linalg import Matrix
from erasurecast.markov import MrpSpec, canonicalize, random_absorbing_spec, read_mrp
from erasurecast.utils.checks import NotAbsorbingException, RejectedInputException

from tests import specs
from tests.helpers import CHAIN_MRP


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__read_mrp():
    spec = read_mrp(CHAIN_MRP)
    assert spec.num_states == 2
    assert spec.transition == Matrix([[0.7, 0.3], [0.0, 1.0]])
    assert MrpSpec.from_text(spec.to_text()) == spec


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__spec_rejects_bad_rows():
    with pytest.raises(RejectedInputException):
        MrpSpec(Matrix([[0.5, 0.4], [0.0, 1.0]]), Matrix(np.zeros((2, 2))))
    with pytest.raises(RejectedInputException):
        MrpSpec(Matrix([[1.2, -0.2], [0.0, 1.0]]), Matrix(np.zeros((2, 2))))
    with pytest.raises(RejectedInputException):
        MrpSpec(Matrix([[1.0]]), Matrix(np.zeros((2, 2))))


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__canonical_order():
    c = canonicalize(specs.trivia.absorbing_first()["spec"])
    assert c.transient_states == [1, 2]
    assert c.absorbing_states == [0]
    assert c.canonical_index(0) == 2
    assert c.is_transient(1)
    assert c.full_transition().allclose(
        [[0.3, 0.5, 0.2], [0.1, 0.5, 0.4], [0.0, 0.0, 1.0]], atol=1e-15
    )
    # Round trip through the canonical permutation.
    assert c.to_original(c.full_transition()) == c.spec.transition


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__fundamental_matrix():
    for entry in specs.iterator("*"):
        c = canonicalize(entry["spec"])
        eye = np.eye(c.n_transient)
        residual = (eye - c.q_block.entries) @ c.fundamental.entries - eye
        assert np.max(np.abs(residual)) < 1e-9, entry["name"]


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__no_absorbing_state():
    spec = MrpSpec(Matrix([[0.5, 0.5], [0.5, 0.5]]), Matrix(np.ones((2, 2))))
    with pytest.raises(NotAbsorbingException):
        canonicalize(spec)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__trapped_class():
    # States 2 and 3 swap forever and never reach the absorbing state 1.
    spec = MrpSpec(
        Matrix([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]]),
        Matrix(np.zeros((3, 3))),
    )
    with pytest.raises(NotAbsorbingException):
        canonicalize(spec)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__all_absorbing():
    spec = MrpSpec(Matrix(np.eye(2)), Matrix(np.zeros((2, 2))))
    with pytest.raises(RejectedInputException):
        canonicalize(spec)


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__random_absorbing_spec():
    rng = np.random.default_rng(7)
    for _ in range(20):
        spec = random_absorbing_spec(rng, 5, 2, max_q_row_sum=0.9)
        c = canonicalize(spec)
        assert c.absorbing_states == [3, 4]
        assert np.max(c.q_block.entries.sum(axis=1)) <= 0.9 + 1e-12
