import numpy as np
import pytest

from erasurecast.utils import (
    make_generator,
    mask_label,
    mask_of,
    parse_float_list,
    shard_sizes,
    spawn_generators,
    users_of,
)
from erasurecast.utils.checks import RejectedInputException


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__masks():
    assert mask_of([]) == 0
    assert mask_of([0, 2]) == 0b101
    assert list(users_of(0b110)) == [1, 2]
    assert mask_label(0b110) == "23"
    assert mask_label(0b111) == "123"
    for mask in range(8):
        assert mask_of(list(users_of(mask))) == mask


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__parse_float_list():
    assert parse_float_list("0.1,0.2, 0.3") == [0.1, 0.2, 0.3]
    assert parse_float_list("1,") == [1.0]
    with pytest.raises(RejectedInputException):
        parse_float_list("0.1,a")


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__shard_sizes():
    assert shard_sizes(10, 4) == [4, 4, 2]
    assert shard_sizes(8, 4) == [4, 4]
    assert shard_sizes(0, 4) == []


@pytest.mark.fast
@pytest.mark.precommit
def test_fast__generators_are_seeded():
    assert make_generator(5).random() == make_generator(5).random()
    assert isinstance(make_generator(5).bit_generator, np.random.PCG64)
    first, second = spawn_generators(5, 2)
    again = spawn_generators(5, 3)
    assert first.random() == again[0].random()
    assert second.random() == again[1].random()
