from __future__ import annotations

from app.utils.seeding import UniformStream, replica_seed, replica_stream


def test_stream_is_a_function_of_the_seed() -> None:
    first = UniformStream(123)
    second = UniformStream(123)
    assert [first.uniform() for _ in range(5000)] == [second.uniform() for _ in range(5000)]
    assert first.draws == 5000


def test_below_and_choice_use_one_draw_each() -> None:
    stream = UniformStream(4)
    values = [stream.below(7) for _ in range(1000)]
    assert set(values) <= set(range(7))
    assert stream.choice((5,)) == 5
    assert stream.draws == 1001


def test_replica_seeds_are_distinct_and_stable() -> None:
    seeds = [replica_seed(42, i) for i in range(50)]
    assert len(set(seeds)) == 50
    assert seeds == [replica_seed(42, i) for i in range(50)]
    assert replica_seed(43, 0) != seeds[0]


def test_replica_stream_is_addressable_by_index() -> None:
    first = replica_stream(42, 3)
    again = replica_stream(42, 3)
    other = replica_stream(42, 4)
    values = [first.uniform() for _ in range(10)]
    assert values == [again.uniform() for _ in range(10)]
    assert values != [other.uniform() for _ in range(10)]
