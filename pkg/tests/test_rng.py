import numpy as np
import pytest

from rcinet import SeededRng


def test_streams_replay_exactly():
    a = SeededRng(42)
    b = SeededRng(42)
    assert [a.next_u64() for _ in range(50)] == [b.next_u64() for _ in range(50)]


def test_known_stream_frozen():
    # values frozen from an independent uint64 transcription of the published
    # reference algorithms; any change to the generator is a format break
    rng = SeededRng(1)
    assert rng.next_u64() == 12966619160104079557
    assert rng.next_u64() == 9600361134598540522
    rng = SeededRng(42)
    assert rng.next_u64() == 1546998764402558742


def test_different_seeds_diverge():
    assert SeededRng(1).next_u64() != SeededRng(2).next_u64()


def test_uniform_range_and_shape():
    rng = SeededRng(7)
    xs = rng.uniform(-1.0, 1.0, size=2000)
    assert xs.shape == (2000,)
    assert np.all(xs >= -1.0) and np.all(xs < 1.0)
    assert abs(float(np.mean(xs))) < 0.1
    assert isinstance(rng.uniform(0.0, 5.0), float)


def test_signs_are_pm_one():
    xs = SeededRng(3).signs(500)
    assert set(np.unique(xs)) == {-1.0, 1.0}
    assert 100 < np.sum(xs > 0) < 400


def test_zero_seed_is_usable():
    rng = SeededRng(0)
    assert len({rng.next_u64() for _ in range(10)}) == 10


def test_seed_must_be_int():
    with pytest.raises(TypeError):
        SeededRng(1.5)
