"""Unit tests for seeded random streams and parameter snapshots."""

import numpy as np

from uqrank.autodiff.rng import RngStream


class TestRngStream:
    """Unit tests for RngStream."""

    def test_same_seed_same_draws(self):
        """Test identical seeds give identical draws."""
        a, b = RngStream(7), RngStream(7)
        assert np.array_equal(a.normal((3, 4)), b.normal((3, 4)))
        assert np.array_equal(a.uniform(5), b.uniform(5))

    def test_counter_advances(self):
        """Test consecutive draws differ and the counter advances."""
        stream = RngStream(7)
        first = stream.normal(4)
        second = stream.normal(4)
        assert stream.counter == 2
        assert not np.array_equal(first, second)

    def test_counter_reproduces_draw(self):
        """Test a stream rebuilt at a given counter repeats that draw."""
        stream = RngStream(3, (1, 2))
        stream.normal(2)
        expected = stream.normal(2)
        assert np.array_equal(RngStream(3, (1, 2), counter=1).normal(2), expected)

    def test_split_is_independent(self):
        """Test split streams differ from each other and leave the parent untouched."""
        parent = RngStream(11)
        left, right = parent.split(0), parent.split(1)
        assert parent.counter == 0
        assert not np.array_equal(left.normal(6), right.normal(6))
        assert np.array_equal(parent.split(0).normal(6), RngStream(11, (0,)).normal(6))

    def test_bernoulli_values(self):
        """Test bernoulli draws are zeros and ones with the extremes respected."""
        stream = RngStream(0)
        assert set(np.unique(stream.bernoulli(100, 0.5))) <= {0.0, 1.0}
        assert stream.bernoulli(10, 1.0).sum() == 10
        assert stream.bernoulli(10, 0.0).sum() == 0

    def test_permutation(self):
        """Test permutation is a reordering of range(n)."""
        assert sorted(RngStream(5).permutation(9).tolist()) == list(range(9))
