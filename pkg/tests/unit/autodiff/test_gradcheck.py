"""Unit tests for finite-difference gradient checking."""

import numpy as np
import pytest

from uqrank.autodiff import tensor as T
from uqrank.autodiff.gradcheck import check_gradients
from uqrank.globals.errors import UsageError


class TestCheckGradients:
    """Unit tests for check_gradients."""

    def test_linear_function(self):
        """Test the error of a linear function is about zero."""
        assert check_gradients(lambda x: T.tsum(x), [np.array([1.0, -2.0, 3.0])]) < 1e-9

    def test_tanh_of_product(self):
        """Test sum(tanh(Wx)) for a random 4x4 W."""
        rng = np.random.default_rng(0)
        error = check_gradients(
            lambda w, x: T.tsum(T.tanh(T.matmul(w, T.reshape(x, (4, 1))))),
            [rng.normal(size=(4, 4)), rng.normal(size=4)],
        )
        assert error < 1e-4

    def test_softmax_cross_entropy(self):
        """Test softmax cross entropy on random logits."""
        rng = np.random.default_rng(1)
        error = check_gradients(lambda z: -T.log_softmax(z)[2], [rng.normal(size=6)])
        assert error < 1e-4

    def test_non_scalar_function(self):
        """Test a vector-valued function is rejected."""
        with pytest.raises(UsageError):
            check_gradients(lambda x: x * 2.0, [np.ones(3)])

    def test_inputs_left_unchanged(self):
        """Test the input arrays are not modified."""
        x = np.array([0.5, 1.5])
        check_gradients(lambda t: T.tsum(T.square(t)), [x])
        assert x.tolist() == [0.5, 1.5]
