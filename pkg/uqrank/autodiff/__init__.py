"""Tensor engine: dense float64 tensors, tape-based gradients and seeded randomness."""
from uqrank.autodiff.gradcheck import check_gradients
from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import LSTMWeights, Tape, Tensor

__all__ = ["LSTMWeights", "RngStream", "Tape", "Tensor", "check_gradients"]
