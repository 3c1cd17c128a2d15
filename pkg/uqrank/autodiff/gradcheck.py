"""Finite-difference gradient checking."""
from typing import Callable, List, Sequence

import numpy as np

from uqrank.autodiff.tensor import Tape, Tensor
from uqrank.globals.errors import UsageError

STEP = 1e-4
FLOOR = 1e-8


def _scalar(out: Tensor) -> float:
    if not isinstance(out, Tensor) or out.size != 1:
        shape = out.shape if isinstance(out, Tensor) else type(out).__name__
        raise UsageError(f"check_gradients needs a scalar-valued function, got {shape}")
    return out.item()


def check_gradients(
    f: Callable[..., Tensor], inputs: Sequence[np.ndarray], step: float = STEP
) -> float:
    """
    Compare tape gradients of ``f`` with central differences.

    ``f`` receives one Tensor per input and must return a scalar Tensor. It is called
    repeatedly, so any randomness inside it must be seeded per call.

    Args:
        f: Scalar-valued computation
        inputs: Points at which to differentiate
        step: Central-difference step

    Returns:
        Max over all input entries of
        ``|autodiff - numeric| / max(|autodiff|, |numeric|, 1e-8)``.

    Raises:
        UsageError: If ``f`` does not return a scalar
    """
    points: List[np.ndarray] = [np.array(x, dtype=np.float64) for x in inputs]

    with Tape() as tape:
        leaves = [Tensor(p, requires_grad=True) for p in points]
        out = f(*leaves)
        _scalar(out)
        analytic = tape.gradient(out, leaves)

    worst = 0.0
    for which, point in enumerate(points):
        flat = point.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            upper = _scalar(f(*[Tensor(p) for p in points]))
            flat[i] = original - step
            lower = _scalar(f(*[Tensor(p) for p in points]))
            flat[i] = original
            numeric = (upper - lower) / (2.0 * step)
            auto = analytic[which].reshape(-1)[i]
            scale = max(abs(auto), abs(numeric), FLOOR)
            worst = max(worst, abs(auto - numeric) / scale)
    return worst
