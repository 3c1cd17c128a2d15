"""Adam over a fixed, ordered parameter list."""
from typing import List, Sequence

import numpy as np

from uqrank.autodiff.tensor import Tensor
from uqrank.globals.errors import ShapeError, UsageError


class Adam:
    """
    Adam with bias correction.

    Args:
        params: Parameters updated in place, in a fixed order
        lr: Learning rate
        betas: Decay rates of the first and second moment estimates
        eps: Denominator guard
    """

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 4e-4,
        betas: tuple = (0.9, 0.999),
        eps: float = 1e-8,
    ) -> None:
        if lr <= 0:
            raise UsageError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m: List[np.ndarray] = [np.zeros_like(p.data) for p in self.params]
        self.v: List[np.ndarray] = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads: Sequence[np.ndarray]) -> None:
        if len(grads) != len(self.params):
            raise ShapeError(f"{len(grads)} gradients for {len(self.params)} parameters")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
