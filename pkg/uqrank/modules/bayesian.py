"""Dropout as a Bayesian approximation: dense, conv and LSTM layers plus MC sampling.

A layer samples fresh Bernoulli masks whenever it is given an :class:`RngStream`; passing
``rng=None`` runs the deterministic network (all dropout off).
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from uqrank.autodiff import tensor as T
from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import LSTMWeights, Tensor
from uqrank.globals.errors import ConfigError, ShapeError, UsageError
from uqrank.modules.base import Module, glorot, zeros

PLACEMENTS = ("after-max-pool", "before-layer")
ACTIVATIONS: dict = {
    "relu": T.relu,
    "tanh": T.tanh,
    "linear": lambda x: x,
}


@dataclass(frozen=True)
class BayesianLayerConfig:
    """
    Dropout settings of one layer.

    Attributes:
        dropout_rate: Drop probability ``p`` in ``[0, 1]``
        placement: Conv layers only: mask before the conv or after the pooling
        mc_active_at_eval: Keep sampling masks during evaluation
    """

    dropout_rate: float = 0.0
    placement: str = "after-max-pool"
    mc_active_at_eval: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.dropout_rate <= 1.0:
            raise ConfigError(f"dropout rate {self.dropout_rate} outside [0, 1]")
        if self.placement not in PLACEMENTS:
            raise ConfigError(f"unknown dropout placement {self.placement!r}")


def dropout_mask(shape: Union[Tuple[int, ...], int], p: float, rng: RngStream) -> Tensor:
    """
    Inverted-dropout mask: 0 with probability ``p``, else ``1 / (1 - p)``.

    ``p = 0`` gives all ones and ``p = 1`` all zeros; neither consumes a draw.

    Raises:
        UsageError: If ``p`` lies outside ``[0, 1]``
    """
    if not 0.0 <= p <= 1.0:
        raise UsageError(f"dropout probability {p} outside [0, 1]")
    if p == 0.0:
        return Tensor(np.ones(shape))
    if p == 1.0:
        return Tensor(np.zeros(shape))
    return Tensor(rng.bernoulli(shape, 1.0 - p) / (1.0 - p))


def apply_dropout(x: Tensor, p: float, rng: Optional[RngStream]) -> Tensor:
    if rng is None or p == 0.0:
        return x
    return x * dropout_mask(x.shape, p, rng)


class BayesianDense(Module):
    """``act(x W + b)`` followed by dropout."""

    def __init__(
        self,
        n_in: int,
        n_out: int,
        init_rng: RngStream,
        config: BayesianLayerConfig = BayesianLayerConfig(),
        activation: str = "relu",
    ) -> None:
        if activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {activation!r}")
        self.w = glorot(init_rng, (n_in, n_out), n_in, n_out)
        self.b = zeros((n_out,))
        self.config = config
        self.activation = activation

    def deterministic(self, x: Tensor) -> Tensor:
        pre = T.matmul(x, self.w)
        pre = pre + T.broadcast_to(self.b, pre.shape)
        return ACTIVATIONS[self.activation](pre)

    def forward(self, x: Tensor, rng: Optional[RngStream]) -> Tensor:
        return apply_dropout(self.deterministic(x), self.config.dropout_rate, rng)


class BayesianConvStack(Module):
    """
    Conv stack of ``conv 3x3 (pad 1) -> relu -> 2x2 pool`` blocks with per-layer dropout.

    With ``placement="after-max-pool"`` the mask multiplies each block's pooled output;
    with ``"before-layer"`` it multiplies the block's input activations before the conv.
    """

    def __init__(
        self,
        channels: Sequence[int],
        rates: Sequence[float],
        init_rng: RngStream,
        placement: str = "after-max-pool",
        pooling: str = "max",
        kernel: int = 3,
    ) -> None:
        if len(channels) != len(rates) + 1:
            raise ConfigError(
                f"conv stack with {len(channels) - 1} layers needs as many dropout rates, "
                f"got {len(rates)}"
            )
        if pooling not in ("max", "avg"):
            raise ConfigError(f"unknown pooling {pooling!r}")
        self.layer_configs = [BayesianLayerConfig(p, placement) for p in rates]
        self.kernels = []
        self.biases = []
        for i, (c_in, c_out) in enumerate(zip(channels[:-1], channels[1:])):
            fan_in, fan_out = c_in * kernel * kernel, c_out * kernel * kernel
            self.kernels.append(
                glorot(init_rng.split(i), (c_out, c_in, kernel, kernel), fan_in, fan_out)
            )
            self.biases.append(zeros((c_out,)))
        self.placement = placement
        self.pooling = pooling
        self.kernel = kernel
        self.channels = tuple(channels)

    def output_shape(self, height: int, width: int) -> Tuple[int, int, int]:
        for _ in self.kernels:
            height, width = height // 2, width // 2
        return self.channels[-1], height, width

    def forward(self, image: Tensor, rng: Optional[RngStream]) -> Tensor:
        if image.ndim != 3 or image.shape[0] != self.channels[0]:
            raise ShapeError(
                f"image of shape {image.shape} does not fit a {self.channels[0]}-channel stack"
            )
        x = image
        pad = self.kernel // 2
        for w, b, config in zip(self.kernels, self.biases, self.layer_configs):
            p = config.dropout_rate
            if self.placement == "before-layer":
                x = apply_dropout(x, p, rng)
            x = T.conv2d(x, w, stride=1, pad=pad)
            x = T.relu(x + T.broadcast_to(T.reshape(b, (-1, 1, 1)), x.shape))
            x = T.pool2d(x, 2, self.pooling)
            if self.placement == "after-max-pool":
                x = apply_dropout(x, p, rng)
        return x


@dataclass
class LSTMMasks:
    """Masks shared by every time step of one stochastic LSTM pass."""

    input: Tensor
    hidden: Tensor
    output: Tensor


class BayesianLSTM(Module):
    """
    LSTM with variational dropout: one input mask and one hidden mask are sampled per
    pass and reused at every step; a third mask drops units of the final encoding.
    """

    def __init__(
        self,
        n_in: int,
        hidden: int,
        init_rng: RngStream,
        p_hidden: float = 0.3,
        p_output: float = 0.5,
    ) -> None:
        self.cell = LSTMWeights(
            w_x=glorot(init_rng.split(0), (n_in, 4 * hidden), n_in, 4 * hidden),
            w_h=glorot(init_rng.split(1), (hidden, 4 * hidden), hidden, 4 * hidden),
            b=zeros((4 * hidden,)),
        )
        self.w_x, self.w_h, self.b = self.cell.w_x, self.cell.w_h, self.cell.b
        self.n_in = n_in
        self.hidden = hidden
        self.p_hidden = BayesianLayerConfig(p_hidden).dropout_rate
        self.p_output = BayesianLayerConfig(p_output).dropout_rate

    def sample_masks(self, rng: Optional[RngStream]) -> LSTMMasks:
        if rng is None:
            return LSTMMasks(
                Tensor(np.ones(self.n_in)),
                Tensor(np.ones(self.hidden)),
                Tensor(np.ones(self.hidden)),
            )
        return LSTMMasks(
            dropout_mask(self.n_in, self.p_hidden, rng),
            dropout_mask(self.hidden, self.p_hidden, rng),
            dropout_mask(self.hidden, self.p_output, rng),
        )

    def run(
        self,
        xs: Sequence[Tensor],
        masks: LSTMMasks,
        h0: Optional[Tensor] = None,
        c0: Optional[Tensor] = None,
    ) -> Tuple[Tensor, Tensor]:
        """Unroll over ``xs`` with fixed masks; returns the masked final ``h`` and raw ``c``."""
        if len(xs) == 0:
            raise ShapeError("BayesianLSTM needs a sequence of length >= 1")
        h = h0 if h0 is not None else Tensor(np.zeros(self.hidden))
        c = c0 if c0 is not None else Tensor(np.zeros(self.hidden))
        for x in xs:
            h, c = T.lstm_cell(x * masks.input, h * masks.hidden, c, self.cell)
        return h * masks.output, c

    def forward(self, xs: Sequence[Tensor], rng: Optional[RngStream]) -> Tensor:
        h, _ = self.run(xs, self.sample_masks(rng))
        return h


def bayesian_forward(layer: Module, x, rng: Optional[RngStream]) -> Tensor:
    """One stochastic draw of ``layer`` (dense, conv stack or LSTM) on ``x``."""
    if isinstance(layer, (BayesianDense, BayesianConvStack, BayesianLSTM)):
        return layer.forward(x, rng)
    raise UsageError(f"{type(layer).__name__} is not a Bayesian layer")


@dataclass
class MCSampleSet:
    """
    T Monte-Carlo draws of class probabilities and predicted aleatoric variances.

    Attributes:
        per_sample_probs: ``T x M`` probabilities, rows summing to 1
        per_sample_variances: ``T x M`` non-negative predicted variances
    """

    per_sample_probs: np.ndarray
    per_sample_variances: np.ndarray

    def __post_init__(self) -> None:
        self.per_sample_probs = np.atleast_2d(np.asarray(self.per_sample_probs, dtype=float))
        self.per_sample_variances = np.atleast_2d(
            np.asarray(self.per_sample_variances, dtype=float)
        )
        if self.per_sample_probs.shape[0] < 1:
            raise UsageError("an MC sample set needs T >= 1")
        if self.per_sample_probs.shape != self.per_sample_variances.shape:
            raise ShapeError(
                f"probabilities {self.per_sample_probs.shape} and variances "
                f"{self.per_sample_variances.shape} differ in shape"
            )
        if np.any(np.abs(self.per_sample_probs.sum(axis=1) - 1.0) > 1e-9):
            raise UsageError("every MC probability vector must sum to 1")

    @property
    def T(self) -> int:
        return self.per_sample_probs.shape[0]

    @property
    def M(self) -> int:
        return self.per_sample_probs.shape[1]

    def mean_probs(self) -> np.ndarray:
        """MC estimate of the predictive distribution."""
        return self.per_sample_probs.mean(axis=0)


SampleOutput = Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]
SampleFn = Callable[[object, Optional[RngStream]], SampleOutput]


def predictive_posterior(
    model: SampleFn, x: object, T_samples: int, rng: Optional[RngStream]
) -> MCSampleSet:
    """
    ``T_samples`` stochastic passes of ``model(x, rng)``.

    ``model`` returns class probabilities, or ``(probabilities, variances)``. Sample ``t``
    draws from ``rng.split(t)``; with ``rng=None`` every pass is deterministic.

    Raises:
        UsageError: If ``T_samples < 1``
    """
    if T_samples < 1:
        raise UsageError(f"predictive_posterior needs T >= 1, got {T_samples}")
    probs, variances = [], []
    for t in range(T_samples):
        out = model(x, None if rng is None else rng.split(t))
        if isinstance(out, tuple):
            p, v = out
        else:
            p, v = out, np.zeros_like(out)
        probs.append(np.asarray(p, dtype=float))
        variances.append(np.asarray(v, dtype=float))
    return MCSampleSet(np.stack(probs), np.stack(variances))
