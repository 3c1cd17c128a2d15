"""
Aleatoric and epistemic uncertainty: classifier heads, the distorted-logit loss family and
the uncertainty-driven attention rewrite.

Losses are built from :mod:`uqrank.autodiff.tensor` primitives so they differentiate on the
active tape. Report-side quantities (entropy, the predictive decomposition) work on plain
numpy arrays.
"""
import math
from dataclasses import asdict, dataclass
from typing import AbstractSet, Dict, Optional, Tuple, Union

import numpy as np

from uqrank.autodiff import tensor as T
from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tensor, active_tape
from uqrank.globals.errors import DomainError, ShapeError, UsageError
from uqrank.modules.base import Module, glorot, zeros
from uqrank.modules.bayesian import BayesianDense, BayesianLayerConfig, MCSampleSet
from uqrank.modules.fusion import AttentionMap, FusedContext, ImageEmbedding

ALEATORIC_TERMS = ("GCE", "VE", "UDL")
VE_TARGET = math.e


@dataclass
class LogitVariancePair:
    """Answer-class logits ``y`` and their predicted aleatoric variances (``>= 0``)."""

    logits: Tensor
    variance: Tensor

    def __post_init__(self) -> None:
        if self.logits.shape != self.variance.shape or self.logits.ndim != 1:
            raise ShapeError(
                f"logits {self.logits.shape} and variances {self.variance.shape} must be M-vectors"
            )
        if np.any(self.variance.data < 0):
            raise DomainError("predicted variances must be non-negative")

    @property
    def M(self) -> int:
        return self.logits.shape[0]


@dataclass
class DistortedLogitSet:
    """``T x M`` Gaussian-corrupted copies of one logit vector."""

    samples: Tensor

    @property
    def T(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class UncertaintyReport:
    entropy: float
    aleatoric_mean: float
    epistemic_var: float
    sigma_sq_p: float

    def as_row(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class RuamState:
    """All intermediates of one attention rewrite."""

    alpha: AttentionMap
    nabla: np.ndarray
    alpha_prime: Tensor
    alpha_dprime: Tensor
    alpha_new: Tensor
    f_prime: Tensor
    f_dprime: Tensor
    lam: float
    gamma_neg: float


class ClassifierHeads(Module):
    """
    Shared trunk ``G_d`` (two dense layers with dropout) and the logit/variance heads.

    With candidate keys the heads output a query of ``out_dim`` that is scored against
    every key; without keys ``out_dim`` is the number of classes.
    """

    def __init__(
        self,
        in_dim: int,
        trunk_dim: int,
        out_dim: int,
        init_rng: RngStream,
        dropout: float = 0.5,
    ) -> None:
        config = BayesianLayerConfig(dropout)
        self.trunk = [
            BayesianDense(in_dim, trunk_dim, init_rng.split(0), config, "relu"),
            BayesianDense(trunk_dim, trunk_dim, init_rng.split(1), config, "relu"),
        ]
        self.w_y = glorot(init_rng.split(2), (trunk_dim, out_dim), trunk_dim, out_dim)
        self.w_v = glorot(init_rng.split(3), (trunk_dim, out_dim), trunk_dim, out_dim)
        self.b_v = zeros(())
        self.in_dim = in_dim


def classifier_heads(
    f: FusedContext | Tensor,
    heads: ClassifierHeads,
    rng: Optional[RngStream],
    keys: Optional[Tensor] = None,
) -> LogitVariancePair:
    """
    ``y = G_y(G_d(f))`` and ``sigma^2 = softplus(G_v(G_d(f)))``.

    Args:
        f: Fused context (its joint vector is used) or a plain input vector
        heads: Trunk and head parameters
        rng: Dropout stream; ``None`` runs the trunk deterministically
        keys: Optional ``M x out_dim`` candidate keys
    """
    x = f.joint() if isinstance(f, FusedContext) else f
    if x.shape != (heads.in_dim,):
        raise ShapeError(f"classifier input {x.shape} does not fit a {heads.in_dim}-d trunk")
    a = x
    for i, layer in enumerate(heads.trunk):
        a = layer.forward(a, None if rng is None else rng.split(i))
    query_y = T.matmul(a, heads.w_y)
    query_v = T.matmul(a, heads.w_v)
    if keys is not None:
        query_y = T.matmul(keys, T.reshape(query_y, (-1, 1)))
        query_y = T.reshape(query_y, (keys.shape[0],))
        query_v = T.reshape(T.matmul(keys, T.reshape(query_v, (-1, 1))), (keys.shape[0],))
    return LogitVariancePair(query_y, T.softplus(query_v + heads.b_v))


def lrt_distort(pair: LogitVariancePair, T_samples: int, rng: RngStream) -> DistortedLogitSet:
    """``y_t = y + eps_t * sqrt(sigma^2)`` with ``eps_t ~ N(0, I)``."""
    if T_samples < 1:
        raise UsageError(f"lrt_distort needs T >= 1, got {T_samples}")
    shape = (T_samples, pair.M)
    eps = Tensor(rng.normal(shape))
    sigma = T.broadcast_to(T.sqrt(pair.variance), shape)
    return DistortedLogitSet(T.broadcast_to(pair.logits, shape) + eps * sigma)


def _check_class(true_class: int, M: int) -> None:
    if not 0 <= true_class < M:
        raise UsageError(f"class index {true_class} outside 0..{M - 1}")


def gce_loss(distorted: DistortedLogitSet, true_class: int) -> Tensor:
    """``-log((1/T) sum_t softmax(y_t)[true_class])``, computed in log space."""
    _check_class(true_class, distorted.samples.shape[1])
    picked = T.log_softmax(distorted.samples, axis=1)[:, true_class]
    return -(T.logsumexp(picked, axis=0) - math.log(distorted.T))


def ce_loss(pair: LogitVariancePair, true_class: int) -> Tensor:
    _check_class(true_class, pair.M)
    return -T.log_softmax(pair.logits)[true_class]


def softmax_entropy(logits: Tensor) -> Tensor:
    """Entropy of ``softmax(logits)``: ``logsumexp(y) - sum(p * y)``."""
    return T.logsumexp(logits) - T.tsum(T.softmax(logits) * logits)


def ve_loss(pair: LogitVariancePair, entropy_term: Tensor | float) -> Tensor:
    """``sum_d relu(exp(sigma^2_d + H) - e)``."""
    entropy_term = T.as_tensor(entropy_term)
    if entropy_term.item() < 0:
        raise DomainError(f"entropy term must be non-negative, got {entropy_term.item()}")
    total = pair.variance + entropy_term
    return T.tsum(T.relu(T.exp(total) - VE_TARGET))


def udl_loss(l_y: Tensor, l_gce: Tensor, literal: bool = False) -> Tensor:
    """
    ``exp((L_y - L_gce)^2)``; equal to 1 exactly when both losses agree.

    ``literal=True`` evaluates ``exp(L_y - L_gce)^2 = exp(2 (L_y - L_gce))`` instead.
    """
    delta = T.as_tensor(l_y) - T.as_tensor(l_gce)
    if literal:
        return T.exp(delta * 2.0)
    return T.exp(T.square(delta))


def aleatoric_total(
    l_gce: Tensor,
    l_ve: Tensor,
    l_udl: Tensor,
    flags: Optional[AbstractSet[str]] = None,
) -> Tensor:
    """``L_u = L_gce + L_ve + L_udl``, keeping only the terms named in ``flags``."""
    terms = dict(zip(ALEATORIC_TERMS, (l_gce, l_ve, l_udl)))
    active = [terms[name] for name in ALEATORIC_TERMS if flags is None or name in flags]
    total = Tensor(0.0)
    for term in active:
        total = total + term
    return total


def predictive_entropy(probs: np.ndarray) -> float:
    """
    Shannon entropy in nats; ``0 log 0`` counts as 0.

    Raises:
        DomainError: If ``probs`` has negative entries or does not sum to 1
    """
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
        raise DomainError("entropy needs a probability vector")
    nz = probs[probs > 0]
    return float(max(-(nz * np.log(nz)).sum(), 0.0))


def predictive_uncertainty(samples: MCSampleSet) -> UncertaintyReport:
    """
    Split the MC predictive uncertainty into its parts.

    ``sigma^2_p`` is the mean per-sample entropy plus the mean predicted aleatoric
    variance. ``epistemic_var`` is the across-sample variance of the class probabilities,
    averaged over classes.
    """
    entropy = float(np.mean([predictive_entropy(p) for p in samples.per_sample_probs]))
    aleatoric = float(samples.per_sample_variances.mean())
    epistemic = float(samples.per_sample_probs.var(axis=0).mean())
    return UncertaintyReport(entropy, aleatoric, epistemic, entropy + aleatoric)


def rewrite_attention(
    alpha: AttentionMap,
    nabla: Union[np.ndarray, Tensor],
    grid: Tensor,
    f: Tensor,
    gamma_neg: float = -2.0,
    renormalize: bool = False,
    lam: float = 1.0,
) -> RuamState:
    """
    Reweight attention by a reversed uncertainty gradient map and fuse the residual.

    ``alpha' = nabla * alpha``, ``alpha'' = relu(alpha') + gamma_neg * relu(-alpha')``,
    ``alpha_new = alpha + alpha'' * alpha``, ``f' = sum_cells g * alpha_new`` and
    ``f'' = f + f'``. Gradients flow through ``alpha``, ``grid`` and ``f``, and through
    ``nabla`` when it is a recorded tensor. With ``renormalize`` the map used for ``f'`` is
    scaled to sum to 1 while ``alpha_new`` keeps its raw values.
    """
    a = alpha.alpha
    nabla = T.as_tensor(nabla)
    if nabla.shape != a.shape:
        raise ShapeError(f"gradient map {nabla.shape} does not fit attention {a.shape}")
    c = grid.shape[0]
    if grid.shape[1:] != a.shape or f.shape != (c,):
        raise ShapeError(f"grid {grid.shape}, attention {a.shape} and f {f.shape} disagree")
    alpha_prime = nabla * a
    alpha_dprime = T.relu(alpha_prime) + T.relu(-alpha_prime) * gamma_neg
    alpha_new = a + alpha_dprime * a
    used = alpha_new / T.tsum(alpha_new) if renormalize else alpha_new
    n = a.size
    f_prime = T.matmul(T.reshape(used, (n,)), T.transpose(T.reshape(grid, (c, n))))
    return RuamState(
        alpha=alpha,
        nabla=nabla.numpy(),
        alpha_prime=alpha_prime,
        alpha_dprime=alpha_dprime,
        alpha_new=alpha_new,
        f_prime=f_prime,
        f_dprime=f + f_prime,
        lam=lam,
        gamma_neg=gamma_neg,
    )


def ruam_update(
    f: FusedContext,
    alpha: AttentionMap,
    g_i: ImageEmbedding,
    l_u: Tensor,
    lam: float = 1.0,
    gamma_neg: float = -2.0,
    renormalize: bool = False,
) -> Tuple[FusedContext, RuamState]:
    """
    Rewrite one round's attention with the uncertainty gradient.

    The gradient of ``l_u`` with respect to the region features is read off the active
    tape, reversed and scaled by ``lam``, then averaged over channels into a ``u x v`` map.
    The gradient is recorded as tensor operations, so a later backward pass also
    differentiates through the map.

    Raises:
        UsageError: If ``lam <= 0`` or no tape is active
    """
    if lam <= 0:
        raise UsageError(f"gradient reversal scale must be positive, got {lam}")
    tape = active_tape()
    if tape is None:
        raise UsageError("ruam_update needs an active tape holding the uncertainty loss")
    (grad,) = tape.graph_gradient(l_u, [g_i.grid])
    nabla = T.mean(grad, axis=0) * (-lam)
    state = rewrite_attention(alpha, nabla, g_i.grid, f.f, gamma_neg, renormalize, lam)
    return FusedContext(state.f_dprime, f.question), state
