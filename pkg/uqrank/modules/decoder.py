"""Variational answer latent, diversity loss and the LSTM answer decoder."""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from uqrank.autodiff import tensor as T
from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import LSTMWeights, Tensor
from uqrank.domain_model.records import END, START
from uqrank.globals.errors import ShapeError, UsageError
from uqrank.modules.base import Module, glorot, zeros
from uqrank.modules.fusion import FusedContext

MAX_ANSWER_TOKENS = 8
DIVERSITY_GUARD = 1e-8
MODES = ("generate", "score-candidates")


@dataclass
class LatentGaussian:
    """Diagonal Gaussian ``N(mu, exp(log_var))`` over the answer latent."""

    mu: Tensor
    log_var: Tensor

    def __post_init__(self) -> None:
        if self.mu.shape != self.log_var.shape or self.mu.ndim != 1:
            raise ShapeError(f"mu {self.mu.shape} and log_var {self.log_var.shape} differ")

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_var.data / 2.0)


@dataclass
class LatentSampleSet:
    """
    ``k`` latent samples and their center.

    The center defaults to the sample mean; it can be supplied explicitly.
    """

    samples: Tensor
    center: Optional[Tensor] = None

    def __post_init__(self) -> None:
        if self.samples.ndim != 2:
            raise ShapeError(f"latent samples must be k x z, got {self.samples.shape}")
        if self.center is None:
            self.center = T.mean(self.samples, axis=0)
        elif self.center.shape != (self.samples.shape[1],):
            raise ShapeError(
                f"center {self.center.shape} does not fit samples {self.samples.shape}"
            )

    @property
    def k(self) -> int:
        return self.samples.shape[0]


@dataclass
class AnswerSequence:
    """
    Decoder output.

    Attributes:
        token_ids: Greedy tokens (generate mode), END excluded
        class_logits: Per-candidate sequence log-likelihoods (score mode)
        hidden: Final decoder hidden state of the greedy pass
        step_logits: Per-step output logits of the greedy pass
    """

    token_ids: List[int] = field(default_factory=list)
    class_logits: Optional[Tensor] = None
    hidden: Optional[np.ndarray] = None
    step_logits: List[np.ndarray] = field(default_factory=list)


class LatentHead(Module):
    """Linear maps ``mu = W_mu f`` and ``log sigma^2 = W_sigma f`` (no bias)."""

    def __init__(self, in_dim: int, z_dim: int, init_rng: RngStream) -> None:
        self.w_mu = glorot(init_rng.split(0), (in_dim, z_dim), in_dim, z_dim)
        self.w_sigma = Tensor(
            glorot(init_rng.split(1), (in_dim, z_dim), in_dim, z_dim).data * 0.1,
            requires_grad=True,
        )


def project_latent(f: FusedContext | Tensor, head: LatentHead) -> LatentGaussian:
    """Project the fused context onto the latent mean and log-variance."""
    x = f.joint() if isinstance(f, FusedContext) else f
    if x.shape[-1] != head.w_mu.shape[0]:
        raise ShapeError(f"context of size {x.shape[-1]} does not fit {head.w_mu.shape}")
    return LatentGaussian(T.matmul(x, head.w_mu), T.matmul(x, head.w_sigma))


def sample_latents(g: LatentGaussian, k: int, rng: RngStream) -> LatentSampleSet:
    """``z_j = mu + eps_j * sigma`` for ``k`` standard-normal draws ``eps_j``."""
    if k < 1:
        raise UsageError(f"need k >= 1 latent samples, got {k}")
    z_dim = g.mu.shape[0]
    eps = Tensor(rng.normal((k, z_dim)))
    sigma = T.exp(g.log_var * 0.5)
    samples = T.broadcast_to(g.mu, (k, z_dim)) + eps * T.broadcast_to(sigma, (k, z_dim))
    return LatentSampleSet(samples)


def kl_loss(g: LatentGaussian) -> Tensor:
    """``KL(N(mu, sigma^2) || N(0, 1)) = 0.5 * sum(mu^2 + sigma^2 - log sigma^2 - 1)``."""
    return T.tsum(T.square(g.mu) + T.exp(g.log_var) - g.log_var - 1.0) * 0.5


def diversity_loss(latents: LatentSampleSet) -> Tensor:
    """
    Mean centered cosine similarity over all unordered sample pairs.

    Pairs whose centered norm product is below ``1e-8`` are divided by ``1e-8`` instead,
    so coinciding samples give 0.

    Raises:
        UsageError: For fewer than two samples
    """
    k = latents.k
    if k < 2:
        raise UsageError("diversity loss needs at least two latent samples")
    centered = latents.samples - T.broadcast_to(latents.center, latents.samples.shape)
    gram = T.matmul(centered, T.transpose(centered))
    sq = T.tsum(T.square(centered), axis=1)
    norm_products = T.matmul(T.reshape(sq, (k, 1)), T.reshape(sq, (1, k)))
    denominator = T.sqrt(T.maximum(norm_products, DIVERSITY_GUARD**2))
    upper = np.triu_indices(k, 1)
    return T.mean((gram / denominator)[upper])


class AnswerDecoder(Module):
    """LSTM decoder started from ``h0 = z``, ``c0 = 0``; outputs ``W_o h + b_o``."""

    def __init__(self, vocab_size: int, embed_dim: int, z_dim: int, init_rng: RngStream) -> None:
        table = init_rng.split(0).normal((vocab_size, embed_dim)) * 0.1
        self.embed = Tensor(table, requires_grad=True)
        self.cell = LSTMWeights(
            w_x=glorot(init_rng.split(1), (embed_dim, 4 * z_dim), embed_dim, 4 * z_dim),
            w_h=glorot(init_rng.split(2), (z_dim, 4 * z_dim), z_dim, 4 * z_dim),
            b=zeros((4 * z_dim,)),
        )
        self.w_x, self.w_h, self.b = self.cell.w_x, self.cell.w_h, self.cell.b
        self.w_o = glorot(init_rng.split(3), (z_dim, vocab_size), z_dim, vocab_size)
        self.b_o = zeros((vocab_size,))
        self.vocab_size = vocab_size
        self.z_dim = z_dim

    def step(self, token_ids: np.ndarray, h: Tensor, c: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
        x = T.getitem(self.embed, np.asarray(token_ids, dtype=np.int64))
        h, c = T.lstm_cell(x, h, c, self.cell)
        logits = T.matmul(h, self.w_o)
        return h, c, logits + T.broadcast_to(self.b_o, logits.shape)


def _teacher_arrays(
    sequences: Sequence[Sequence[int]], max_len: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decoder inputs (START + tokens), targets (tokens + END if room) and validity mask."""
    steps = max(min(len(s), max_len) + (1 if len(s) < max_len else 0) for s in sequences)
    steps = max(steps, 1)
    inputs = np.zeros((len(sequences), steps), dtype=np.int64)
    targets = np.zeros((len(sequences), steps), dtype=np.int64)
    valid = np.zeros((len(sequences), steps))
    for row, seq in enumerate(sequences):
        seq = list(seq[:max_len])
        target = seq + ([END] if len(seq) < max_len else [])
        source = [START] + seq[: len(target) - 1]
        inputs[row, : len(source)] = source
        targets[row, : len(target)] = target
        valid[row, : len(target)] = 1.0
    return inputs, targets, valid


def teacher_forced_logits(
    z: Tensor, decoder: AnswerDecoder, target: Sequence[int], max_len: int = MAX_ANSWER_TOKENS
) -> Tuple[Tensor, List[int]]:
    """Step logits (``steps x V``) of the decoder fed the target, and the target ids."""
    inputs, targets, valid = _teacher_arrays([target], max_len)
    n = int(valid[0].sum())
    h, c = z, Tensor(np.zeros(decoder.z_dim))
    rows = []
    for s in range(n):
        h, c, logits = decoder.step(inputs[0, s], h, c)
        rows.append(logits)
    return T.stack(rows), [int(t) for t in targets[0, :n]]


def score_candidates(
    z: Tensor,
    decoder: AnswerDecoder,
    candidates: Sequence[Sequence[int]],
    max_len: int = MAX_ANSWER_TOKENS,
) -> Tensor:
    """Teacher-forced log-likelihood of every candidate, one batched unroll."""
    k = len(candidates)
    inputs, targets, valid = _teacher_arrays(candidates, max_len)
    h = T.broadcast_to(z, (k, decoder.z_dim))
    c = Tensor(np.zeros((k, decoder.z_dim)))
    total: Optional[Tensor] = None
    for s in range(inputs.shape[1]):
        h, c, logits = decoder.step(inputs[:, s], h, c)
        picked = T.log_softmax(logits, axis=1)[np.arange(k), targets[:, s]]
        term = picked * Tensor(valid[:, s])
        total = term if total is None else total + term
    assert total is not None
    return total


def generate(
    z: Tensor, decoder: AnswerDecoder, max_len: int = MAX_ANSWER_TOKENS
) -> AnswerSequence:
    """Greedy argmax decoding until END or ``max_len`` tokens."""
    h, c = z, Tensor(np.zeros(decoder.z_dim))
    token = START
    out = AnswerSequence()
    for _ in range(max_len):
        h, c, logits = decoder.step(np.int64(token), h, c)
        out.step_logits.append(logits.numpy())
        token = int(np.argmax(logits.data))
        if token == END:
            break
        out.token_ids.append(token)
    out.hidden = h.numpy()
    return out


def decode_answer(
    z: Tensor,
    decoder: AnswerDecoder,
    mode: str,
    candidates: Optional[Sequence[Sequence[int]]] = None,
) -> AnswerSequence:
    """
    Run the decoder from latent ``z``.

    Args:
        z: Latent vector of the decoder's hidden size
        decoder: Decoder parameters
        mode: ``generate`` (greedy tokens) or ``score-candidates`` (log-likelihoods)
        candidates: Candidate token-id sequences, required for ``score-candidates``

    Raises:
        UsageError: For an unknown mode or missing candidates
        ShapeError: If ``z`` does not match the decoder hidden size
    """
    if mode not in MODES:
        raise UsageError(f"unknown decode mode {mode!r}, expected one of {', '.join(MODES)}")
    if z.shape != (decoder.z_dim,):
        raise ShapeError(f"latent of shape {z.shape} does not fit a {decoder.z_dim}-d decoder")
    if mode == "generate":
        return generate(z, decoder)
    if not candidates:
        raise UsageError("score-candidates mode needs candidate sequences")
    return AnswerSequence(class_logits=score_candidates(z, decoder, candidates))


def token_ce_loss(step_logits: Tensor, targets: Sequence[int]) -> Tensor:
    """Mean negative log-probability of ``targets`` under per-step logits (``steps x V``)."""
    n = len(targets)
    if n == 0 or n > MAX_ANSWER_TOKENS + 1 or step_logits.shape[0] < n:
        raise ShapeError(f"{n} targets do not fit step logits of shape {step_logits.shape}")
    logp = T.log_softmax(step_logits[:n], axis=1)
    return -T.mean(logp[np.arange(n), np.asarray(targets, dtype=np.int64)])
