"""Image/text encoders and the attention fusion of one dialog round."""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from uqrank.autodiff import tensor as T
from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tensor
from uqrank.domain_model.records import UNK
from uqrank.globals.errors import ShapeError
from uqrank.modules.base import Module, glorot, zeros
from uqrank.modules.bayesian import BayesianConvStack, BayesianLSTM


@dataclass
class ImageEmbedding:
    """Region features ``g_i`` of shape ``c x u x v``."""

    grid: Tensor

    def __post_init__(self) -> None:
        if self.grid.ndim != 3 or self.grid.shape[1] * self.grid.shape[2] < 1:
            raise ShapeError(f"image embedding needs c x u x v, got {self.grid.shape}")

    @property
    def channels(self) -> int:
        return self.grid.shape[0]

    @property
    def cells(self) -> int:
        return self.grid.shape[1] * self.grid.shape[2]

    def cell_features(self) -> Tensor:
        """``(u*v) x c`` matrix, one row per spatial cell in row-major order."""
        return T.transpose(T.reshape(self.grid, (self.channels, self.cells)))


@dataclass
class TextEncoding:
    vector: Tensor

    @property
    def dim(self) -> int:
        return self.vector.shape[-1]


@dataclass
class AttentionMap:
    """Softmax attention ``alpha`` over the ``u x v`` cells."""

    alpha: Tensor

    def flat(self) -> Tensor:
        return T.reshape(self.alpha, (-1,))


@dataclass
class FusedContext:
    """
    Attention output of one round.

    Attributes:
        f: Attention-weighted pooled region feature (``c``)
        question: Question encoding the attention was conditioned on
    """

    f: Tensor
    question: Tensor

    def joint(self) -> Tensor:
        """Input of the answer and latent heads: ``f || g_q``."""
        return T.concat([self.f, self.question])

    @property
    def dim(self) -> int:
        return self.f.shape[0] + self.question.shape[0]


class Embedding(Module):
    def __init__(self, vocab_size: int, dim: int, init_rng: RngStream) -> None:
        self.table = Tensor(init_rng.normal((vocab_size, dim)) * 0.1, requires_grad=True)
        self.vocab_size = vocab_size

    def lookup(self, ids: Sequence[int]) -> Tensor:
        """Rows for ``ids``; ids outside the vocabulary use the UNK row."""
        safe = np.array([i if 0 <= i < self.vocab_size else UNK for i in ids], dtype=np.int64)
        return T.getitem(self.table, safe)

    def mean(self, sequences: Sequence[Sequence[int]]) -> Tensor:
        """Mean embedding of each sequence, ``len(sequences) x dim``."""
        flat = [i for seq in sequences for i in seq]
        weights = np.zeros((len(sequences), max(len(flat), 1)))
        start = 0
        for row, seq in enumerate(sequences):
            if seq:
                weights[row, start : start + len(seq)] = 1.0 / len(seq)
            start += len(seq)
        if not flat:
            return Tensor(np.zeros((len(sequences), self.table.shape[1])))
        return T.matmul(Tensor(weights), self.lookup(flat))


def encode_image(
    image: np.ndarray | Tensor, cnn: BayesianConvStack, rng: Optional[RngStream]
) -> ImageEmbedding:
    """One stochastic draw of the region features."""
    return ImageEmbedding(cnn.forward(T.as_tensor(image), rng))


def encode_text(
    tokens: Sequence[int], embedder: Embedding, lstm: BayesianLSTM, rng: Optional[RngStream]
) -> TextEncoding:
    """Final hidden state of the Bayesian LSTM over the token embeddings."""
    if len(tokens) == 0:
        raise ShapeError("encode_text needs at least one token")
    rows = embedder.lookup(tokens)
    return TextEncoding(lstm.forward([rows[t] for t in range(len(tokens))], rng))


class HistoryUpdater(Module):
    """
    ``h' = h + sigmoid(W_g [q || a || h] + b_g) * tanh(W_p [q || a] + b_p)``.

    With zero projection weights the gate multiplies ``tanh(0) = 0`` and the history is
    carried over unchanged.
    """

    def __init__(self, dim: int, init_rng: RngStream) -> None:
        self.w_p = glorot(init_rng.split(0), (2 * dim, dim), 2 * dim, dim)
        self.b_p = zeros((dim,))
        self.w_g = glorot(init_rng.split(1), (3 * dim, dim), 3 * dim, dim)
        self.b_g = zeros((dim,))
        self.dim = dim


def update_history(
    prev: TextEncoding, q: TextEncoding, a: TextEncoding, updater: HistoryUpdater
) -> TextEncoding:
    """Fold one question/answer pair into the dialog history."""
    if not prev.dim == q.dim == a.dim == updater.dim:
        raise ShapeError(
            f"history update needs equal sizes, got {prev.dim}, {q.dim}, {a.dim}"
            f" for a {updater.dim}-d updater"
        )
    qa = T.concat([q.vector, a.vector])
    proposal = T.tanh(T.matmul(qa, updater.w_p) + updater.b_p)
    gate = T.sigmoid(T.matmul(T.concat([qa, prev.vector]), updater.w_g) + updater.b_g)
    return TextEncoding(prev.vector + gate * proposal)


class FusionAttention(Module):
    """Parameters of the per-cell tanh attention: ``W_c``, ``W_q``, ``b_c``, ``W_a``, ``b_a``."""

    def __init__(self, channels: int, text_dim: int, attn_dim: int, init_rng: RngStream) -> None:
        self.w_c = glorot(init_rng.split(0), (channels, attn_dim), channels, attn_dim)
        self.w_q = glorot(init_rng.split(1), (2 * text_dim, attn_dim), 2 * text_dim, attn_dim)
        self.b_c = zeros((attn_dim,))
        self.w_a = glorot(init_rng.split(2), (attn_dim, 1), attn_dim, 1)
        self.b_a = zeros((1,))
        self.channels = channels
        self.text_dim = text_dim


def attend_fuse(
    img: ImageEmbedding, q: TextEncoding, h: TextEncoding, attention: FusionAttention
) -> Tuple[FusedContext, AttentionMap]:
    """
    ``g_a = tanh(W_c g_i + W_q (g_q || g_h) + b_c)`` per cell, ``alpha = softmax(W_a g_a + b_a)``
    over the cells and ``f = sum_cells alpha * g_i``.
    """
    if img.channels != attention.channels or q.dim != attention.text_dim or h.dim != q.dim:
        raise ShapeError(
            f"attention expects {attention.channels} channels and {attention.text_dim}-d text,"
            f" got {img.channels} and {q.dim}/{h.dim}"
        )
    cells = img.cell_features()
    n = img.cells
    text = T.matmul(T.concat([q.vector, h.vector]), attention.w_q) + attention.b_c
    g_a = T.tanh(T.matmul(cells, attention.w_c) + T.broadcast_to(text, (n, text.shape[0])))
    scores = T.reshape(T.matmul(g_a, attention.w_a), (n,))
    scores = scores + T.broadcast_to(attention.b_a, (n,))
    alpha = T.softmax(scores)
    f = T.matmul(alpha, cells)
    _, u, v = img.grid.shape
    return FusedContext(f, q.vector), AttentionMap(T.reshape(alpha, (u, v)))


class CandidateEncoder(Module):
    """Answer-option keys ``G_a``: mean token embedding through a tanh projection."""

    def __init__(self, embed_dim: int, key_dim: int, init_rng: RngStream) -> None:
        self.w = glorot(init_rng, (embed_dim, key_dim), embed_dim, key_dim)
        self.b = zeros((key_dim,))


def encode_candidates(
    candidates: Sequence[Sequence[int]], embedder: Embedding, encoder: CandidateEncoder
) -> Tensor:
    """``K x key_dim`` keys, one per candidate answer."""
    pooled = embedder.mean(candidates)
    projected = T.matmul(pooled, encoder.w)
    return T.tanh(projected + T.broadcast_to(encoder.b, projected.shape))
