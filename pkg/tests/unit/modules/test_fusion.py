"""Unit tests for the encoders, history update and attention fusion."""

import numpy as np
import pytest

from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tensor
from uqrank.domain_model.records import UNK
from uqrank.globals.errors import ShapeError
from uqrank.modules.bayesian import BayesianLSTM
from uqrank.modules.fusion import (
    CandidateEncoder,
    Embedding,
    FusionAttention,
    HistoryUpdater,
    ImageEmbedding,
    TextEncoding,
    attend_fuse,
    encode_candidates,
    encode_text,
    update_history,
)


def _grid(c=2, u=2, v=3):
    return Tensor(np.arange(c * u * v, dtype=float).reshape(c, u, v))


class TestImageEmbedding:
    """Unit tests for ImageEmbedding."""

    def test_cell_features_row_major(self):
        """Test cells are rows in row-major order with one column per channel."""
        cells = ImageEmbedding(_grid()).cell_features().numpy()
        assert cells.shape == (6, 2)
        assert np.array_equal(cells[0], [0.0, 6.0])
        assert np.array_equal(cells[1], [1.0, 7.0])

    def test_rejects_flat_grid(self):
        """Test a grid without spatial axes raises ShapeError."""
        with pytest.raises(ShapeError):
            ImageEmbedding(Tensor(np.ones((2, 3))))


class TestEmbedding:
    """Unit tests for token embeddings."""

    def test_out_of_vocab_uses_unk(self):
        """Test ids outside the vocabulary map to the UNK row."""
        embedder = Embedding(6, 3, RngStream(0))
        assert np.array_equal(embedder.lookup([42]).numpy(), embedder.lookup([UNK]).numpy())

    def test_mean_of_sequences(self):
        """Test mean embeddings average each sequence and zero the empty one."""
        embedder = Embedding(6, 3, RngStream(0))
        table = embedder.table.numpy()
        means = embedder.mean([[4, 5], []]).numpy()
        assert np.allclose(means[0], (table[4] + table[5]) / 2)
        assert np.allclose(means[1], 0.0)


class TestEncodeText:
    """Unit tests for encode_text."""

    def test_hidden_size(self):
        """Test the encoding has the LSTM hidden size."""
        embedder = Embedding(8, 3, RngStream(0))
        lstm = BayesianLSTM(3, 4, RngStream(1))
        assert encode_text([4, 5, 6], embedder, lstm, RngStream(2)).dim == 4

    def test_empty_tokens(self):
        """Test an empty token list raises ShapeError."""
        with pytest.raises(ShapeError):
            encode_text([], Embedding(8, 3, RngStream(0)), BayesianLSTM(3, 4, RngStream(1)), None)


class TestUpdateHistory:
    """Unit tests for the gated history update."""

    def test_zero_projection_keeps_history(self):
        """Test zero projection weights carry the history over unchanged."""
        updater = HistoryUpdater(3, RngStream(0))
        updater.w_p.data = np.zeros_like(updater.w_p.data)
        prev = TextEncoding(Tensor(np.array([0.1, -0.2, 0.3])))
        q = TextEncoding(Tensor(np.ones(3)))
        a = TextEncoding(Tensor(-np.ones(3)))
        assert np.allclose(update_history(prev, q, a, updater).vector.numpy(), [0.1, -0.2, 0.3])

    def test_size_mismatch(self):
        """Test encodings of different sizes raise ShapeError."""
        updater = HistoryUpdater(3, RngStream(0))
        small = TextEncoding(Tensor(np.ones(2)))
        full = TextEncoding(Tensor(np.ones(3)))
        with pytest.raises(ShapeError):
            update_history(full, small, full, updater)


class TestAttendFuse:
    """Unit tests for attention fusion."""

    def test_attention_is_a_distribution(self):
        """Test the attention map is u x v and sums to one."""
        attention = FusionAttention(2, 3, 4, RngStream(0))
        q = TextEncoding(Tensor(np.ones(3)))
        h = TextEncoding(Tensor(np.zeros(3)))
        fused, alpha = attend_fuse(ImageEmbedding(_grid()), q, h, attention)
        assert alpha.alpha.shape == (2, 3)
        assert np.isclose(alpha.alpha.numpy().sum(), 1.0)
        assert fused.dim == 2 + 3

    def test_zero_scorer_gives_uniform_attention(self):
        """Test a zero scoring vector attends uniformly and pools the mean cell."""
        attention = FusionAttention(2, 3, 4, RngStream(0))
        attention.w_a.data = np.zeros_like(attention.w_a.data)
        q = TextEncoding(Tensor(np.ones(3)))
        img = ImageEmbedding(_grid())
        fused, alpha = attend_fuse(img, q, q, attention)
        assert np.allclose(alpha.alpha.numpy(), 1.0 / 6)
        assert np.allclose(fused.f.numpy(), img.cell_features().numpy().mean(axis=0))
        assert np.array_equal(fused.question.numpy(), q.vector.numpy())

    def test_channel_mismatch(self):
        """Test an image with other channels than the attention raises ShapeError."""
        attention = FusionAttention(4, 3, 4, RngStream(0))
        q = TextEncoding(Tensor(np.ones(3)))
        with pytest.raises(ShapeError):
            attend_fuse(ImageEmbedding(_grid()), q, q, attention)


class TestEncodeCandidates:
    """Unit tests for candidate keys."""

    def test_one_key_per_candidate(self):
        """Test keys have one bounded row per candidate."""
        embedder = Embedding(8, 3, RngStream(0))
        encoder = CandidateEncoder(3, 5, RngStream(1))
        keys = encode_candidates([[4], [5, 6], [7]], embedder, encoder)
        assert keys.shape == (3, 5)
        assert np.all(np.abs(keys.numpy()) <= 1.0)
