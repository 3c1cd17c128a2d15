"""Unit tests for the answer latent, diversity loss and decoder."""

import math

import numpy as np
import pytest

from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tensor
from uqrank.domain_model.records import END
from uqrank.globals.errors import ShapeError, UsageError
from uqrank.modules.decoder import (
    MAX_ANSWER_TOKENS,
    AnswerDecoder,
    LatentGaussian,
    LatentHead,
    LatentSampleSet,
    decode_answer,
    diversity_loss,
    kl_loss,
    project_latent,
    sample_latents,
    teacher_forced_logits,
    token_ce_loss,
)


def _gaussian(mu, log_var):
    return LatentGaussian(Tensor(np.array(mu, float)), Tensor(np.array(log_var, float)))


class TestLatent:
    """Unit tests for the latent projection, sampling and KL term."""

    def test_projection_sizes(self):
        """Test the head projects onto mean and log-variance of the latent size."""
        g = project_latent(Tensor(np.ones(5)), LatentHead(5, 3, RngStream(0)))
        assert g.mu.shape == g.log_var.shape == (3,)

    def test_projection_size_mismatch(self):
        """Test a context of the wrong size raises ShapeError."""
        with pytest.raises(ShapeError):
            project_latent(Tensor(np.ones(4)), LatentHead(5, 3, RngStream(0)))

    def test_gaussian_shape_mismatch(self):
        """Test mean and log-variance of different sizes raise ShapeError."""
        with pytest.raises(ShapeError):
            _gaussian([0.0, 0.0], [0.0])

    def test_sample_shape_and_center(self):
        """Test k samples of the latent size centered at their mean."""
        latents = sample_latents(_gaussian([1.0, -1.0], [0.0, 0.0]), 4, RngStream(0))
        assert latents.samples.shape == (4, 2)
        assert np.allclose(latents.center.numpy(), latents.samples.numpy().mean(axis=0))

    def test_tiny_variance_samples_the_mean(self):
        """Test a vanishing variance puts every sample at the mean."""
        latents = sample_latents(_gaussian([1.0, -1.0], [-60.0, -60.0]), 3, RngStream(0))
        assert np.allclose(latents.samples.numpy(), [[1.0, -1.0]] * 3)

    def test_zero_samples(self):
        """Test k < 1 raises UsageError."""
        with pytest.raises(UsageError):
            sample_latents(_gaussian([0.0], [0.0]), 0, RngStream(0))

    def test_kl_of_standard_normal(self):
        """Test the KL term vanishes for N(0, 1)."""
        assert kl_loss(_gaussian([0.0, 0.0], [0.0, 0.0])).item() == 0.0

    def test_kl_hand_value(self):
        """Test KL of N(1, 1) against N(0, 1) is 0.5 per dimension."""
        assert np.isclose(kl_loss(_gaussian([1.0, 1.0], [0.0, 0.0])).item(), 1.0)


class TestDiversityLoss:
    """Unit tests for the centered cosine diversity loss."""

    def test_opposite_samples(self):
        """Test two samples mirrored around their mean have similarity -1."""
        latents = LatentSampleSet(Tensor(np.array([[1.0, 0.0], [-1.0, 0.0]])))
        assert np.isclose(diversity_loss(latents).item(), -1.0)

    def test_coinciding_samples(self):
        """Test identical samples give zero instead of dividing by zero."""
        latents = LatentSampleSet(Tensor(np.ones((3, 2))))
        assert diversity_loss(latents).item() == 0.0

    def test_needs_two_samples(self):
        """Test a single sample raises UsageError."""
        with pytest.raises(UsageError):
            diversity_loss(LatentSampleSet(Tensor(np.ones((1, 2)))))

    def test_explicit_center(self):
        """Test a supplied center must match the latent size."""
        with pytest.raises(ShapeError):
            LatentSampleSet(Tensor(np.ones((2, 2))), center=Tensor(np.zeros(3)))


class TestDecoder:
    """Unit tests for decoding and token losses."""

    def _decoder(self):
        return AnswerDecoder(vocab_size=9, embed_dim=3, z_dim=4, init_rng=RngStream(0))

    def test_teacher_forcing_appends_end(self):
        """Test teacher forcing targets the tokens followed by END."""
        logits, targets = teacher_forced_logits(Tensor(np.zeros(4)), self._decoder(), [5, 6])
        assert targets == [5, 6, END]
        assert logits.shape == (3, 9)

    def test_generate_stops_by_max_length(self):
        """Test greedy decoding never emits END or more than the token limit."""
        out = decode_answer(Tensor(np.ones(4)), self._decoder(), "generate")
        assert len(out.token_ids) <= MAX_ANSWER_TOKENS
        assert END not in out.token_ids
        assert out.hidden.shape == (4,)

    def test_score_candidates(self):
        """Test every candidate receives a log-likelihood."""
        out = decode_answer(
            Tensor(np.zeros(4)), self._decoder(), "score-candidates", [[4], [5, 6], [7, 8, 4]]
        )
        assert out.class_logits.shape == (3,)
        assert np.all(out.class_logits.numpy() < 0)

    def test_unknown_mode(self):
        """Test an unknown mode raises UsageError."""
        with pytest.raises(UsageError):
            decode_answer(Tensor(np.zeros(4)), self._decoder(), "beam")

    def test_score_without_candidates(self):
        """Test score mode without candidates raises UsageError."""
        with pytest.raises(UsageError):
            decode_answer(Tensor(np.zeros(4)), self._decoder(), "score-candidates")

    def test_latent_size_mismatch(self):
        """Test a latent of the wrong size raises ShapeError."""
        with pytest.raises(ShapeError):
            decode_answer(Tensor(np.zeros(3)), self._decoder(), "generate")

    def test_token_loss_of_uniform_logits(self):
        """Test uniform step logits give ln V per token."""
        loss = token_ce_loss(Tensor(np.zeros((3, 9))), [4, 5, END])
        assert np.isclose(loss.item(), math.log(9))

    def test_token_loss_needs_targets(self):
        """Test an empty target list raises ShapeError."""
        with pytest.raises(ShapeError):
            token_ce_loss(Tensor(np.zeros((3, 9))), [])
