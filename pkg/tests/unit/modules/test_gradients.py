"""Finite-difference checks of composite computations and closed-form oracles."""

import math

import numpy as np
import pytest

from uqrank.autodiff import tensor as T
from uqrank.autodiff.gradcheck import check_gradients
from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tape, Tensor, active_tape
from uqrank.modules.bayesian import predictive_posterior
from uqrank.modules.decoder import (
    AnswerDecoder,
    LatentGaussian,
    LatentHead,
    LatentSampleSet,
    diversity_loss,
    kl_loss,
    project_latent,
    score_candidates,
)
from uqrank.modules.fusion import (
    AttentionMap,
    FusionAttention,
    ImageEmbedding,
    TextEncoding,
    attend_fuse,
)
from uqrank.modules.uncertainty import (
    ClassifierHeads,
    LogitVariancePair,
    aleatoric_total,
    ce_loss,
    classifier_heads,
    gce_loss,
    lrt_distort,
    rewrite_attention,
    ruam_update,
    softmax_entropy,
    udl_loss,
    ve_loss,
)

TOLERANCE = 1e-4


def _draw(seed, shape):
    return RngStream(seed).normal(shape)


def _taped(f):
    """Run ``f`` on a tape with a tracked input, also for the untaped finite-difference calls."""

    def wrapped(x):
        if active_tape() is not None and x.tracked:
            return f(x)
        with Tape():
            return f(Tensor(x.data, requires_grad=True))

    return wrapped


class TestCompositeGradients:
    """Unit tests comparing tape gradients of whole sub-models with central differences."""

    def test_attention_fusion(self):
        """Test gradients through the per-cell attention and the pooled feature."""
        attention = FusionAttention(3, 4, 5, RngStream(0))
        weights = Tensor(_draw(1, 3))

        def fused(grid, q, h):
            context, _ = attend_fuse(
                ImageEmbedding(grid), TextEncoding(q), TextEncoding(h), attention
            )
            return T.tsum(context.f * weights)

        inputs = [_draw(2, (3, 2, 2)), _draw(3, 4), _draw(4, 4)]
        assert check_gradients(fused, inputs) < TOLERANCE

    def test_distorted_logit_loss(self):
        """Test gradients of the sampled cross-entropy wrt logits and raw variances."""

        def loss(logits, raw_variance):
            pair = LogitVariancePair(logits, T.softplus(raw_variance))
            return gce_loss(lrt_distort(pair, 5, RngStream(11)), 2)

        assert check_gradients(loss, [_draw(5, 4), _draw(6, 4)]) < TOLERANCE

    def test_aleatoric_total(self):
        """Test gradients of the summed uncertainty losses in the active VE branch."""

        def loss(logits, raw_variance):
            pair = LogitVariancePair(logits, T.softplus(raw_variance) + 1.0)
            l_gce = gce_loss(lrt_distort(pair, 4, RngStream(12)), 1)
            l_ve = ve_loss(pair, softmax_entropy(logits))
            l_udl = udl_loss(ce_loss(pair, 1), l_gce)
            return aleatoric_total(l_gce, l_ve, l_udl)

        inputs = [_draw(7, 3) * 0.5, _draw(8, 3) * 0.5]
        assert check_gradients(loss, inputs) < TOLERANCE

    @pytest.mark.parametrize("renormalize", [False, True])
    def test_attention_rewrite(self, renormalize):
        """Test gradients of the rewritten context wrt attention scores, grid and f."""
        nabla = np.array([[0.3, -0.7], [1.2, -0.4]])
        weights = Tensor(_draw(9, 3))

        def rewritten(scores, grid, f):
            alpha = T.reshape(T.softmax(T.reshape(scores, (4,))), (2, 2))
            state = rewrite_attention(
                AttentionMap(alpha), nabla, grid, f, gamma_neg=-2.0, renormalize=renormalize
            )
            return T.tsum(state.f_dprime * weights)

        inputs = [_draw(10, (2, 2)), _draw(11, (3, 2, 2)), _draw(12, 3)]
        assert check_gradients(rewritten, inputs) < TOLERANCE

    @pytest.mark.parametrize("renormalize", [False, True])
    def test_rewrite_driven_by_uncertainty_gradient(self, renormalize):
        """Test gradients through the whole rewrite, including its uncertainty gradient map."""
        attention = FusionAttention(3, 4, 5, RngStream(40))
        q, h = Tensor(_draw(41, 4)), Tensor(_draw(42, 4))
        weights = Tensor(_draw(43, 3))

        def rewritten(grid):
            context, alpha = attend_fuse(
                ImageEmbedding(grid), TextEncoding(q), TextEncoding(h), attention
            )
            l_u = T.tsum(T.square(T.tanh(grid)) * grid) + T.tsum(T.square(context.f))
            context, _ = ruam_update(
                context, alpha, ImageEmbedding(grid), l_u, 0.5, renormalize=renormalize
            )
            return T.tsum(context.f * weights)

        assert check_gradients(_taped(rewritten), [_draw(44, (3, 2, 2))]) < TOLERANCE

    def test_rewrite_driven_by_head_losses(self):
        """Test gradients from the grid through the heads, uncertainty losses and rewrite."""
        attention = FusionAttention(3, 4, 5, RngStream(45))
        heads = ClassifierHeads(7, 6, 3, RngStream(46), dropout=0.0)
        q, h = Tensor(_draw(47, 4)), Tensor(_draw(48, 4))
        keys = Tensor(_draw(49, (4, 3)))
        weights = Tensor(_draw(50, 3))

        def rewritten(grid):
            img = ImageEmbedding(grid)
            context, alpha = attend_fuse(img, TextEncoding(q), TextEncoding(h), attention)
            pair = classifier_heads(context, heads, None, keys)
            l_gce = gce_loss(lrt_distort(pair, 4, RngStream(51)), 1)
            l_ve = ve_loss(pair, softmax_entropy(pair.logits))
            l_u = aleatoric_total(l_gce, l_ve, udl_loss(ce_loss(pair, 1), l_gce))
            context, _ = ruam_update(context, alpha, img, l_u, 1.0)
            return T.tsum(context.f * weights)

        assert check_gradients(_taped(rewritten), [_draw(52, (3, 2, 2))]) < TOLERANCE

    def test_kl_wrt_context(self):
        """Test gradients of the latent KL term through the latent projection."""
        head = LatentHead(5, 3, RngStream(13))

        def loss(f):
            return kl_loss(project_latent(f, head))

        assert check_gradients(loss, [_draw(14, 5)]) < TOLERANCE

    def test_logits_wrt_context(self):
        """Test gradients of the candidate logits through the dropout trunk."""
        heads = ClassifierHeads(5, 6, 3, RngStream(15), dropout=0.3)
        keys = Tensor(_draw(16, (4, 3)))
        weights = Tensor(_draw(17, 4))

        def logits(f):
            pair = classifier_heads(f, heads, RngStream(18), keys)
            return T.tsum(pair.logits * weights) + T.tsum(pair.variance)

        assert check_gradients(logits, [_draw(19, 5)]) < TOLERANCE

    def test_candidate_scores_wrt_latent(self):
        """Test gradients of teacher-forced candidate likelihoods wrt the latent."""
        decoder = AnswerDecoder(9, 3, 4, RngStream(20))

        def scores(z):
            return T.tsum(score_candidates(z, decoder, [[4, 5], [6], [7, 8, 4]]))

        assert check_gradients(scores, [_draw(21, 4)]) < TOLERANCE

    def test_diversity_loss(self):
        """Test gradients of the pairwise cosine diversity loss wrt the samples."""

        def loss(samples):
            return diversity_loss(LatentSampleSet(samples))

        assert check_gradients(loss, [_draw(22, (4, 3))]) < TOLERANCE


class TestOracles:
    """Unit tests checking closed forms against independent computations."""

    def test_kl_against_quadrature(self):
        """Test the closed-form KL against a Riemann sum of q log(q/p)."""
        mu, log_var = 0.3, -0.2
        closed = kl_loss(LatentGaussian(Tensor([mu]), Tensor([log_var]))).item()

        z, dz = np.linspace(-12.0, 12.0, 240001, retstep=True)
        var = math.exp(log_var)
        log_q = -0.5 * (z - mu) ** 2 / var - 0.5 * math.log(2 * math.pi * var)
        log_p = -0.5 * z**2 - 0.5 * math.log(2 * math.pi)
        numeric = float(np.sum(np.exp(log_q) * (log_q - log_p)) * dz)

        assert closed == pytest.approx(numeric, abs=1e-6)

    def test_diversity_against_double_loop(self):
        """Test the vectorized diversity loss against a plain pairwise loop."""
        samples = _draw(30, (4, 3))
        centered = samples - samples.mean(axis=0)
        total, pairs = 0.0, 0
        for i in range(4):
            for j in range(i + 1, 4):
                a, b = centered[i], centered[j]
                total += a @ b / (np.linalg.norm(a) * np.linalg.norm(b))
                pairs += 1

        loss = diversity_loss(LatentSampleSet(Tensor(samples))).item()
        assert loss == pytest.approx(total / pairs, abs=1e-12)

    @pytest.mark.parametrize("T_samples", [1, 5, 25])
    def test_dropout_off_matches_deterministic_pass(self, T_samples):
        """Test that with zero dropout the MC mean equals the deterministic prediction."""
        heads = ClassifierHeads(5, 6, 4, RngStream(31), dropout=0.0)
        x = Tensor(_draw(32, 5))

        def model(inputs, rng):
            return T.softmax(classifier_heads(inputs, heads, rng).logits).numpy()

        samples = predictive_posterior(model, x, T_samples, RngStream(33))
        np.testing.assert_allclose(samples.mean_probs(), model(x, None), atol=1e-12)

    def test_gce_equals_ce_without_variance(self):
        """Test that undistorted sampling reduces the sampled loss to cross-entropy."""
        rng = RngStream(34)
        for trial in range(100):
            logits = rng.normal(6) * 3.0
            pair = LogitVariancePair(Tensor(logits), Tensor(np.zeros(6)))
            target = trial % 6
            gce = gce_loss(lrt_distort(pair, 7, RngStream(trial)), target).item()
            assert gce == pytest.approx(ce_loss(pair, target).item(), abs=1e-12)

    def test_rewrite_algebra(self):
        """Test the attention rewrite against its elementwise definition."""
        rng = RngStream(35)
        gamma = -2.0
        for _ in range(100):
            alpha = rng.uniform((2, 3)) + 0.01
            alpha /= alpha.sum()
            nabla = rng.normal((2, 3))
            grid = rng.normal((4, 2, 3))
            f = rng.normal(4)
            state = rewrite_attention(
                AttentionMap(Tensor(alpha)), nabla, Tensor(grid), Tensor(f), gamma
            )

            prime = nabla * alpha
            dprime = np.where(prime > 0, prime, -gamma * prime)
            new = alpha + dprime * alpha
            np.testing.assert_allclose(state.alpha_dprime.numpy(), dprime, atol=1e-12)
            np.testing.assert_allclose(state.alpha_new.numpy(), new, atol=1e-12)
            np.testing.assert_allclose(
                state.f_dprime.numpy(), f + grid.reshape(4, 6) @ new.reshape(6), atol=1e-12
            )
