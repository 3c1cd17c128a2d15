"""The visual dialog model: encoders, attention fusion, uncertainty heads and decoder."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from dotenv import dotenv_values

from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tensor
from uqrank.domain_model.outputs import DialogOutput, RoundOutput
from uqrank.domain_model.records import UNK, EncodedDialog, EncodedRound
from uqrank.globals.errors import ConfigError, ShapeError, UsageError
from uqrank.globals.run_config import RunConfig, parse_run_config
from uqrank.modules import decoder as dec
from uqrank.modules import uncertainty as unc
from uqrank.modules.base import Module
from uqrank.modules.bayesian import BayesianConvStack, BayesianLSTM
from uqrank.modules.fusion import (
    CandidateEncoder,
    Embedding,
    FusionAttention,
    HistoryUpdater,
    ImageEmbedding,
    TextEncoding,
    attend_fuse,
    encode_candidates,
    encode_image,
    encode_text,
    update_history,
)

logger = logging.getLogger(__name__)

IMAGE_CHANNELS = 3
IMAGE_PX = 32
WEIGHTS_FILE = "weights.npz"
CONFIG_FILE = "config.txt"
VOCAB_FILE = "vocab.txt"

# substreams of one round
_QUESTION, _HEADS, _LRT, _LRT_REWRITTEN, _LATENT, _ANSWER = range(6)


def conv_channels(n_layers: int) -> Tuple[int, ...]:
    return (IMAGE_CHANNELS,) + tuple(min(8 * 2**i, 32) for i in range(n_layers))


@dataclass(frozen=True)
class ForwardOptions:
    """
    What a forward pass computes beyond the classifier outputs.

    Attributes:
        training: Use the ground-truth class for the uncertainty loss (else the predicted one)
        latent_losses: Sample latents and compute KL, DIV and TOK
        likelihoods: Score candidates with the decoder at ``z = mu``
    """

    training: bool = True
    latent_losses: bool = True
    likelihoods: bool = False


class VisualDialogModel(Module):
    """
    Probabilistic visual dialog model.

    Per dialog the image is encoded once; per round the question is encoded, fused with the
    image under attention conditioned on the dialog history, scored against the candidate
    answers with logit/variance heads, optionally rewritten by the uncertainty gradient,
    and passed to the variational answer decoder.
    """

    def __init__(self, config: RunConfig, vocab_size: int) -> None:
        if vocab_size < 4:
            raise UsageError("vocabulary must hold at least the reserved tokens")
        init = RngStream(config.seed).split(0)
        channels = conv_channels(len(config.conv_dropout))
        h = config.hidden_dim
        self.cnn = BayesianConvStack(
            channels, config.conv_dropout, init.split(0), config.conv_placement, config.pooling
        )
        self.embedder = Embedding(vocab_size, config.embed_dim, init.split(1))
        self.question_lstm = BayesianLSTM(
            config.embed_dim, h, init.split(2), config.lstm_dropout, config.lstm_output_dropout
        )
        self.history_lstm = BayesianLSTM(
            config.embed_dim, h, init.split(3), config.lstm_dropout, config.lstm_output_dropout
        )
        self.history = HistoryUpdater(h, init.split(4))
        self.attention = FusionAttention(channels[-1], h, h, init.split(5))
        self.candidate_encoder = CandidateEncoder(config.embed_dim, h, init.split(6))
        fused = channels[-1] + h
        self.heads = unc.ClassifierHeads(
            fused, config.trunk_dim, h, init.split(7), config.fc_dropout
        )
        self.latent_head = dec.LatentHead(fused, config.z_dim, init.split(8))
        self.decoder = dec.AnswerDecoder(vocab_size, config.embed_dim, config.z_dim, init.split(9))
        self.config = config
        self.vocab_size = vocab_size

    def _image(self, image: Optional[np.ndarray]) -> np.ndarray:
        if image is None:
            return np.zeros((IMAGE_CHANNELS, IMAGE_PX, IMAGE_PX))
        if image.ndim != 3 or image.shape[0] != IMAGE_CHANNELS:
            raise ShapeError(f"expected a {IMAGE_CHANNELS}-channel image, got {image.shape}")
        return image

    def _drop(self, rng: Optional[RngStream], *path: int) -> Optional[RngStream]:
        return None if rng is None else rng.split(*path)

    def forward_dialog(
        self,
        dialog: EncodedDialog,
        rng: Optional[RngStream],
        options: ForwardOptions = ForwardOptions(),
        sample_rng: Optional[RngStream] = None,
    ) -> DialogOutput:
        """
        Run all rounds of one dialog.

        Must run inside an active :class:`~uqrank.autodiff.tensor.Tape` when the attention
        rewrite is enabled.

        Args:
            dialog: Token ids and image of the dialog
            rng: Dropout stream; None disables dropout
            options: Which extra outputs to compute
            sample_rng: Stream of the reparameterization noise (LRT and latents); defaults
                to a fixed substream of the run seed
        """
        noise = sample_rng or RngStream(self.config.seed, (99,))
        img = encode_image(self._image(dialog.image), self.cnn, self._drop(rng, 0))
        caption = dialog.caption or [UNK]
        history = encode_text(caption, self.embedder, self.history_lstm, self._drop(rng, 1))
        out = DialogOutput(dialog.dialog_id)
        for r, rnd in enumerate(dialog.rounds):
            drop = self._drop(rng, 2, r)
            result, q = self._round(img, history, rnd, drop, noise.split(r), options)
            out.rounds.append(result)
            answer = encode_text(
                rnd.answer or [UNK],
                self.embedder,
                self.history_lstm,
                None if drop is None else drop.split(_ANSWER),
            )
            history = update_history(history, q, answer, self.history)
        return out

    def _round(
        self,
        img: ImageEmbedding,
        history: TextEncoding,
        rnd: EncodedRound,
        drop: Optional[RngStream],
        noise: RngStream,
        options: ForwardOptions,
    ) -> Tuple[RoundOutput, TextEncoding]:
        config = self.config

        def sub(i: int) -> Optional[RngStream]:
            return None if drop is None else drop.split(i)

        q = encode_text(rnd.question or [UNK], self.embedder, self.question_lstm, sub(_QUESTION))
        context, alpha = attend_fuse(img, q, history, self.attention)
        keys = encode_candidates(rnd.candidates, self.embedder, self.candidate_encoder)
        pair = unc.classifier_heads(context, self.heads, sub(_HEADS), keys)
        label = rnd.gt_index if options.training else int(np.argmax(pair.logits.data))
        terms = self._uncertainty_terms(pair, label, noise.split(_LRT))
        l_u = unc.aleatoric_total(terms["GCE"], terms["VE"], terms["UDL"])

        ruam = None
        latent_input = context
        attention_used = alpha.alpha.numpy()
        if config.ruam_enabled:
            context, ruam = unc.ruam_update(
                context,
                alpha,
                img,
                l_u,
                config.lambda_ruam,
                config.gamma_neg,
                config.ruam_renormalize,
            )
            attention_used = ruam.alpha_new.numpy()
            if config.ruam_feeds_latent:
                latent_input = context
            pair = unc.classifier_heads(context, self.heads, sub(_HEADS), keys)
            terms = self._uncertainty_terms(pair, label, noise.split(_LRT_REWRITTEN))

        losses = dict(terms)
        losses["CE"] = unc.ce_loss(pair, label)
        latent = dec.project_latent(latent_input, self.latent_head)
        likelihoods = None
        if options.latent_losses:
            losses.update(self._latent_losses(latent, rnd, noise.split(_LATENT)))
        if options.likelihoods and rnd.candidates:
            scores = dec.score_candidates(latent.mu, self.decoder, rnd.candidates)
            likelihoods = scores.numpy()
        flagged = unc.aleatoric_total(
            terms["GCE"], terms["VE"], terms["UDL"], config.loss_flags
        )
        result = RoundOutput(
            pair=pair,
            losses=losses,
            uncertainty_loss=flagged,
            attention=attention_used,
            ruam=ruam,
            latent=latent,
            likelihoods=likelihoods,
        )
        return result, q

    def _uncertainty_terms(
        self, pair: unc.LogitVariancePair, label: int, noise: RngStream
    ) -> Dict[str, Tensor]:
        config = self.config
        distorted = unc.lrt_distort(pair, config.t_lrt, noise)
        gce = unc.gce_loss(distorted, label)
        ce = unc.ce_loss(pair, label)
        ve = unc.ve_loss(pair, unc.softmax_entropy(pair.logits))
        udl = unc.udl_loss(ce, gce, config.udl_literal)
        return {"GCE": gce, "VE": ve, "UDL": udl}

    def _latent_losses(
        self, latent: dec.LatentGaussian, rnd: EncodedRound, noise: RngStream
    ) -> Dict[str, Tensor]:
        losses = {"KL": dec.kl_loss(latent)}
        samples = dec.sample_latents(latent, self.config.k_latent, noise)
        if samples.k >= 2:
            losses["DIV"] = dec.diversity_loss(samples)
        if rnd.answer:
            step_logits, targets = dec.teacher_forced_logits(
                samples.samples[0], self.decoder, rnd.answer
            )
            losses["TOK"] = dec.token_ce_loss(step_logits, targets)
        return losses

    def diversity_rows(
        self, latent: dec.LatentGaussian, m: int, rng: RngStream, source: str
    ) -> np.ndarray:
        """``m`` sampled answer embeddings of one round: latent samples or decoder states."""
        samples = dec.sample_latents(latent, m, rng)
        if source == "latent":
            return samples.samples.numpy()
        rows = [
            dec.generate(samples.samples[j], self.decoder).hidden for j in range(samples.k)
        ]
        return np.stack(rows)

    def save(self, directory: Path) -> Path:
        """Write ``weights.npz`` and the config text into ``directory``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.savez(directory / WEIGHTS_FILE, **self.state_dict())
        (directory / CONFIG_FILE).write_text(self.config.to_text(), encoding="utf-8")
        logger.info("saved model to %s", directory)
        return directory / WEIGHTS_FILE


def load_model(directory: Path, config: Optional[RunConfig] = None) -> VisualDialogModel:
    """
    Rebuild a saved model.

    Args:
        directory: Directory holding ``weights.npz`` and ``config.txt``
        config: Overrides the saved config; model sizes must still match the weights

    Raises:
        ConfigError: If the directory holds no saved model
        ShapeError: If the weights do not fit the model built from the config
    """
    directory = Path(directory)
    if not (directory / WEIGHTS_FILE).is_file() or not (directory / CONFIG_FILE).is_file():
        raise ConfigError(f"no saved model in {directory}")
    if config is None:
        config = parse_run_config(dict(dotenv_values(directory / CONFIG_FILE)))
    with np.load(directory / WEIGHTS_FILE) as archive:
        state = {key: archive[key] for key in archive.files}
    vocab_size = state["embedder.table"].shape[0]
    model = VisualDialogModel(config, vocab_size)
    model.load_state_dict(state)
    return model

