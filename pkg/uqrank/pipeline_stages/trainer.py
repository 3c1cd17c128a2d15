"""Minimizes the combined cost with Adam over the training batches."""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tape
from uqrank.domain_model.records import Batch
from uqrank.globals.errors import NonFiniteLossError, UsageError
from uqrank.globals.problems import Problems
from uqrank.globals.process_stage import ProcessStage
from uqrank.globals.run_config import RunConfig
from uqrank.training.cost import check_finite, total_cost
from uqrank.training.model import ForwardOptions, VisualDialogModel
from uqrank.training.optimizer import Adam

logger = logging.getLogger(__name__)

LATENT_FLAGS = frozenset({"KL", "DIV", "TOK"})
TRAIN_STREAM = 1


class Trainer(ProcessStage[Sequence[Batch], List[Dict[str, float]]]):
    """
    Trains a model in place and returns the per-epoch mean loss components.

    Every dialog runs on its own tape; its gradients are summed into the batch gradient in
    batch order and the mean is applied in one optimizer step.
    """

    def __init__(
        self,
        problems: Problems,
        model: VisualDialogModel,
        config: Optional[RunConfig] = None,
    ) -> None:
        super().__init__(problems)
        self.model = model
        self.config = config or model.config
        self.params = model.parameters()
        self.optimizer = Adam(self.params, lr=self.config.lr)
        self.options = ForwardOptions(
            training=True, latent_losses=bool(self.config.loss_flags & LATENT_FLAGS)
        )

    def process(self, batches: Sequence[Batch]) -> List[Dict[str, float]]:
        if self.config.epochs > 0 and not any(len(b) for b in batches):
            raise UsageError("cannot train on an empty dataset")
        history = []
        for epoch in range(1, self.config.epochs + 1):
            history.append(self.run_epoch(batches, epoch))
            logger.info(
                "epoch %d: %s",
                epoch,
                " ".join(f"{k}={v:.4f}" for k, v in history[-1].items()),
            )
        return history

    def run_epoch(self, batches: Sequence[Batch], epoch: int) -> Dict[str, float]:
        stream = RngStream(self.config.seed).split(TRAIN_STREAM, epoch)
        order = stream.split(0).permutation(len(batches))
        components: Dict[str, List[float]] = {}
        for position, b in enumerate(order):
            values = self.step(batches[int(b)], stream.split(1, position), epoch)
            for name, value in values.items():
                components.setdefault(name, []).extend(value)
        return {name: float(np.mean(v)) for name, v in components.items()}

    def step(self, batch: Batch, stream: RngStream, epoch: int) -> Dict[str, List[float]]:
        """One optimizer step on ``batch``; returns the per-dialog component values."""
        grads = [np.zeros_like(p.data) for p in self.params]
        values: Dict[str, List[float]] = {}
        dialogs = [d for d in batch.dialogs() if d.rounds]
        for j, dialog in enumerate(dialogs):
            rng = stream.split(j)
            with Tape() as tape:
                out = self.model.forward_dialog(
                    dialog, rng.split(0), self.options, sample_rng=rng.split(1)
                )
                check_finite(out.rounds, epoch)
                cost = total_cost(out.rounds, self.config.loss_flags, self.config.eta)
                if not np.isfinite(cost.item()):
                    raise NonFiniteLossError("total", epoch)
                for acc, g in zip(grads, tape.gradient(cost, self.params)):
                    acc += g
            for name, value in out.component_values().items():
                values.setdefault(name, []).append(value)
            values.setdefault("total", []).append(cost.item())
        if dialogs:
            self.optimizer.step([g / len(dialogs) for g in grads])
            logger.debug("batch of %d dialogs, cost %.4f", len(dialogs), np.mean(values["total"]))
        return values


def train(
    model: VisualDialogModel,
    batches: Sequence[Batch],
    config: Optional[RunConfig] = None,
    problems: Optional[Problems] = None,
) -> List[Dict[str, float]]:
    """Train ``model`` in place; returns the per-epoch loss components."""
    return Trainer(problems or Problems(), model, config).process(batches)
