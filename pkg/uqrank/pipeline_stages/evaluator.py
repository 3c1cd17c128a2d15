"""Monte-Carlo evaluation: rankings, retrieval metrics, uncertainty and diversity."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from uqrank.autodiff.rng import RngStream
from uqrank.autodiff.tensor import Tape
from uqrank.domain_model.outputs import DialogOutput
from uqrank.domain_model.records import Batch, EncodedDialog
from uqrank.domain_model.results import MetricsRow, UncertaintyRow
from uqrank.globals.problems import Problems
from uqrank.globals.process_stage import ProcessStage
from uqrank.globals.run_config import RunConfig
from uqrank.metrics.diversity import LatentMatrix, svd_diversity
from uqrank.metrics.retrieval import RankedList, mean_ndcg, retrieval_metrics
from uqrank.modules.bayesian import MCSampleSet
from uqrank.modules.uncertainty import predictive_uncertainty
from uqrank.training.model import ForwardOptions, VisualDialogModel

logger = logging.getLogger(__name__)

EVAL_STREAM = 2
ATTENTION_DIALOGS = 5
LIKELIHOOD_SUFFIX = "-lik"


@dataclass
class Evaluation:
    """
    Everything an evaluation pass produced.

    Attributes:
        metrics: One row for the MC-probability ranking and one for the decoder likelihoods
        uncertainty: One row per dialog round
        attention: Attention grids of the first dialogs, keyed by ``<dialog_id>-<round>``
        sigma_o: Mean SVD diversity over the sampled dialogs
    """

    metrics: List[MetricsRow] = field(default_factory=list)
    uncertainty: List[UncertaintyRow] = field(default_factory=list)
    attention: Dict[str, np.ndarray] = field(default_factory=dict)
    sigma_o: float = float("nan")


class Evaluator(ProcessStage[Sequence[Batch], Evaluation]):
    """
    Scores every round with ``t_mc`` stochastic passes (one pass with dropout off when
    ``mc_active_at_eval`` is false) and ranks candidates by the mean probability.
    """

    def __init__(
        self,
        problems: Problems,
        model: VisualDialogModel,
        config: Optional[RunConfig] = None,
        run_id: str = "run",
    ) -> None:
        super().__init__(problems)
        self.model = model
        self.config = config or model.config
        self.run_id = run_id
        self.options = ForwardOptions(training=False, latent_losses=False, likelihoods=True)

    def process(self, batches: Sequence[Batch]) -> Evaluation:
        dialogs = [d for b in batches for d in b.dialogs() if d.rounds]
        evaluation = Evaluation()
        by_probability: List[RankedList] = []
        by_likelihood: List[RankedList] = []
        diversity: List[float] = []
        stream = RngStream(self.config.seed).split(EVAL_STREAM)
        for i, dialog in enumerate(dialogs):
            passes = self.sample(dialog, stream.split(0, i))
            first = passes[0]
            for r, rnd in enumerate(dialog.rounds):
                samples = MCSampleSet(
                    np.stack([p.rounds[r].probabilities() for p in passes]),
                    np.stack([p.rounds[r].variances() for p in passes]),
                )
                report = predictive_uncertainty(samples)
                evaluation.uncertainty.append(
                    UncertaintyRow(
                        dialog.dialog_id,
                        r,
                        report.entropy,
                        report.aleatoric_mean,
                        report.epistemic_var,
                        report.sigma_sq_p,
                    )
                )
                by_probability.append(
                    RankedList(samples.mean_probs(), rnd.gt_index, rnd.relevance)
                )
                likelihoods = first.rounds[r].likelihoods
                if likelihoods is not None:
                    by_likelihood.append(RankedList(likelihoods, rnd.gt_index, rnd.relevance))
                if i < ATTENTION_DIALOGS:
                    evaluation.attention[f"{dialog.dialog_id}-{r}"] = first.rounds[r].attention
            if i < self.config.diversity_dialogs:
                diversity.append(self.diversity(first, stream.split(1, i)))
        if not dialogs:
            self.report("evaluation", "no dialogs to evaluate", "empty")
            return evaluation
        evaluation.sigma_o = float(np.mean(diversity)) if diversity else float("nan")
        evaluation.metrics.append(self._row(self.run_id, by_probability, evaluation.sigma_o))
        if by_likelihood:
            evaluation.metrics.append(
                self._row(self.run_id + LIKELIHOOD_SUFFIX, by_likelihood, evaluation.sigma_o)
            )
        logger.info("evaluated %d dialogs", len(dialogs))
        return evaluation

    def sample(self, dialog: EncodedDialog, stream: RngStream) -> List[DialogOutput]:
        """The MC passes over one dialog."""
        count = self.config.t_mc if self.config.mc_active_at_eval else 1
        quiet = ForwardOptions(False, False, False)
        return [
            self._pass(dialog, stream, t, self.options if t == 0 else quiet) for t in range(count)
        ]

    def _pass(
        self, dialog: EncodedDialog, stream: RngStream, t: int, options: ForwardOptions
    ) -> DialogOutput:
        with Tape():
            return self.model.forward_dialog(
                dialog,
                stream.split(t, 0) if self.config.mc_active_at_eval else None,
                options,
                sample_rng=stream.split(t, 1),
            )

    def measure_diversity(self, batches: Sequence[Batch]) -> float:
        """
        Mean ``sigma_o`` over the first ``diversity_dialogs`` dialogs, from the same first pass
        that :meth:`process` uses.
        """
        dialogs = [d for b in batches for d in b.dialogs() if d.rounds]
        stream = RngStream(self.config.seed).split(EVAL_STREAM)
        options = ForwardOptions(False, False, False)
        scores = [
            self.diversity(self._pass(dialog, stream.split(0, i), 0, options), stream.split(1, i))
            for i, dialog in enumerate(dialogs[: self.config.diversity_dialogs])
        ]
        if not scores:
            self.report("diversity", "no dialogs to sample", "empty")
            return float("nan")
        return float(np.mean(scores))

    def diversity(self, output: DialogOutput, stream: RngStream) -> float:
        """``sigma_o`` of the final round's sampled answer embeddings."""
        latent = output.rounds[-1].latent
        if latent is None:
            return float("nan")
        rows = self.model.diversity_rows(
            latent, self.config.diversity_samples, stream, self.config.diversity_source
        )
        return svd_diversity(LatentMatrix(rows))

    def _row(self, run_id: str, lists: List[RankedList], sigma_o: float) -> MetricsRow:
        metrics = retrieval_metrics(lists)
        return MetricsRow(
            run_id=run_id,
            R1=metrics.recall[1],
            R5=metrics.recall[5],
            R10=metrics.recall[10],
            MRR=metrics.mrr,
            mean_rank=metrics.mean_rank,
            NDCG=mean_ndcg(lists),
            sigma_o=sigma_o,
        )


def evaluate(
    model: VisualDialogModel,
    batches: Sequence[Batch],
    config: Optional[RunConfig] = None,
    run_id: str = "run",
    problems: Optional[Problems] = None,
) -> Evaluation:
    return Evaluator(problems or Problems(), model, config, run_id).process(batches)
