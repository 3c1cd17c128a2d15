"""Pipeline running one experiment from dialogs to metrics."""
import logging
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from uqrank.domain_model.records import Batch, DialogRecord, Limits, SyntheticTaskSpec, Vocab
from uqrank.domain_model.results import ExperimentResult
from uqrank.globals.errors import UsageError
from uqrank.globals.problems import Problem, ProblemLevel, Problems
from uqrank.globals.run_config import RunConfig
from uqrank.pipeline_stages.batcher import Batcher
from uqrank.pipeline_stages.evaluator import Evaluation, Evaluator
from uqrank.pipeline_stages.loader import VisDialLoader
from uqrank.pipeline_stages.synthetic import SyntheticGenerator
from uqrank.pipeline_stages.trainer import Trainer
from uqrank.pipeline_stages.vocab_builder import VocabBuilder
from uqrank.training.model import VisualDialogModel

logger = logging.getLogger(__name__)

VAL_SEED_OFFSET = 10007


@dataclass(frozen=True)
class DataSource:
    """
    Where the dialogs come from.

    Attributes:
        train: VisDial-schema training file; synthetic dialogs when None
        val: VisDial-schema validation file; synthetic dialogs when None
    """

    train: Optional[Path] = None
    val: Optional[Path] = None


def synthetic_spec(
    config: RunConfig, split: str, noise_gamma: Optional[float] = None
) -> SyntheticTaskSpec:
    """Generation spec of the synthetic ``train`` or ``val`` split of a run."""
    val = split == "val"
    return SyntheticTaskSpec(
        seed=config.seed + (VAL_SEED_OFFSET if val else 0),
        num_dialogs=config.val_dialogs if val else config.train_dialogs,
        rounds_per_dialog=config.rounds_per_dialog,
        num_candidates=config.num_candidates,
        noise_gamma=config.noise_gamma if noise_gamma is None else noise_gamma,
        first_id=config.train_dialogs if val else 0,
    )


def limits_of(config: RunConfig) -> Limits:
    return Limits(config.max_caption, config.max_question, config.max_answer)


class Pipeline(ABC):
    """
    Abstract pipeline for one experiment run.

    Each pipeline instance is bound to a config and a data source and holds the
    problems collection its stages report into.
    """

    def __init__(self, config: RunConfig, run_id: str = "run") -> None:
        self.config = config
        self.run_id = run_id
        self.problems: Problems = Problems()

    @abstractmethod
    def process(self) -> ExperimentResult:
        """
        Run the experiment.

        Returns:
            ExperimentResult: Losses, metrics, uncertainty rows and attention maps.
        """
        pass


class DefaultPipeline(Pipeline):
    """
    Default pipeline implementation.

    Runs the stages in order:
    1. SyntheticGenerator or VisDialLoader - produce dialog records
    2. VocabBuilder - vocabulary over the training split
    3. Batcher - truncate, map to ids and pad
    4. Trainer - minimize the combined cost
    5. Evaluator - MC rankings, metrics, uncertainty and diversity

    Args:
        config: Run configuration
        run_id: Name of the run in result files
        source: Data files; synthetic data when omitted
    """

    def __init__(
        self, config: RunConfig, run_id: str = "run", source: DataSource = DataSource()
    ) -> None:
        super().__init__(config, run_id)
        self.source = source
        self.generator = SyntheticGenerator(self.problems)
        self.loader = VisDialLoader(self.problems, limits_of(config))
        self.vocab_builder = VocabBuilder(self.problems, config.min_count)
        self.model: Optional[VisualDialogModel] = None
        self.vocab: Optional[Vocab] = None

    def process(self) -> ExperimentResult:
        start = time.perf_counter()
        train_records, val_records = self.load()
        model, epoch_losses = self.train(train_records)
        evaluation = self.evaluate(val_records)
        result = ExperimentResult(
            run_id=self.run_id,
            config_text=self.config.to_text(),
            epoch_losses=epoch_losses,
            metrics=evaluation.metrics,
            uncertainty=evaluation.uncertainty,
            attention=evaluation.attention,
        )
        result.snapshot(model.state_dict())
        result.wall_clock = time.perf_counter() - start
        logger.info("run %s finished in %.1f s", self.run_id, result.wall_clock)
        return result

    def load(self) -> Tuple[List[DialogRecord], List[DialogRecord]]:
        """Training records (cut to ``data_fraction``) and validation records."""
        train = self.records("train")
        keep = max(1, math.ceil(len(train) * self.config.data_fraction)) if train else 0
        if keep < len(train):
            self.problems.append(
                Problem(
                    "training data",
                    ProblemLevel.NON,
                    f"using {keep} of {len(train)} dialogs (data_fraction="
                    f"{self.config.data_fraction})",
                    "fraction",
                )
            )
        return train[:keep], self.records("val")

    def records(self, split: str) -> List[DialogRecord]:
        """All records of the ``train`` or ``val`` split, loaded or generated."""
        path = self.source.train if split == "train" else self.source.val
        if path is not None:
            return self.loader.process(path)
        return self.generator.process(synthetic_spec(self.config, split))

    def batches(self, records: Sequence[DialogRecord]) -> List[Batch]:
        if self.vocab is None:
            raise UsageError("batches requested before the vocabulary was built")
        limits = limits_of(self.config)
        return Batcher(self.problems, self.vocab, limits, self.config.batch_size).process(records)

    def train(
        self, records: Sequence[DialogRecord]
    ) -> Tuple[VisualDialogModel, List[Dict[str, float]]]:
        self.vocab = self.vocab_builder.process(records)
        self.model = VisualDialogModel(self.config, len(self.vocab))
        epoch_losses = Trainer(self.problems, self.model, self.config).process(
            self.batches(records)
        )
        return self.model, epoch_losses

    def evaluate(
        self, records: Sequence[DialogRecord], run_id: Optional[str] = None
    ) -> Evaluation:
        if self.model is None:
            raise UsageError("evaluate called before train")
        evaluator = Evaluator(self.problems, self.model, self.config, run_id or self.run_id)
        return evaluator.process(self.batches(records))

    def noisy_val(self, noise_gamma: float) -> List[DialogRecord]:
        """Synthetic validation split regenerated under another noise factor."""
        return self.generator.process(synthetic_spec(self.config, "val", noise_gamma))
