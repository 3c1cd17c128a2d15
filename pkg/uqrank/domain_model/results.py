"""Results of training, evaluation and ablation runs."""
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

METRIC_COLUMNS = ("run_id", "R1", "R5", "R10", "MRR", "mean_rank", "NDCG", "sigma_o")
UNCERTAINTY_COLUMNS = ("dialog_id", "round", "entropy", "aleatoric", "epistemic", "sigma2_p")
LOSS_COLUMNS = ("epoch", "component", "value")


@dataclass(frozen=True)
class MetricsRow:
    run_id: str
    R1: float
    R5: float
    R10: float
    MRR: float
    mean_rank: float
    NDCG: float
    sigma_o: float


@dataclass(frozen=True)
class UncertaintyRow:
    dialog_id: int
    round: int
    entropy: float
    aleatoric: float
    epistemic: float
    sigma2_p: float


@dataclass
class ExperimentResult:
    """
    Outcome of one run.

    Attributes:
        run_id: Name of the run, used as the metrics row key
        config_text: The run config in ``key = value`` form
        epoch_losses: Per epoch, the mean value of every loss component, ``total`` and the
            mean predicted aleatoric ``variance``
        metrics: Metrics rows, one per ranking source
        uncertainty: One row per evaluated dialog round
        attention: Attention grids keyed by ``<dialog_id>-<round>``
        wall_clock: Seconds spent in training and evaluation
        parameters: Read-only parameter snapshot taken after training
    """

    run_id: str
    config_text: str = ""
    epoch_losses: List[Dict[str, float]] = field(default_factory=list)
    metrics: List[MetricsRow] = field(default_factory=list)
    uncertainty: List[UncertaintyRow] = field(default_factory=list)
    attention: Dict[str, np.ndarray] = field(default_factory=dict)
    wall_clock: float = 0.0
    parameters: Dict[str, np.ndarray] = field(default_factory=dict)

    def snapshot(self, state: Dict[str, np.ndarray]) -> None:
        """Store read-only copies of the given parameter values."""
        self.parameters = {}
        for name, values in state.items():
            frozen = np.array(values, copy=True)
            frozen.setflags(write=False)
            self.parameters[name] = frozen

    def uncertainty_summary(self) -> Dict[str, float]:
        """Mean and standard deviation of the aleatoric and epistemic columns."""
        aleatoric = np.array([row.aleatoric for row in self.uncertainty])
        epistemic = np.array([row.epistemic for row in self.uncertainty])
        if aleatoric.size == 0:
            nan = float("nan")
            return dict.fromkeys(
                ("aleatoric_mean", "aleatoric_std", "epistemic_mean", "epistemic_std"), nan
            )
        return {
            "aleatoric_mean": float(aleatoric.mean()),
            "aleatoric_std": float(aleatoric.std()),
            "epistemic_mean": float(epistemic.mean()),
            "epistemic_std": float(epistemic.std()),
        }

    def primary_metrics(self) -> Optional[MetricsRow]:
        return self.metrics[0] if self.metrics else None


@dataclass(frozen=True)
class AblationRow:
    """One variant of an ablation sweep with its headline numbers."""

    mode: str
    variant: str
    R1: float
    R5: float
    R10: float
    MRR: float
    mean_rank: float
    NDCG: float
    aleatoric_mean: float
    aleatoric_std: float
    epistemic_mean: float
    epistemic_std: float


@dataclass
class AblationTable:
    mode: str
    rows: List[AblationRow] = field(default_factory=list)
    results: List[ExperimentResult] = field(default_factory=list)
