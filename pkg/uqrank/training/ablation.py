"""Ablation sweeps over loss variants, noise, data fraction, dropout placement and eta."""
import logging
import os
from typing import Any, Callable, Dict, List, Optional, Tuple

import yaml

from uqrank.domain_model.results import AblationRow, AblationTable, ExperimentResult
from uqrank.globals.errors import ConfigError, UsageError
from uqrank.globals.run_config import RunConfig
from uqrank.pipeline import DataSource, DefaultPipeline

logger = logging.getLogger(__name__)

MODES = ("losses", "noise", "data-fraction", "dropout-placement", "eta")

Progress = Callable[[str], None]


def default_grid_path() -> str:
    """Path of the ``ablations.yml`` shipped next to this module."""
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "ablations.yml")


def load_grid(path: Optional[str] = None) -> Dict[str, Any]:
    """
    Read an ablation grid file.

    Raises:
        ConfigError: If the file cannot be read or is not a mapping
    """
    path = path or default_grid_path()
    try:
        with open(path, "r", encoding="utf-8") as f:
            grid = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read ablation grid {path}: {e}") from e
    if not isinstance(grid, dict):
        raise ConfigError(f"ablation grid {path} must be a mapping of modes")
    return grid


def row_from(mode: str, variant: str, result: ExperimentResult) -> AblationRow:
    metrics = result.primary_metrics()
    nan = float("nan")
    summary = result.uncertainty_summary()
    return AblationRow(
        mode=mode,
        variant=variant,
        R1=metrics.R1 if metrics else nan,
        R5=metrics.R5 if metrics else nan,
        R10=metrics.R10 if metrics else nan,
        MRR=metrics.MRR if metrics else nan,
        mean_rank=metrics.mean_rank if metrics else nan,
        NDCG=metrics.NDCG if metrics else nan,
        **summary,
    )


class AblationRunner:
    """
    Runs one ablation mode and collects a row per variant.

    Every variant except the noise sweep trains its own model from the same seed. The noise
    sweep trains once and evaluates on validation data regenerated per noise factor.

    Usage:
        runner = AblationRunner(config)
        table = runner.run("losses")

        # custom grid
        runner = AblationRunner(config, "/path/to/grid.yml")
    """

    def __init__(
        self,
        config: RunConfig,
        grid_path: Optional[str] = None,
        source: DataSource = DataSource(),
        progress: Optional[Progress] = None,
    ) -> None:
        self.config = config
        self.grid = load_grid(grid_path)
        self.source = source
        self.progress = progress or (lambda _: None)

    def run(self, mode: str) -> AblationTable:
        """
        Raises:
            UsageError: For an unknown mode, or the noise mode on file-based validation data
            ConfigError: If the grid lacks the mode or holds invalid settings
        """
        if mode not in MODES:
            raise UsageError(f"unknown ablation mode {mode!r}, expected one of {', '.join(MODES)}")
        if mode not in self.grid:
            raise ConfigError(f"ablation grid has no entry for {mode}")
        if mode == "noise":
            return self._noise(self.grid[mode])
        table = AblationTable(mode)
        for variant, config in self.variants(mode):
            self.progress(f"{mode}: {variant}")
            result = DefaultPipeline(config, f"{mode}-{variant}", self.source).process()
            table.results.append(result)
            table.rows.append(row_from(mode, variant, result))
            logger.info("ablation %s variant %s done", mode, variant)
        return table

    def variants(self, mode: str) -> List[Tuple[str, RunConfig]]:
        """Variant labels and the configs they train with."""
        entry = self.grid[mode]
        try:
            if mode == "losses":
                return [
                    (name, self.config.with_overrides(loss_flags=frozenset(flags)))
                    for name, flags in entry.items()
                ]
            if mode == "data-fraction":
                return [
                    (f"{round(float(f) * 100)}%", self.config.with_overrides(data_fraction=f))
                    for f in map(float, entry)
                ]
            if mode == "dropout-placement":
                return [
                    (name, self.config.with_overrides(**settings))
                    for name, settings in entry.items()
                ]
            if mode == "eta":
                return [(f"eta={e}", self.config.with_overrides(eta=float(e))) for e in entry]
        except (AttributeError, TypeError, ValueError) as e:
            raise ConfigError(f"malformed {mode} grid: {e}") from e
        raise UsageError(f"mode {mode} has no trainable variants")

    def _noise(self, gammas: List[float]) -> AblationTable:
        if self.source.val is not None:
            raise UsageError("the noise sweep regenerates synthetic validation data")
        table = AblationTable("noise")
        self.progress("noise: training")
        pipeline = DefaultPipeline(self.config, "noise", self.source)
        train_records, _ = pipeline.load()
        _, epoch_losses = pipeline.train(train_records)
        for gamma in gammas:
            variant = f"gamma={float(gamma)}"
            self.progress(f"noise: {variant}")
            evaluation = pipeline.evaluate(pipeline.noisy_val(float(gamma)), f"noise-{variant}")
            result = ExperimentResult(
                run_id=f"noise-{variant}",
                config_text=self.config.to_text(),
                epoch_losses=epoch_losses,
                metrics=evaluation.metrics,
                uncertainty=evaluation.uncertainty,
                attention=evaluation.attention,
            )
            table.results.append(result)
            table.rows.append(row_from("noise", variant, result))
        return table


def ablate(
    config: RunConfig,
    mode: str,
    grid_path: Optional[str] = None,
    source: DataSource = DataSource(),
) -> AblationTable:
    return AblationRunner(config, grid_path, source).run(mode)
