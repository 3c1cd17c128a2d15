"""CLI interface and standard implementation for uqrank."""
import logging
import sys
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from rich.progress import Progress, SpinnerColumn, TextColumn

from uqrank.cli_components.output_formatter import OutputFormatter, RichFormatter
from uqrank.cli_components.report import plot_report, write_ablation, write_report
from uqrank.cli_components.result_aggregator import (
    MaxWarningsResultAggregator,
    ResultAggregator,
    StandardResultAggregator,
)
from uqrank.domain_model.records import SyntheticTaskSpec
from uqrank.domain_model.results import ExperimentResult
from uqrank.globals.cli_config import CLIConfig
from uqrank.globals.command_result import CommandResult
from uqrank.globals.errors import UqrankError, UsageError
from uqrank.globals.problems import Problem, ProblemLevel, Problems
from uqrank.globals.run_config import load_run_config, load_task_spec
from uqrank.pipeline import DataSource, DefaultPipeline
from uqrank.pipeline_stages.evaluator import Evaluator
from uqrank.pipeline_stages.loader import sidecar_path, write_visdial_json
from uqrank.pipeline_stages.synthetic import gen_synthetic
from uqrank.pipeline_stages.vocab_builder import load_vocab, save_vocab
from uqrank.training.ablation import AblationRunner
from uqrank.training.model import VOCAB_FILE, load_model

logger = logging.getLogger(__name__)

MODEL_DIR = "model"
SHOWN_PER_CODE = 10

Status = Callable[[str], None]
Work = Callable[[Problems, Status], Tuple[List[str], List[Path]]]


class CLI(ABC):
    """Interface for CLI implementations. Every command returns the process exit code."""

    @abstractmethod
    def gen(self, spec_path: Optional[Path], out: Path) -> int:
        """Generate a synthetic dataset in the VisDial layout."""
        pass

    @abstractmethod
    def train(self) -> int:
        """Train, evaluate and save a model, then write its report."""
        pass

    @abstractmethod
    def evaluate(self) -> int:
        """Evaluate a saved model and write its report."""
        pass

    @abstractmethod
    def ablate(self, mode: str) -> int:
        """Run one ablation sweep."""
        pass

    @abstractmethod
    def diversity(self) -> int:
        """Report the SVD diversity of a saved model's sampled answers."""
        pass

    @abstractmethod
    def plot(self, in_dir: Path) -> int:
        """Render SVG plots from a report directory."""
        pass


class StandardCLI(CLI):
    """
    Standard CLI implementation with separated concerns.

    Coordinates commands using pluggable components:
    - OutputFormatter: handles display formatting
    - ResultAggregator: collects problems and decides the exit code
    - DefaultPipeline / AblationRunner: do the work

    Any :class:`~uqrank.globals.errors.UqrankError` raised by a command is reported as an
    error problem and turns the exit code to 1.
    """

    def __init__(
        self,
        config: CLIConfig,
        formatter: Optional[OutputFormatter] = None,
        aggregator: Optional[ResultAggregator] = None,
    ) -> None:
        self.config = config
        self.formatter = formatter or RichFormatter()
        if config.max_warnings < sys.maxsize:
            aggregator = MaxWarningsResultAggregator(config)
        self.aggregator = aggregator or StandardResultAggregator(config)

    def gen(self, spec_path: Optional[Path], out: Path) -> int:
        def work(problems: Problems, status: Status) -> Tuple[List[str], List[Path]]:
            spec = load_task_spec(spec_path) if spec_path else SyntheticTaskSpec()
            records = gen_synthetic(spec, problems)
            write_visdial_json(records, out)
            files = [out] + [p for p in [sidecar_path(out)] if p.is_file()]
            rounds = sum(len(r.rounds) for r in records)
            blocks = [
                self.formatter.format_value("dialogs", len(records)),
                self.formatter.format_value("rounds", rounds),
            ]
            return blocks, files

        return self._execute("gen", str(out), work)

    def train(self) -> int:
        def work(problems: Problems, status: Status) -> Tuple[List[str], List[Path]]:
            config = load_run_config(self.config.config_path)
            source = DataSource(self.config.train_data, self.config.val_data)
            pipeline = DefaultPipeline(config, "train", source)
            try:
                status("training")
                result = pipeline.process()
            finally:
                problems.extend(pipeline.problems)
            assert pipeline.model is not None and pipeline.vocab is not None
            model_dir = self.config.out_dir / MODEL_DIR
            files = [pipeline.model.save(model_dir)]
            save_vocab(pipeline.vocab, model_dir / VOCAB_FILE)
            files.append(model_dir / VOCAB_FILE)
            files.extend(write_report(result, self.config.out_dir))
            blocks = [
                self.formatter.format_losses(result.epoch_losses),
                self.formatter.format_metrics(result.metrics),
            ]
            return blocks, files

        return self._execute("train", str(self.config.out_dir), work)

    def evaluate(self) -> int:
        def work(problems: Problems, status: Status) -> Tuple[List[str], List[Path]]:
            pipeline = self._saved_model_pipeline("eval")
            try:
                records = pipeline.records("val")
                status(f"evaluating {len(records)} dialogs")
                evaluation = pipeline.evaluate(records)
            finally:
                problems.extend(pipeline.problems)
            result = ExperimentResult(
                run_id="eval",
                config_text=pipeline.config.to_text(),
                metrics=evaluation.metrics,
                uncertainty=evaluation.uncertainty,
                attention=evaluation.attention,
            )
            files = write_report(result, self.config.out_dir)
            return [self.formatter.format_metrics(result.metrics)], files

        return self._execute("eval", str(self._model_dir()), work)

    def ablate(self, mode: str) -> int:
        def work(problems: Problems, status: Status) -> Tuple[List[str], List[Path]]:
            config = load_run_config(self.config.config_path)
            source = DataSource(self.config.train_data, self.config.val_data)
            grid = str(self.config.grid_path) if self.config.grid_path else None
            table = AblationRunner(config, grid, source, progress=status).run(mode)
            files = write_ablation(table, self.config.out_dir / f"ablation-{mode}")
            return [self.formatter.format_ablation(table)], files

        return self._execute("ablate", mode, work)

    def diversity(self) -> int:
        def work(problems: Problems, status: Status) -> Tuple[List[str], List[Path]]:
            pipeline = self._saved_model_pipeline("diversity")
            assert pipeline.model is not None
            try:
                batches = pipeline.batches(pipeline.records("val"))
                evaluator = Evaluator(pipeline.problems, pipeline.model, pipeline.config)
                sigma_o = evaluator.measure_diversity(batches)
            finally:
                problems.extend(pipeline.problems)
            return [self.formatter.format_value("sigma_o", sigma_o)], []

        return self._execute("diversity", str(self._model_dir()), work)

    def plot(self, in_dir: Path) -> int:
        def work(problems: Problems, status: Status) -> Tuple[List[str], List[Path]]:
            return [], plot_report(in_dir)

        return self._execute("plot", str(in_dir), work)

    def _model_dir(self) -> Path:
        return self.config.model_dir or self.config.out_dir / MODEL_DIR

    def _saved_model_pipeline(self, run_id: str) -> DefaultPipeline:
        """Pipeline around a saved model; a ``--config`` file overrides the saved config."""
        directory = self._model_dir()
        override = load_run_config(self.config.config_path) if self.config.config_path else None
        model = load_model(directory, override)
        pipeline = DefaultPipeline(model.config, run_id, DataSource(val=self.config.val_data))
        pipeline.model = model
        pipeline.vocab = load_vocab(directory / VOCAB_FILE)
        if len(pipeline.vocab) != model.vocab_size:
            raise UsageError(
                f"vocabulary of {len(pipeline.vocab)} tokens does not match the model's "
                f"{model.vocab_size}"
            )
        return pipeline

    def _execute(self, command: str, target: str, work: Work) -> int:
        """Run ``work`` under a spinner, then show its output, problems and summary."""
        print(self.formatter.format_command_header(command, target))
        problems = Problems()
        blocks: List[str] = []
        files: List[Path] = []
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            transient=True,
        ) as progress:
            task = progress.add_task(description=f"{command} {target}...", total=None)

            def status(text: str) -> None:
                progress.update(task, description=f"{command}: {text}...")

            try:
                blocks, files = work(problems, status)
            except UqrankError as e:
                logger.debug("%s failed", command, exc_info=True)
                problems.append(Problem(command, ProblemLevel.ERR, str(e), type(e).__name__))

        problems.sort()
        if self.config.no_warnings:
            problems = self._filter_warnings(problems)
        result = CommandResult.of(command, problems, files)
        self.aggregator.add_result(result)
        for block in blocks:
            print(block)
        self._display_problems(result)
        if files:
            print(self.formatter.format_files(files))
        print(
            self.formatter.format_summary(
                self.aggregator.get_total_errors(),
                self.aggregator.get_total_warnings(),
                self.aggregator.get_max_level(),
            )
        )
        return self.aggregator.get_exit_code()

    def _display_problems(self, result: CommandResult) -> None:
        if not result.problems.problems:
            print(self.formatter.format_no_problems())
            return
        shown: Dict[str, int] = {}
        for problem in result.problems.problems:
            shown[problem.code] = shown.get(problem.code, 0) + 1
            if shown[problem.code] <= SHOWN_PER_CODE:
                print(self.formatter.format_problem(problem))
        for code, count in shown.items():
            if count > SHOWN_PER_CODE:
                print(self.formatter.format_hidden(code, count - SHOWN_PER_CODE))

    def _filter_warnings(self, problems: Problems) -> Problems:
        filtered = Problems()
        for problem in problems.problems:
            if problem.level != ProblemLevel.WAR:
                filtered.append(problem)
        return filtered
