"""Output formatter interface and the Rich implementation for CLI results."""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Sequence

from rich.console import Console, RenderableType
from rich.table import Table
from rich.text import Text

from uqrank.domain_model.results import METRIC_COLUMNS, AblationTable, MetricsRow
from uqrank.globals.problems import Problem, ProblemLevel


class OutputFormatter(ABC):
    """Interface for formatting CLI output."""

    @abstractmethod
    def format_command_header(self, command: str, target: str) -> str:
        """Format the header printed before a command's output."""
        pass

    @abstractmethod
    def format_problem(self, problem: Problem) -> str:
        """Format a single problem for display."""
        pass

    @abstractmethod
    def format_hidden(self, code: str, count: int) -> str:
        """Format the note standing in for problems not shown individually."""
        pass

    @abstractmethod
    def format_no_problems(self) -> str:
        """Format message when no problems were reported."""
        pass

    @abstractmethod
    def format_metrics(self, rows: Sequence[MetricsRow]) -> str:
        """Format retrieval metrics rows."""
        pass

    @abstractmethod
    def format_losses(self, epoch_losses: Sequence[Dict[str, float]]) -> str:
        """Format per-epoch loss components."""
        pass

    @abstractmethod
    def format_ablation(self, table: AblationTable) -> str:
        """Format the rows of an ablation sweep."""
        pass

    @abstractmethod
    def format_value(self, label: str, value: float) -> str:
        """Format a single named number."""
        pass

    @abstractmethod
    def format_files(self, files: Sequence[Path]) -> str:
        """Format the list of written files."""
        pass

    @abstractmethod
    def format_summary(
        self, total_errors: int, total_warnings: int, max_level: ProblemLevel
    ) -> str:
        """Format final summary of the invocation."""
        pass


def _number(value: float) -> str:
    if isinstance(value, int):
        return str(value)
    return f"{value:.4f}"


class RichFormatter(OutputFormatter):
    """
    Rich-based formatter.

    Problems are printed one per line with a level icon; metrics, losses and ablation rows
    are rendered as tables.
    """

    def __init__(self, console: Console | None = None) -> None:
        self.console = console or Console()
        self.colors = {
            ProblemLevel.NON: "bright_green",
            ProblemLevel.ERR: "bright_red",
            ProblemLevel.WAR: "yellow",
            "muted": "bright_black",
            "accent": "cyan",
            "text": "white",
        }
        self.icons = {
            ProblemLevel.NON: "✓",
            ProblemLevel.ERR: "✕",
            ProblemLevel.WAR: "⚠",
            "note": "•",
        }

    def _render(self, renderable: RenderableType) -> str:
        with self.console.capture() as capture:
            self.console.print(renderable)
        return capture.get().rstrip("\n")

    def format_command_header(self, command: str, target: str) -> str:
        header = Text()
        header.append(f"{command} ", style=f"bold {self.colors['accent']}")
        header.append(target, style=self.colors["muted"])
        return "\n" + self._render(header)

    def format_problem(self, problem: Problem) -> str:
        line = Text()
        color = self.colors.get(problem.level, self.colors["text"])
        icon = self.icons[problem.level] if problem.level != ProblemLevel.NON else "•"
        line.append(f"  {icon} ", style=color)
        line.append(f"{self._level_name(problem.level):<7} ", style=color)
        line.append(f"{problem.where}: ", style=self.colors["muted"])
        line.append(problem.desc, style=self.colors["text"])
        line.append(f"  ({problem.code})", style=self.colors["muted"])
        return self._render(line)

    def format_hidden(self, code: str, count: int) -> str:
        line = Text()
        line.append(f"  … {count} more ", style=self.colors["muted"])
        line.append(f"({code})", style=self.colors["muted"])
        return self._render(line)

    def format_no_problems(self) -> str:
        text = Text()
        text.append(f"  {self.icons[ProblemLevel.NON]} ", style=self.colors[ProblemLevel.NON])
        text.append("No problems reported", style=f"bold {self.colors[ProblemLevel.NON]}")
        return self._render(text)

    def format_metrics(self, rows: Sequence[MetricsRow]) -> str:
        table = Table(title="Retrieval metrics", title_justify="left")
        for column in METRIC_COLUMNS:
            table.add_column(column, justify="left" if column == "run_id" else "right")
        for row in rows:
            values = [getattr(row, column) for column in METRIC_COLUMNS]
            table.add_row(values[0], *(_number(v) for v in values[1:]))
        return self._render(table)

    def format_losses(self, epoch_losses: Sequence[Dict[str, float]]) -> str:
        if not epoch_losses:
            return self._render(Text("  no training epochs", style=self.colors["muted"]))
        names: List[str] = []
        for losses in epoch_losses:
            names.extend(name for name in losses if name not in names)
        table = Table(title="Loss per epoch", title_justify="left")
        table.add_column("epoch", justify="right")
        for name in names:
            table.add_column(name, justify="right")
        for epoch, losses in enumerate(epoch_losses, start=1):
            cells = [_number(losses[name]) if name in losses else "" for name in names]
            table.add_row(str(epoch), *cells)
        return self._render(table)

    def format_ablation(self, table: AblationTable) -> str:
        rendered = Table(title=f"Ablation: {table.mode}", title_justify="left")
        rendered.add_column("variant")
        headers = ("R1", "R5", "R10", "MRR", "mean rank", "NDCG", "aleatoric", "epistemic")
        for header in headers:
            rendered.add_column(header, justify="right")
        for row in table.rows:
            rendered.add_row(
                row.variant,
                _number(row.R1),
                _number(row.R5),
                _number(row.R10),
                _number(row.MRR),
                _number(row.mean_rank),
                _number(row.NDCG),
                f"{row.aleatoric_mean:.4g} ± {row.aleatoric_std:.2g}",
                f"{row.epistemic_mean:.4g} ± {row.epistemic_std:.2g}",
            )
        return self._render(rendered)

    def format_value(self, label: str, value: float) -> str:
        text = Text()
        text.append(f"  {label} ", style=self.colors["muted"])
        text.append(_number(value), style=f"bold {self.colors['accent']}")
        return self._render(text)

    def format_files(self, files: Sequence[Path]) -> str:
        text = Text()
        for i, path in enumerate(files):
            if i:
                text.append("\n")
            text.append(f"  {self.icons['note']} ", style=self.colors["muted"])
            text.append(str(path), style=self.colors["text"])
        return self._render(text)

    def format_summary(
        self, total_errors: int, total_warnings: int, max_level: ProblemLevel
    ) -> str:
        summary = Text("\n")
        color = self.colors[max_level]
        if total_errors:
            summary.append(f"{self.icons[ProblemLevel.ERR]} ", style=color)
            summary.append("Run failed", style=f"bold {color}")
        else:
            summary.append(f"{self.icons[ProblemLevel.NON]} ", style=color)
            summary.append("Run completed", style=f"bold {color}")
        counts = f" - {total_errors} error{'s' if total_errors != 1 else ''}, "
        counts += f"{total_warnings} warning{'s' if total_warnings != 1 else ''}"
        summary.append(counts, style=self.colors["muted"])
        return self._render(summary)

    def _level_name(self, level: ProblemLevel) -> str:
        level_names = {
            ProblemLevel.WAR: "warning",
            ProblemLevel.ERR: "error",
            ProblemLevel.NON: "note",
        }
        return level_names.get(level, "unknown")
