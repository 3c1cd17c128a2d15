"""Result of one CLI command."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List

from uqrank.globals.problems import ProblemLevel, Problems


@dataclass
class CommandResult:
    """
    Result of running one command.

    Attributes:
        command: Command name, e.g. ``train``
        problems: Collection of all problems reported while running it
        max_level: Highest severity level encountered
        error_count: Number of errors
        warning_count: Number of warnings
        files: Files the command wrote
    """

    command: str
    problems: Problems
    max_level: ProblemLevel
    error_count: int
    warning_count: int
    files: List[Path] = field(default_factory=list)

    @classmethod
    def of(cls, command: str, problems: Problems, files: List[Path]) -> "CommandResult":
        return cls(
            command=command,
            problems=problems,
            max_level=problems.max_level,
            error_count=problems.n_error,
            warning_count=problems.n_warning,
            files=files,
        )
