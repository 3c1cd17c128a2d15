"""Aggregates command results into counts and an exit code."""
from abc import ABC, abstractmethod
from typing import List

from uqrank.globals.cli_config import CLIConfig
from uqrank.globals.command_result import CommandResult
from uqrank.globals.problems import ProblemLevel


class ResultAggregator(ABC):
    """Abstract base class for aggregating the results of the commands of one invocation."""

    def __init__(self, cli_config: CLIConfig) -> None:
        self._results: List[CommandResult] = []
        self._total_errors = 0
        self._total_warnings = 0
        self._max_level = ProblemLevel.NON

    def get_total_errors(self) -> int:
        return self._total_errors

    def get_total_warnings(self) -> int:
        return self._total_warnings

    def get_max_level(self) -> ProblemLevel:
        return self._max_level

    def get_results(self) -> List[CommandResult]:
        return self._results.copy()

    def _record(self, result: CommandResult) -> None:
        self._results.append(result)
        self._total_errors += result.error_count
        self._total_warnings += result.warning_count
        self._max_level = ProblemLevel(max(self._max_level.value, result.max_level.value))

    @abstractmethod
    def add_result(self, result: CommandResult) -> None:
        """Add a command result and update aggregated stats."""
        pass

    @abstractmethod
    def get_exit_code(self) -> int:
        """Get appropriate exit code based on results."""
        pass


class StandardResultAggregator(ResultAggregator):
    """Exit code 0 when only notes or warnings were reported, 1 on any error."""

    def add_result(self, result: CommandResult) -> None:
        self._record(result)

    def get_exit_code(self) -> int:
        match self._max_level:
            case ProblemLevel.NON:
                return 0
            case ProblemLevel.WAR:
                return 0
            case ProblemLevel.ERR:
                return 1
            case _:
                raise ValueError(f"Invalid problem level: {self._max_level}")


class MaxWarningsResultAggregator(ResultAggregator):
    """Fails the invocation once more than ``max_warnings`` data warnings were reported."""

    def __init__(self, cli_config: CLIConfig) -> None:
        super().__init__(cli_config)
        self._max_warnings = cli_config.max_warnings

    def add_result(self, result: CommandResult) -> None:
        self._record(result)
        if self._total_warnings > self._max_warnings:
            self._max_level = ProblemLevel.ERR

    def get_exit_code(self) -> int:
        match self._max_level:
            case ProblemLevel.NON:
                return 0
            case ProblemLevel.WAR:
                return 1 if self._total_warnings > self._max_warnings else 0
            case ProblemLevel.ERR:
                return 1
            case _:
                raise ValueError(f"Invalid problem level: {self._max_level}")
