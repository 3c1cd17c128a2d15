"""Unit tests for result aggregation."""

import sys

from uqrank.cli_components.result_aggregator import (
    MaxWarningsResultAggregator,
    StandardResultAggregator,
)
from uqrank.globals.cli_config import CLIConfig
from uqrank.globals.command_result import CommandResult
from uqrank.globals.problems import Problem, ProblemLevel, Problems


def _result(warnings=0, errors=0, notes=0) -> CommandResult:
    problems = Problems()
    for i in range(warnings):
        problems.append(Problem(f"dialog {i}", ProblemLevel.WAR, "truncated", "truncate"))
    for i in range(errors):
        problems.append(Problem("train", ProblemLevel.ERR, "failed", "UsageError"))
    for i in range(notes):
        problems.append(Problem("vocabulary", ProblemLevel.NON, "rare tokens", "vocab"))
    return CommandResult.of("train", problems, [])


class TestCommandResult:
    """Unit tests for CommandResult."""

    def test_of_copies_counts(self):
        """Test counts and level are taken from the problems."""
        result = _result(warnings=2, errors=1)

        assert (result.warning_count, result.error_count) == (2, 1)
        assert result.max_level == ProblemLevel.ERR
        assert result.files == []


class TestStandardResultAggregator:
    """Unit tests for StandardResultAggregator."""

    def test_empty_aggregator_initial_state(self):
        """Test that an empty aggregator exits with 0."""
        aggregator = StandardResultAggregator(CLIConfig())

        assert aggregator.get_total_errors() == 0
        assert aggregator.get_total_warnings() == 0
        assert aggregator.get_max_level() == ProblemLevel.NON
        assert aggregator.get_exit_code() == 0
        assert aggregator.get_results() == []

    def test_warnings_and_notes_exit_zero(self):
        """Test that warnings alone do not fail the invocation."""
        aggregator = StandardResultAggregator(CLIConfig())
        aggregator.add_result(_result(warnings=5, notes=2))

        assert aggregator.get_total_warnings() == 5
        assert aggregator.get_max_level() == ProblemLevel.WAR
        assert aggregator.get_exit_code() == 0

    def test_error_exits_one(self):
        """Test that an error fails the invocation."""
        aggregator = StandardResultAggregator(CLIConfig())
        aggregator.add_result(_result(warnings=1))
        aggregator.add_result(_result(errors=1))

        assert aggregator.get_total_errors() == 1
        assert len(aggregator.get_results()) == 2
        assert aggregator.get_exit_code() == 1


class TestMaxWarningsResultAggregator:
    """Unit tests for MaxWarningsResultAggregator."""

    def test_within_limit(self):
        """Test warnings up to the limit exit with 0."""
        aggregator = MaxWarningsResultAggregator(CLIConfig(max_warnings=3))
        aggregator.add_result(_result(warnings=3))

        assert aggregator.get_max_level() == ProblemLevel.WAR
        assert aggregator.get_exit_code() == 0

    def test_over_limit(self):
        """Test exceeding the limit escalates to an error."""
        aggregator = MaxWarningsResultAggregator(CLIConfig(max_warnings=3))
        aggregator.add_result(_result(warnings=2))
        aggregator.add_result(_result(warnings=2))

        assert aggregator.get_max_level() == ProblemLevel.ERR
        assert aggregator.get_exit_code() == 1

    def test_default_limit_is_unbounded(self):
        """Test the default config never escalates warnings."""
        aggregator = MaxWarningsResultAggregator(CLIConfig(max_warnings=sys.maxsize))
        aggregator.add_result(_result(warnings=100))

        assert aggregator.get_exit_code() == 0
