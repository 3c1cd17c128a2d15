"""Handles problem management for uqrank runs."""
from dataclasses import dataclass, field
from enum import Enum
from typing import List


class ProblemLevel(Enum):
    """Enumeration of problem severity levels found while preparing or running experiments.

    Attributes:
        NON (int): Informational note (severity 0)
        WAR (int): Warning - data was altered (truncated, mapped to UNK, skipped) (severity 1)
        ERR (int): Error - the run could not complete (severity 2)
    """

    NON = 0  # Informational
    WAR = 1  # Warning level
    ERR = 2  # Error level


@dataclass
class Problem:
    """A single finding reported by a pipeline stage.

    Attributes:
        where (str): Location of the finding, e.g. ``"dialog 12 round 3"`` or a file path
        level (ProblemLevel): Severity level of the problem (NON, WAR, or ERR)
        desc (str): Human-readable description of the problem
        code (str): Short identifier of the check that produced it, e.g. ``"truncate"``
    """

    where: str
    level: ProblemLevel
    desc: str
    code: str


@dataclass
class Problems:
    """Collection of problems with counts by severity.

    Attributes:
        problems (List[Problem]): All problems reported so far
        max_level (ProblemLevel): Highest severity level among all problems
        n_error (int): Count of problems with ERROR level
        n_warning (int): Count of problems with WARNING level
    """

    problems: List[Problem] = field(default_factory=list)
    max_level: ProblemLevel = ProblemLevel.NON
    n_error: int = 0
    n_warning: int = 0

    def append(self, problem: Problem) -> None:
        """Add a problem and update counts and the maximum level.

        Args:
            problem (Problem): The problem instance to add to the collection
        """
        self.problems.append(problem)
        match problem.level:
            case ProblemLevel.WAR:
                self.n_warning += 1
            case ProblemLevel.ERR:
                self.n_error += 1
            case ProblemLevel.NON:
                pass
        self.max_level = ProblemLevel(max(self.max_level.value, problem.level.value))

    def sort(self) -> None:
        """Sort problems by severity (errors first), then by code and location."""
        self.problems.sort(key=lambda x: (-x.level.value, x.code, x.where))

    def extend(self, problems: "Problems") -> None:
        """Merge another Problems collection into this one.

        Args:
            problems (Problems): Another Problems instance to merge into this one
        """
        self.problems.extend(problems.problems)
        self.n_error += problems.n_error
        self.n_warning += problems.n_warning
        self.max_level = ProblemLevel(max(self.max_level.value, problems.max_level.value))

    def remove(self, problem: Problem) -> None:
        """Remove a specific problem from the collection.

        Args:
            problem (Problem): The specific problem instance to remove

        Raises:
            ValueError: If the problem is not found in the collection
        """
        self.problems.remove(problem)
        match problem.level:
            case ProblemLevel.WAR:
                self.n_warning -= 1
            case ProblemLevel.ERR:
                self.n_error -= 1
            case ProblemLevel.NON:
                pass
        if not self.problems:
            self.max_level = ProblemLevel.NON
        else:
            self.max_level = ProblemLevel(max(p.level.value for p in self.problems))

    def count(self, code: str) -> int:
        """Number of problems reported under ``code``."""
        return sum(1 for p in self.problems if p.code == code)
