"""Base class of the experiment pipeline stages.

A stage turns one typed input into one typed output:

========================  ==============================  ==========================
stage                     consumes                        returns
========================  ==============================  ==========================
``SyntheticGenerator``    ``SyntheticTaskSpec``           ``List[DialogRecord]``
``VisDialLoader``         JSON ``Path``                   ``List[DialogRecord]``
``VocabBuilder``          dialog records                  ``Vocab``
``Batcher``               dialog records                  ``List[Batch]``
``Trainer``               batches                         per-epoch loss history
``Evaluator``             batches                         ``Evaluation``
========================  ==============================  ==========================

Data a stage had to alter or skip (truncated tokens, missing images, empty splits) is
reported as a :class:`~uqrank.globals.problems.Problem` on the shared collection and the
stage carries on. Anything that makes the output meaningless raises a
:class:`~uqrank.globals.errors.UqrankError` subclass instead.
"""
import logging
from abc import ABC, abstractmethod
from typing import Generic, TypeVar

from uqrank.globals.problems import Problem, ProblemLevel, Problems

logger = logging.getLogger(__name__)

TInput = TypeVar("TInput")
TOutput = TypeVar("TOutput")


class ProcessStage(ABC, Generic[TInput, TOutput]):
    """
    One step of the experiment pipeline.

    Attributes:
        problems: Collection shared by every stage of a run; findings are appended, never
            cleared
    """

    def __init__(self, problems: Problems) -> None:
        self.problems = problems

    def report(
        self, where: str, description: str, code: str, level: ProblemLevel = ProblemLevel.WAR
    ) -> None:
        """Append a finding about the data, e.g. ``report("dialog 3", "...", "truncate")``."""
        self.problems.append(Problem(where, level, description, code))
        logger.debug("%s: %s: %s [%s]", type(self).__name__, where, description, code)

    @abstractmethod
    def process(self, input_data: TInput) -> TOutput:
        """
        Run the stage.

        Raises:
            UqrankError: If the input cannot produce a meaningful output
        """
