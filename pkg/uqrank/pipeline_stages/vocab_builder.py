"""Vocabulary construction from training dialogs."""
import logging
from collections import Counter
from pathlib import Path
from typing import Iterable, List, Sequence

from uqrank.domain_model.records import RESERVED, DialogRecord, Tokens, Vocab
from uqrank.globals.errors import ConfigError, ParseError, UsageError
from uqrank.globals.problems import ProblemLevel, Problems
from uqrank.globals.process_stage import ProcessStage

logger = logging.getLogger(__name__)


def corpus_tokens(records: Sequence[DialogRecord]) -> Iterable[str]:
    """Caption, question and answer tokens of every record (candidates excluded)."""
    for record in records:
        yield from record.caption
        for rnd in record.rounds:
            yield from rnd.question
            yield from rnd.answer


class VocabBuilder(ProcessStage[Sequence[DialogRecord], Vocab]):
    """Keeps tokens seen at least ``min_count`` times; everything else maps to UNK."""

    def __init__(self, problems: Problems, min_count: int = 5) -> None:
        super().__init__(problems)
        self.min_count = min_count

    def process(self, records: Sequence[DialogRecord]) -> Vocab:
        if not records:
            raise UsageError("cannot build a vocabulary from an empty corpus")
        counts = Counter(corpus_tokens(records))
        kept: List[str] = sorted(
            tok for tok, n in counts.items() if n >= self.min_count and tok not in RESERVED
        )
        dropped = len(counts) - len(kept)
        if dropped:
            self.report(
                "vocabulary",
                f"{dropped} token types below min_count={self.min_count} map to UNK",
                "vocab",
                ProblemLevel.NON,
            )
        vocab = Vocab.from_tokens(kept)
        logger.debug("vocabulary of %d ids (%d dropped types)", len(vocab), dropped)
        return vocab


def build_vocab(
    records: Sequence[DialogRecord], min_count: int = 5, problems: Problems | None = None
) -> Vocab:
    """Vocabulary over captions, questions and answers of ``records``."""
    return VocabBuilder(problems if problems is not None else Problems(), min_count).process(
        records
    )


def unknown_rate(tokens: Tokens, vocab: Vocab) -> float:
    if not tokens:
        return 0.0
    return sum(1 for t in tokens if t not in vocab) / len(tokens)


def save_vocab(vocab: Vocab, path: Path) -> None:
    """One token per line, in id order."""
    Path(path).write_text("\n".join(vocab.id_to_token) + "\n", encoding="utf-8")


def load_vocab(path: Path) -> Vocab:
    """
    Raises:
        ConfigError: If the file cannot be read
        ParseError: If the reserved tokens are not the first lines
    """
    path = Path(path)
    try:
        tokens = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read vocabulary {path}: {e}") from e
    if tuple(tokens[: len(RESERVED)]) != RESERVED:
        raise ParseError(str(path), 1, 1, "vocabulary must start with the reserved tokens")
    return Vocab({tok: i for i, tok in enumerate(tokens)})
