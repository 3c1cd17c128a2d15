"""Rank-based retrieval metrics over scored answer candidates.

Ties are broken by ascending candidate index: among equal scores the earlier candidate
ranks higher.
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from uqrank.globals.errors import ShapeError, UndefinedMetricError, UsageError

DEFAULT_KS = (1, 5, 10)


@dataclass
class RankedList:
    """
    Scores of one round's candidates.

    Attributes:
        scores: One score per candidate, higher is better
        gt_index: Index of the human response
        relevance: Optional per-candidate relevance weights in ``[0, 1]``
    """

    scores: np.ndarray
    gt_index: int
    relevance: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=float).reshape(-1)
        if self.scores.size == 0:
            raise ShapeError("a ranked list needs at least one candidate")
        if not 0 <= self.gt_index < self.scores.size:
            raise ShapeError(f"gt_index {self.gt_index} outside 0..{self.scores.size - 1}")
        if self.relevance is not None:
            self.relevance = np.asarray(self.relevance, dtype=float).reshape(-1)
            if self.relevance.shape != self.scores.shape:
                raise ShapeError(
                    f"{self.relevance.size} relevance values for {self.scores.size} candidates"
                )

    def order(self) -> np.ndarray:
        """Candidate indices from best to worst."""
        return np.lexsort((np.arange(self.scores.size), -self.scores))


@dataclass(frozen=True)
class RetrievalMetrics:
    mean_rank: float
    recall: Dict[int, float] = field(default_factory=dict)
    mrr: float = 0.0

    def as_row(self) -> Dict[str, float]:
        row = {f"R{k}": v for k, v in sorted(self.recall.items())}
        row["MRR"] = self.mrr
        row["mean_rank"] = self.mean_rank
        return row


def rank_of_gt(ranked: RankedList) -> int:
    """1-based rank of the human response."""
    s = ranked.scores
    gt = ranked.gt_index
    better = np.count_nonzero(s > s[gt]) + np.count_nonzero(s[:gt] == s[gt])
    return int(better) + 1


def retrieval_metrics(
    lists: Iterable[RankedList], ks: Sequence[int] = DEFAULT_KS
) -> RetrievalMetrics:
    """
    Mean rank, recall@k and mean reciprocal rank over a set of ranked lists.

    Raises:
        UsageError: If ``lists`` is empty
    """
    ranks = np.array([rank_of_gt(r) for r in lists], dtype=float)
    if ranks.size == 0:
        raise UsageError("retrieval metrics need at least one ranked list")
    return RetrievalMetrics(
        mean_rank=float(ranks.mean()),
        recall={k: float(np.mean(ranks <= k)) for k in ks},
        mrr=float(np.mean(1.0 / ranks)),
    )


def _dcg(gains: np.ndarray) -> float:
    positions = np.arange(1, gains.size + 1)
    return float(np.sum(gains / np.log2(1 + positions)))


def ndcg(ranked: RankedList) -> float:
    """
    Normalized discounted cumulative gain over the full predicted order.

    Raises:
        UndefinedMetricError: Without relevance weights or if all of them are zero
    """
    if ranked.relevance is None or not np.any(ranked.relevance > 0):
        raise UndefinedMetricError("NDCG is undefined without a positive relevance weight")
    ideal = _dcg(np.sort(ranked.relevance)[::-1])
    return _dcg(ranked.relevance[ranked.order()]) / ideal


def mean_ndcg(lists: Iterable[RankedList]) -> float:
    """Mean NDCG over the lists that carry a positive relevance weight; NaN if none do."""
    values = [
        ndcg(r) for r in lists if r.relevance is not None and np.any(r.relevance > 0)
    ]
    return float(np.mean(values)) if values else float("nan")
