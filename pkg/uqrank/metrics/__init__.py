"""Retrieval metrics over candidate rankings and the SVD answer-diversity score."""
from uqrank.metrics.diversity import LatentMatrix, svd_diversity
from uqrank.metrics.retrieval import RankedList, ndcg, rank_of_gt, retrieval_metrics

__all__ = [
    "LatentMatrix",
    "RankedList",
    "ndcg",
    "rank_of_gt",
    "retrieval_metrics",
    "svd_diversity",
]
