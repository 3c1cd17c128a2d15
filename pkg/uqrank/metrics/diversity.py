"""Answer diversity as the nuclear norm of stacked answer embeddings."""
from dataclasses import dataclass

import numpy as np

from uqrank.globals.errors import DomainError, ShapeError


@dataclass
class LatentMatrix:
    """``m x n`` matrix of sampled answer embeddings, one row per sample."""

    A: np.ndarray

    def __post_init__(self) -> None:
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.A.ndim != 2 or min(self.A.shape) < 1:
            raise ShapeError(f"latent matrix must be m x n with m, n >= 1, got {self.A.shape}")
        if not np.all(np.isfinite(self.A)):
            raise DomainError("latent matrix has non-finite entries")


def singular_values(latents: LatentMatrix) -> np.ndarray:
    return np.linalg.svd(latents.A, compute_uv=False)


def svd_diversity(latents: LatentMatrix) -> float:
    """``sigma_o``: the sum of the singular values of ``A``."""
    return float(singular_values(latents).sum())
