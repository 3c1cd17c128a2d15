"""Unit tests for the SVD answer diversity."""

import numpy as np
import pytest

from uqrank.globals.errors import DomainError, ShapeError
from uqrank.metrics.diversity import LatentMatrix, singular_values, svd_diversity


class TestSvdDiversity:
    """Unit tests for svd_diversity."""

    def test_diagonal_matrix(self):
        """Test a diagonal matrix sums the absolute diagonal."""
        assert np.isclose(svd_diversity(LatentMatrix(np.diag([3.0, -2.0, 1.0]))), 6.0)

    def test_identical_rows_are_rank_one(self):
        """Test repeated answers leave a single non-zero singular value."""
        values = singular_values(LatentMatrix(np.tile([3.0, 4.0], (4, 1))))
        assert np.isclose(values[0], 10.0)
        assert np.allclose(values[1:], 0.0)

    def test_single_row(self):
        """Test a single row promotes to 1 x n and scores its norm."""
        assert np.isclose(svd_diversity(LatentMatrix(np.array([3.0, 4.0]))), 5.0)

    def test_non_finite(self):
        """Test non-finite entries raise DomainError."""
        with pytest.raises(DomainError):
            LatentMatrix(np.array([[1.0, np.nan]]))

    def test_empty(self):
        """Test an empty matrix raises ShapeError."""
        with pytest.raises(ShapeError):
            LatentMatrix(np.zeros((2, 0)))

    def test_matches_gram_eigenvalues(self):
        """Test the nuclear norm equals the summed square roots of the Gram eigenvalues."""
        rng = np.random.default_rng(0)
        for _ in range(20):
            m, n = rng.integers(1, 8, size=2)
            A = rng.normal(size=(m, n))
            eigenvalues = np.clip(np.linalg.eigvalsh(A.T @ A), 0.0, None)
            assert svd_diversity(LatentMatrix(A)) == pytest.approx(
                np.sqrt(eigenvalues).sum(), abs=1e-6
            )

    def test_rotation_invariant(self):
        """Test rotating the samples or the embedding space leaves the diversity unchanged."""
        rng = np.random.default_rng(1)
        A = rng.normal(size=(5, 4))
        left, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        right, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        expected = svd_diversity(LatentMatrix(A))

        assert svd_diversity(LatentMatrix(left @ A)) == pytest.approx(expected)
        assert svd_diversity(LatentMatrix(A @ right)) == pytest.approx(expected)

    def test_zero_matrix(self):
        """Test identical all-zero samples have no diversity."""
        assert svd_diversity(LatentMatrix(np.zeros((4, 3)))) == 0.0

    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_identity(self, n):
        """Test n orthonormal samples score n."""
        assert svd_diversity(LatentMatrix(np.eye(n))) == pytest.approx(float(n))
