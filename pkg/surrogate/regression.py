"""
Least-squares linear surrogates H_S(X_S) = B^T (1, X_S) of the high-fidelity output.

Fits go through an SVD pseudoinverse so rank-deficient designs still give the
minimum-norm solution; the fitted values are then unique even when the
coefficients are not.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.exceptions import DimensionMismatchError, SampleSizeError
from ensemble.specs import JointBatch, format_subset

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SurrogateCoefficients:
    """
    Coefficient matrix of shape (d_S + 1) x d. Row 0 holds the intercepts;
    column i is the least-squares fit of the i-th output of Y.
    """

    subset: tuple
    matrix: np.ndarray
    rank: int

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def output_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def full_rank(self) -> bool:
        return self.rank == self.matrix.shape[0]

    def to_dict(self) -> dict:
        return {
            "subset": list(self.subset),
            "rank": self.rank,
            "shape": list(self.matrix.shape),
            "matrix": self.matrix.ravel(order="C").tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SurrogateCoefficients":
        shape = tuple(payload["shape"])
        matrix = np.asarray(payload["matrix"], dtype=float).reshape(shape, order="C")
        return cls(subset=tuple(payload["subset"]), matrix=matrix, rank=int(payload["rank"]))


def design_matrix(x_subset: np.ndarray) -> np.ndarray:
    """Prepend the intercept column: rows (1, X_S)."""
    x_subset = np.asarray(x_subset, dtype=float)
    return np.hstack([np.ones((x_subset.shape[0], 1)), x_subset])


def pinv_solve(design: np.ndarray, targets: np.ndarray, rtol: Optional[float] = None):
    """
    Minimum-norm least-squares solution of ``design @ B = targets``.

    Args:
        design: m x p matrix
        targets: m x q matrix
        rtol: Relative singular-value cutoff; defaults to max(m, p) * eps

    Returns:
        Tuple (B, rank)
    """
    m, p = design.shape
    if rtol is None:
        rtol = max(m, p) * np.finfo(float).eps
    u, s, vt = np.linalg.svd(design, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((p, targets.shape[1])), 0
    rank = int(np.sum(s > rtol * s[0]))
    coeffs = vt[:rank].T @ ((u[:, :rank].T @ targets) / s[:rank, None])
    return coeffs, rank


def fit_surrogate(batch: JointBatch, subset, rtol: Optional[float] = None) -> SurrogateCoefficients:
    """
    Fit H_S on the exploration rows of ``batch``.

    Raises:
        SampleSizeError: fewer than d_S + 2 rows or non-finite entries
    """
    subset = tuple(subset)
    x_subset = batch.x_subset(subset)
    d_subset = x_subset.shape[1]
    if batch.count < d_subset + 2:
        raise SampleSizeError(
            f"fitting {format_subset(subset)} needs at least {d_subset + 2} exploration rows, got {batch.count}"
        )
    if not (np.all(np.isfinite(x_subset)) and np.all(np.isfinite(batch.y))):
        raise SampleSizeError("exploration samples contain non-finite values")

    matrix, rank = pinv_solve(design_matrix(x_subset), batch.y, rtol)
    if rank < d_subset + 1:
        logger.warning(f"Surrogate design for {format_subset(subset)} is rank deficient ({rank} < {d_subset + 1})")
    return SurrogateCoefficients(subset=subset, matrix=matrix, rank=rank)


def apply_surrogate(coeffs: SurrogateCoefficients, x_subset) -> np.ndarray:
    """
    Evaluate B^T (1, x_S).

    A d_S-vector gives a d-vector; an N x d_S matrix gives N x d fitted values.
    """
    x_subset = np.asarray(x_subset, dtype=float)
    single = x_subset.ndim == 1
    rows = np.atleast_2d(x_subset)
    if rows.shape[1] != coeffs.input_dim:
        raise DimensionMismatchError(
            f"surrogate for {format_subset(coeffs.subset)} takes {coeffs.input_dim} inputs, got {rows.shape[1]}"
        )
    fitted = design_matrix(rows) @ coeffs.matrix
    return fitted[0] if single else fitted


def fitted_values(batch: JointBatch, coeffs: SurrogateCoefficients) -> np.ndarray:
    """H_S evaluated on the exploration rows the surrogate was fitted on."""
    return apply_surrogate(coeffs, batch.x_subset(coeffs.subset))
