"""
Oracle statistics from one large joint sample.

Surrogates are fitted on the oracle sample itself; k1, k2, the scaled loss
gamma and m* then follow from the same formulas the algorithm uses on its
exploration data.
"""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from cdf.grids import EvalGrid
from core.exceptions import DegenerateSubsetError
from ensemble.pool import pool_header
from ensemble.sampling import SampleStream, sample_joint
from ensemble.specs import EnsembleHandle, format_subset, nonempty_subsets
from surrogate.regression import fit_surrogate, fitted_values
from .indicators import indicator_fields
from .kfields import k_hats_from_values
from .loss import optimal_exploration, relative_efficiency, scaled_loss
from .weights import WeightSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleSubsetStats:
    subset: tuple
    c_subset: float
    k1: float
    k2: float
    gamma: float
    m_star: Optional[float]
    efficiency: float

    def to_dict(self) -> dict:
        return {
            "subset": format_subset(self.subset),
            "c_S": self.c_subset,
            "k1": self.k1,
            "k2": self.k2,
            "gamma": self.gamma,
            "m_star": self.m_star,
            "relative_efficiency": self.efficiency,
        }


@dataclass(eq=False)
class OracleStats:
    n_samples: int
    c_epr: float
    budget: Optional[float]
    subsets: list
    correlation: np.ndarray
    labels: list
    variance_integral: float = 0.0
    rho: dict = field(default_factory=dict)

    def by_subset(self, subset) -> OracleSubsetStats:
        subset = tuple(subset)
        for entry in self.subsets:
            if entry.subset == subset:
                return entry
        raise KeyError(format_subset(subset))

    @property
    def best(self) -> OracleSubsetStats:
        """argmin of gamma; ties go to the cheaper, then lexicographically first subset."""
        return min(self.subsets, key=lambda entry: (entry.gamma, entry.c_subset, entry.subset))

    def rows(self) -> list:
        return [entry.to_dict() for entry in self.subsets]

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "c_epr": self.c_epr,
            "budget": self.budget,
            "variance_integral": self.variance_integral,
            "best_subset": format_subset(self.best.subset),
            "subsets": self.rows(),
            "correlation": {"labels": self.labels, "matrix": self.correlation.tolist()},
        }


def rho_field_from_values(y, h, grid: EvalGrid) -> np.ndarray:
    """Correlation of 1{Y <= x} and 1{H <= x}; 0 where either indicator is constant."""
    stats = indicator_fields(y, h, grid)
    denominator = np.sqrt(stats.variance_y * stats.variance_h)
    positive = denominator > 0
    return np.where(positive, stats.covariance / np.where(positive, denominator, 1.0), 0.0)


def rho_field(batch, coeffs, grid: EvalGrid) -> np.ndarray:
    return rho_field_from_values(batch.y, fitted_values(batch, coeffs), grid)


def correlation_matrix(batch):
    """Pearson correlations of every output column of (Y, X_1, ..., X_n)."""
    columns = np.hstack([batch.y, *batch.x])
    dims = [batch.y.shape[1]] + [block.shape[1] for block in batch.x]
    with np.errstate(invalid="ignore", divide="ignore"):
        matrix = np.corrcoef(columns, rowvar=False)
    return np.atleast_2d(matrix), pool_header(dims)


def oracle_stats(
    handle: EnsembleHandle,
    weight: WeightSpec,
    n_samples: int,
    stream: SampleStream,
    budget: Optional[float] = None,
    grid: Optional[EvalGrid] = None,
    rtol: Optional[float] = None,
) -> OracleStats:
    """
    Monte Carlo oracle k1, k2, gamma and m* for every subset.

    Args:
        handle: Ensemble
        weight: Loss weight
        n_samples: Size of the oracle joint sample
        stream: Sample stream for the oracle draw
        budget: When given, m* is reported at this budget
        grid: When given, rho fields are evaluated on it
    """
    weight.check(handle.d)
    logger.info(f"Drawing {n_samples} oracle samples from the {handle.kind} ensemble")
    batch = sample_joint(handle, n_samples, stream)
    entries = []
    rho = {}
    variance_integral = 0.0
    for subset in nonempty_subsets(handle.n):
        c_subset = handle.subset_cost(subset)
        coeffs = fit_surrogate(batch, subset, rtol=rtol)
        h = fitted_values(batch, coeffs)
        integrals = k_hats_from_values(batch.y, h, weight, c_subset)
        variance_integral = integrals.variance_integral
        k1, k2 = integrals.k1_hat, integrals.k2_hat
        gamma = scaled_loss(k1, k2, handle.c_epr)
        m_star = None
        efficiency = float("nan")
        try:
            if budget is not None:
                m_star = optimal_exploration(k1, k2, budget, handle.c_epr)
            efficiency = relative_efficiency(k1, k2, handle.c_epr, c_subset)
        except DegenerateSubsetError:
            logger.warning(f"Oracle coefficients of subset {format_subset(subset)} vanish")
        entries.append(OracleSubsetStats(subset, c_subset, k1, k2, gamma, m_star, efficiency))
        if grid is not None:
            rho[subset] = rho_field_from_values(batch.y, h, grid)

    matrix, labels = correlation_matrix(batch)
    stats = OracleStats(
        n_samples=n_samples,
        c_epr=handle.c_epr,
        budget=budget,
        subsets=entries,
        correlation=matrix,
        labels=labels,
        variance_integral=variance_integral,
        rho=rho,
    )
    logger.info(f"Oracle best subset {format_subset(stats.best.subset)} with gamma={stats.best.gamma:.6g}")
    return stats
