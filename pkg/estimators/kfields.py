"""
Loss-decomposition fields K1, K2 and their weighted integrals.

K1(x) is the mean squared residual of regressing 1{Y <= x} on
[1, 1{H <= x}]; K2(x) = F_Y(x)(1 - F_Y(x)) - K1(x).
"""
import logging
from dataclasses import dataclass

import numpy as np

from cdf.grids import EvalGrid
from core.exceptions import DimensionMismatchError
from surrogate.regression import fitted_values
from .indicators import IndicatorStats, check_pair, indicator_fields, indicator_stats
from .weights import WeightSpec

logger = logging.getLogger(__name__)


def k_fields_from_stats(stats: IndicatorStats):
    """
    Closed form of the two-column regression residual.

    Returns:
        Tuple (K1, K2), same shape as the stats
    """
    variance_y = np.asarray(stats.variance_y, dtype=float)
    variance_h = np.asarray(stats.variance_h, dtype=float)
    covariance = np.asarray(stats.covariance, dtype=float)
    inside = np.asarray(stats.inside_support)
    explained = np.where(inside, covariance ** 2 / np.where(inside, variance_h, 1.0), 0.0)
    k1 = np.clip(variance_y - explained, 0.0, variance_y)
    return k1, variance_y - k1


def k_fields(batch, coeffs, x):
    """(K1(x), K2(x)) at one point."""
    k1, k2 = k_fields_from_stats(indicator_stats(batch, coeffs, x))
    return float(k1), float(k2)


@dataclass(frozen=True)
class KIntegrals:
    """Weighted integrals of K1, K2 and of the ECDF variance F(1 - F)."""

    k1_hat: float
    k2_hat: float
    variance_integral: float


def integration_grid(y, h, weight: WeightSpec):
    """
    Evaluation grid and per-point weights for the K integrals.

    In d=1 the grid is the union of Y and H values, where every field is
    piecewise constant; otherwise it is the midpoint lattice of the weight.
    """
    d = y.shape[1]
    weight.check(d)
    if d == 1:
        grid = EvalGrid.from_arrays(np.unique(np.concatenate([y[:, 0], h[:, 0]])))
        return grid, None
    grid, volume = weight.quadrature()
    return grid, volume


def integrate_field(values, grid: EvalGrid, weight: WeightSpec, volume=None) -> float:
    if grid.d == 1:
        return weight.integrate_steps(grid.breakpoints[0], values)
    return float(np.sum(values) * volume)


def k_hats_from_values(y, h, weight: WeightSpec, c_subset: float) -> KIntegrals:
    """
    k1_hat = int w K1, k2_hat = c_S int w K2, from exploration Y and fitted H.
    """
    y, h = check_pair(y, h)
    grid, volume = integration_grid(y, h, weight)
    stats = indicator_fields(y, h, grid)
    k1, k2 = k_fields_from_stats(stats)
    k1_integral = integrate_field(k1, grid, weight, volume)
    k2_integral = integrate_field(k2, grid, weight, volume)
    variance_integral = integrate_field(np.asarray(stats.variance_y), grid, weight, volume)
    return KIntegrals(
        k1_hat=k1_integral,
        k2_hat=c_subset * k2_integral,
        variance_integral=variance_integral,
    )


def k_hats(batch, coeffs, weight: WeightSpec, c_subset: float):
    """Weighted k-hat pair for one fitted subset."""
    if batch.y.shape[1] != coeffs.output_dim:
        raise DimensionMismatchError("surrogate output dimension does not match Y")
    integrals = k_hats_from_values(batch.y, fitted_values(batch, coeffs), weight, c_subset)
    return integrals.k1_hat, integrals.k2_hat
