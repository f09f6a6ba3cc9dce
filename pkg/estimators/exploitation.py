"""
Exploitation CDF estimator.

    F(x) = F_Y(x) - alpha(x) [F_H^epr(x) - F_H^ept(x)]

F_Y and F_H^epr come from the exploration rows, F_H^ept from the N_S
exploitation draws pushed through the same frozen surrogate.
"""
import logging

import numpy as np

from cdf.estimates import CdfEstimate, as_sample_matrix, grid_counts
from cdf.grids import EvalGrid, build_grid
from core.exceptions import DimensionMismatchError, SampleSizeError
from surrogate.regression import apply_surrogate, fitted_values
from .indicators import alpha_field, check_pair, indicator_fields

logger = logging.getLogger(__name__)

ALPHA_PLAIN = "plain"
ALPHA_TAIL = "tail-extended"


def estimator_grid(y, h_epr, h_ept, weight=None, resolution=None) -> EvalGrid:
    """
    d=1: every distinct exploration Y, exploration H and exploitation H value.
    d >= 2: equispaced lattice on the weight rectangle.
    """
    y = as_sample_matrix(y)
    if y.shape[1] == 1:
        values = np.concatenate([y[:, 0], as_sample_matrix(h_epr)[:, 0], as_sample_matrix(h_ept)[:, 0]])
        return build_grid(samples=values)
    if weight is None or not weight.bounded:
        raise DimensionMismatchError("d >= 2 estimates need a rectangle weight to place their grid")
    return build_grid(domain=weight.bounds, resolution=resolution or weight.resolution)


def exploitation_cdf_from_values(y, h_epr, h_ept, grid: EvalGrid, alpha_mode: str = ALPHA_PLAIN, tau: float = 0.05) -> CdfEstimate:
    """
    Materialize the control-variate estimator on ``grid``.

    Raw values are kept; ``values`` are clipped to [0, 1]. The result is not
    monotone in general.
    """
    y, h_epr = check_pair(y, h_epr)
    h_ept = as_sample_matrix(h_ept)
    if h_ept.shape[0] == 0:
        raise SampleSizeError("exploitation batch is empty")
    if h_ept.shape[1] != y.shape[1]:
        raise DimensionMismatchError("exploitation surrogate values have the wrong dimension")

    stats = indicator_fields(y, h_epr, grid)
    tail_tau = tau if alpha_mode == ALPHA_TAIL else None
    if tail_tau is not None and y.shape[1] != 1:
        raise DimensionMismatchError("the tail-extended alpha is only available for d=1")
    alpha = alpha_field(stats, y, h_epr, tail_tau)
    f_h_ept = grid_counts(h_ept, grid) / h_ept.shape[0]
    raw = stats.f_y - alpha * (stats.f_h - f_h_ept)
    return CdfEstimate(grid=grid, values=np.clip(raw, 0.0, 1.0), monotone=False, raw=raw)


def exploitation_cdf(exploration, coeffs, exploitation, grid=None, alpha_mode: str = ALPHA_PLAIN, tau: float = 0.05, weight=None) -> CdfEstimate:
    """
    Control-variate CDF estimate from an exploration batch, the surrogate
    fitted on it, and an exploitation batch of the same subset.
    """
    if tuple(exploitation.subset) != tuple(coeffs.subset):
        raise DimensionMismatchError(
            f"exploitation subset {exploitation.subset} does not match surrogate subset {coeffs.subset}"
        )
    if exploitation.count == 0:
        raise SampleSizeError("exploitation batch is empty")
    h_epr = fitted_values(exploration, coeffs)
    h_ept = apply_surrogate(coeffs, exploitation.x)
    if grid is None:
        grid = estimator_grid(exploration.y, h_epr, h_ept, weight)
    return exploitation_cdf_from_values(exploration.y, h_epr, h_ept, grid, alpha_mode, tau)
