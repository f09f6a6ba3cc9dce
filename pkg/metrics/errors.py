"""
Distances between an estimated CDF and an oracle CDF.
"""
import logging

import numpy as np

from cdf.estimates import CdfEstimate
from cdf.grids import EvalGrid
from core.exceptions import DimensionMismatchError
from estimators.weights import WeightSpec

logger = logging.getLogger(__name__)


def _check_pair(estimate: CdfEstimate, oracle: CdfEstimate) -> int:
    if estimate.d != oracle.d:
        raise DimensionMismatchError(f"cannot compare a {estimate.d}-d CDF with a {oracle.d}-d oracle")
    return estimate.d


def common_refinement(estimate: CdfEstimate, oracle: CdfEstimate) -> EvalGrid:
    """Lattice of the per-axis union of both breakpoint sets."""
    _check_pair(estimate, oracle)
    return EvalGrid.from_arrays(
        *(np.union1d(a, b) for a, b in zip(estimate.grid.breakpoints, oracle.grid.breakpoints))
    )


def weighted_l2_error(estimate: CdfEstimate, oracle: CdfEstimate, weight: WeightSpec) -> float:
    """
    Integral of w(x) |F(x) - F_oracle(x)|^2.

    d=1 is exact: both CDFs are constant between consecutive breakpoints of
    the union. d >= 2 uses the midpoint rule of the weight rectangle.
    """
    d = _check_pair(estimate, oracle)
    weight.check(d)
    if d == 1:
        points = common_refinement(estimate, oracle).breakpoints[0]
        gap = estimate.evaluate(points[:, None]) - oracle.evaluate(points[:, None])
        return weight.integrate_steps(points, gap ** 2)
    grid, volume = weight.quadrature()
    nodes = grid.points()
    gap = estimate.evaluate(nodes) - oracle.evaluate(nodes)
    return float(np.sum(gap ** 2) * volume)


def sup_error(estimate: CdfEstimate, oracle: CdfEstimate) -> float:
    """Largest |F - F_oracle| over the common refinement of both grids."""
    nodes = common_refinement(estimate, oracle).points()
    return float(np.max(np.abs(estimate.evaluate(nodes) - oracle.evaluate(nodes))))
