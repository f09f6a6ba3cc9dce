"""
Alternating sort: restore monotonicity of a CDF tensor by sorting it along
each axis in turn until a full sweep changes nothing.
"""
import logging

import numpy as np

from .estimates import CdfEstimate

logger = logging.getLogger(__name__)


def alternating_sort(estimate: CdfEstimate, axis_order=None, max_sweeps=None) -> CdfEstimate:
    """
    Sort the raw tensor along every axis repeatedly until it is a fixed point.

    Args:
        estimate: Tensor to repair; its ``raw`` values are used when present
        axis_order: Axes in sweep order, default ascending 0..d-1
        max_sweeps: Safety cap, default the number of entries

    Returns:
        New CdfEstimate, monotone along every axis, values clipped to [0, 1]
    """
    tensor = np.array(estimate.raw if estimate.raw is not None else estimate.values, dtype=float)
    order = tuple(range(tensor.ndim)) if axis_order is None else tuple(axis_order)
    if sorted(order) != list(range(tensor.ndim)):
        raise ValueError(f"axis order {order} is not a permutation of the {tensor.ndim} axes")
    limit = max_sweeps if max_sweeps is not None else max(tensor.size, 1)
    if not np.all(np.isfinite(tensor)):
        raise ValueError("cannot sort a tensor with non-finite entries")

    sweeps = 0
    while True:
        sweeps += 1
        changed = False
        for axis in order:
            # stable sort keeps ties in place, so a sorted axis is left untouched
            sorted_tensor = np.sort(tensor, axis=axis, kind="stable")
            if not np.array_equal(sorted_tensor, tensor):
                changed = True
                tensor = sorted_tensor
        if not changed:
            break
        if sweeps >= limit:
            logger.warning(f"Alternating sort stopped after {sweeps} sweeps without reaching a fixed point")
            break

    logger.debug(f"Alternating sort converged in {sweeps} sweeps on a {tensor.shape} tensor")
    return CdfEstimate(
        grid=estimate.grid,
        values=np.clip(tensor, 0.0, 1.0),
        monotone=not changed,
        raw=tensor,
        sweeps=sweeps,
    )
