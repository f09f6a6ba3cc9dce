"""
Euler-Maruyama extrema of geometric Brownian motion.

All levels of one path share a single Brownian realization: a coarse
increment is the sum of the fine increments it spans.
"""
import numpy as np

from core.exceptions import DimensionMismatchError
from .specs import GbmParams

DEFAULT_CHUNK = 256


def coarsen_increments(increments: np.ndarray, factor: int) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments along the last axis."""
    if factor == 1:
        return increments
    paths, steps = increments.shape
    if steps % factor:
        raise DimensionMismatchError(f"{steps} increments cannot be grouped by {factor}")
    return increments.reshape(paths, steps // factor, factor).sum(axis=2)


def euler_extrema(params: GbmParams, dt: float, increments: np.ndarray):
    """
    Run S_{k+1} = S_k + mu S_k dt + sigma S_k dW_k on rows of increments at step ``dt``.

    Returns:
        Tuple (s_min, s_max) of arrays, one entry per path, including S_0
    """
    factors = 1.0 + params.mu * dt + params.sigma * increments
    path = params.s0 * np.cumprod(factors, axis=1)
    s_min = np.minimum(path.min(axis=1), params.s0)
    s_max = np.maximum(path.max(axis=1), params.s0)
    return s_min, s_max


def gbm_extrema_path(params: GbmParams, dt: float, shared_increments: np.ndarray):
    """
    Discrete extrema of one path at level ``dt`` driven by finest-level increments.

    Args:
        params: GBM parameters
        dt: One of ``params.dt_levels``
        shared_increments: Brownian increments at the finest dt covering the horizon

    Returns:
        Tuple (s_min, s_max)
    """
    if dt not in params.dt_levels:
        raise ValueError(f"dt={dt} is not one of the configured levels")
    increments = np.asarray(shared_increments, dtype=float).reshape(1, -1)
    if increments.shape[1] != params.steps(params.finest_dt):
        raise DimensionMismatchError(
            f"expected {params.steps(params.finest_dt)} increments, got {increments.shape[1]}"
        )
    coarse = coarsen_increments(increments, params.ratio(dt))
    s_min, s_max = euler_extrema(params, dt, coarse)
    return float(s_min[0]), float(s_max[0])


def simulate_levels(params: GbmParams, levels, count: int, rng, chunk: int = DEFAULT_CHUNK) -> dict:
    """
    Coupled (S_min, S_max) draws at several levels.

    Increments are generated at the finest requested level, chunk by chunk
    from ``rng``, and aggregated for the coarser ones.

    Returns:
        Mapping dt -> (count x 2) array of (S_min, S_max)
    """
    levels = list(levels)
    base_dt = min(levels)
    base_steps = params.steps(base_dt)
    out = {dt: np.empty((count, 2)) for dt in levels}
    scale = np.sqrt(base_dt)
    for start in range(0, count, chunk):
        size = min(chunk, count - start)
        increments = rng.standard_normal((size, base_steps)) * scale
        for dt in levels:
            coarse = coarsen_increments(increments, params.ratio(dt, base_dt))
            s_min, s_max = euler_extrema(params, dt, coarse)
            out[dt][start:start + size, 0] = s_min
            out[dt][start:start + size, 1] = s_max
    return out
