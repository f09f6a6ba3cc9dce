"""
Validation and sampling for multifidelity ensembles.

Functions:
- validate: check a handle and derive costs (c_epr, c_S table)
- sample_joint: exploration draws of all models
- sample_subset: exploitation draws of one subset
- sample_high_fidelity: Y-only draws for the ECDF baseline
- analytic_cdf: closed-form F_Y for linear-Gaussian ensembles
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from django.conf import settings
from scipy.stats import norm

from core.exceptions import ConfigurationError
from . import gbm
from .pool import PoolState
from .specs import (
    KIND_GBM,
    KIND_LINEAR_GAUSSIAN,
    KIND_POOL,
    EnsembleDescriptor,
    EnsembleHandle,
    JointBatch,
    SubsetBatch,
    nonempty_subsets,
)

logger = logging.getLogger(__name__)


@dataclass
class SampleStream:
    """Random state for one batch (or one run, for pools)."""

    rng: np.random.Generator
    pool: Optional[PoolState] = None
    gbm_chunk: int = gbm.DEFAULT_CHUNK

    def pool_state(self, handle: EnsembleHandle) -> PoolState:
        if self.pool is None:
            self.pool = PoolState.for_run(handle, self.rng)
        return self.pool


def _is_multiple(value: float, unit: float) -> bool:
    ratio = value / unit
    return ratio >= 1 - 1e-9 and abs(ratio - round(ratio)) <= 1e-9 * max(1.0, ratio)


def validate(handle: EnsembleHandle, max_low_fidelity: Optional[int] = None) -> EnsembleDescriptor:
    """
    Check ensemble invariants and compute its cost tables.

    Raises:
        ConfigurationError: nonpositive cost, bad dims, dt not nested, pool mismatch
    """
    if max_low_fidelity is None:
        max_low_fidelity = settings.CVMDL_MAX_LOW_FIDELITY
    errors = {}
    ids = [spec.id for spec in handle.specs]
    if ids != list(range(len(handle.specs))):
        errors["specs"] = [f"model ids must be contiguous 0..n, got {ids}"]
    if handle.n < 1:
        errors["specs"] = ["at least one low-fidelity model is required"]
    elif handle.n > max_low_fidelity:
        errors["specs"] = [f"at most {max_low_fidelity} low-fidelity models are supported"]
    bad_costs = [spec.cost for spec in handle.specs if not (math.isfinite(spec.cost) and spec.cost > 0)]
    if bad_costs:
        errors["costs"] = [f"costs must be positive and finite, got {bad_costs}"]
    if any(spec.dim < 1 for spec in handle.specs):
        errors["dims"] = ["every model dimension must be at least 1"]

    if handle.kind == KIND_GBM:
        params = handle.gbm
        if params is None:
            errors["gbm"] = ["missing GBM parameters"]
        else:
            if len(params.dt_levels) != len(handle.specs):
                errors["dt_levels"] = ["one dt level per model is required"]
            levels = list(params.dt_levels)
            if any(coarser <= finer for finer, coarser in zip(levels, levels[1:])):
                errors["dt_levels"] = ["dt levels must be distinct and listed finest first"]
            finest = params.finest_dt
            for dt in params.dt_levels:
                if dt <= 0 or not _is_multiple(params.horizon, dt) or not _is_multiple(dt, finest):
                    errors.setdefault("dt_levels", []).append(f"dt={dt} is not nested in the horizon grid")
            if any(dim != 2 for dim in handle.dims):
                errors["dims"] = ["GBM models output (S_min, S_max); every dim must be 2"]
            if params.sigma < 0 or params.s0 <= 0 or params.horizon <= 0:
                errors["gbm"] = ["need sigma >= 0, s0 > 0 and horizon > 0"]
    elif handle.kind == KIND_LINEAR_GAUSSIAN:
        params = handle.linear_gaussian
        if params is None:
            errors["linear_gaussian"] = ["missing linear-Gaussian parameters"]
        else:
            if len(params.noise_stds) != handle.n:
                errors["noise_stds"] = ["one noise std per low-fidelity model is required"]
            if params.std <= 0 or any(s < 0 for s in params.noise_stds):
                errors["linear_gaussian"] = ["std must be positive and noise stds nonnegative"]
            if len(set(handle.dims)) != 1:
                errors["dims"] = ["linear-Gaussian models share the dimension of Y"]
    elif handle.kind == KIND_POOL:
        if handle.pool is None:
            errors["pool"] = ["missing pool table"]
        else:
            table = handle.pool.table
            if table.ndim != 2 or table.shape[1] != handle.total_columns:
                errors["pool"] = [
                    f"pool table has {table.shape[-1]} columns, dims require {handle.total_columns}"
                ]
            elif table.shape[0] < handle.min_exploration:
                errors["pool"] = [f"pool needs at least {handle.min_exploration} rows"]
    else:
        errors["kind"] = [f"unknown ensemble kind {handle.kind!r}"]

    if errors:
        raise ConfigurationError("invalid ensemble configuration", errors)

    subset_costs = {subset: handle.subset_cost(subset) for subset in nonempty_subsets(handle.n)}
    return EnsembleDescriptor(
        d=handle.d,
        dims=handle.dims,
        costs=handle.costs,
        c_epr=handle.c_epr,
        subset_costs=subset_costs,
    )


def _split_pool_rows(handle: EnsembleHandle, rows: np.ndarray):
    offsets = handle.column_offsets()
    blocks = [rows[:, start:start + spec.dim] for start, spec in zip(offsets, handle.specs)]
    return blocks[0], blocks[1:]


def _draw_all_models(handle: EnsembleHandle, count: int, stream: SampleStream):
    """Return (y, [x_1..x_n]) for ``count`` coupled draws."""
    if handle.kind == KIND_GBM:
        params = handle.gbm
        draws = gbm.simulate_levels(params, params.dt_levels, count, stream.rng, stream.gbm_chunk)
        blocks = [draws[dt] for dt in params.dt_levels]
        return blocks[0], blocks[1:]
    if handle.kind == KIND_LINEAR_GAUSSIAN:
        params = handle.linear_gaussian
        y = params.mean + params.std * stream.rng.standard_normal((count, handle.d))
        xs = [y + noise * stream.rng.standard_normal((count, handle.d)) for noise in params.noise_stds]
        return y, xs
    rows = handle.pool.table[stream.pool_state(handle).take(count, stream.rng)]
    return _split_pool_rows(handle, rows)


def sample_joint(handle: EnsembleHandle, count: int, stream: SampleStream) -> JointBatch:
    """
    Draw ``count`` i.i.d. coupled exploration samples of (Y, X_1..X_n).

    Charged at c_epr per draw. Identical stream state gives a bit-identical batch.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return JointBatch.empty(handle)
    y, xs = _draw_all_models(handle, count, stream)
    return JointBatch(count=count, y=y, x=tuple(xs), charged_cost=count * handle.c_epr)


def sample_subset(handle: EnsembleHandle, subset, count: int, stream: SampleStream) -> SubsetBatch:
    """
    Draw ``count`` exploitation samples of X_S only, charged at c_S per draw.

    Draws use their own stream (or unused pool rows) and are independent of
    every exploration batch.
    """
    subset = handle.check_subset(subset)
    if count < 0:
        raise ValueError("count must be nonnegative")
    cost = count * handle.subset_cost(subset)
    if count == 0:
        return SubsetBatch(subset=subset, count=0, x=np.empty((0, handle.subset_dim(subset))), charged_cost=0.0)

    if handle.kind == KIND_GBM:
        params = handle.gbm
        levels = [params.dt_levels[i] for i in subset]
        draws = gbm.simulate_levels(params, levels, count, stream.rng, stream.gbm_chunk)
        x = np.hstack([draws[dt] for dt in levels])
    elif handle.kind == KIND_LINEAR_GAUSSIAN:
        params = handle.linear_gaussian
        latent = params.mean + params.std * stream.rng.standard_normal((count, handle.d))
        blocks = []
        for i in range(1, handle.n + 1):
            noise = stream.rng.standard_normal((count, handle.d))
            if i in subset:
                blocks.append(latent + params.noise_stds[i - 1] * noise)
        x = np.hstack(blocks)
    else:
        rows = handle.pool.table[stream.pool_state(handle).take(count, stream.rng)]
        _, xs = _split_pool_rows(handle, rows)
        x = np.hstack([xs[i - 1] for i in subset])
    return SubsetBatch(subset=subset, count=count, x=x, charged_cost=cost)


def sample_high_fidelity(handle: EnsembleHandle, count: int, stream: SampleStream):
    """
    Draw ``count`` samples of Y alone.

    Returns:
        Tuple (y matrix, charged cost = count * c_0)
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    cost = count * handle.specs[0].cost
    if count == 0:
        return np.empty((0, handle.d)), 0.0
    if handle.kind == KIND_GBM:
        params = handle.gbm
        y = gbm.simulate_levels(params, [params.finest_dt], count, stream.rng, stream.gbm_chunk)[params.finest_dt]
    elif handle.kind == KIND_LINEAR_GAUSSIAN:
        params = handle.linear_gaussian
        y = params.mean + params.std * stream.rng.standard_normal((count, handle.d))
    else:
        rows = handle.pool.table[stream.pool_state(handle).take(count, stream.rng)]
        y, _ = _split_pool_rows(handle, rows)
    return y, cost


def analytic_cdf(handle: EnsembleHandle, points: np.ndarray) -> np.ndarray:
    """Exact F_Y at rows of ``points`` (linear-Gaussian ensembles only)."""
    if handle.kind != KIND_LINEAR_GAUSSIAN:
        raise ConfigurationError(f"no closed-form CDF for ensemble kind {handle.kind!r}")
    params = handle.linear_gaussian
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return norm.cdf(points, loc=params.mean, scale=params.std).prod(axis=1)
