"""
Indicator statistics of the sliced control variate.

For exploration rows (Y_l, H_l) and a point x:
    f_y  = mean 1{Y_l <= x}
    f_h  = mean 1{H_l <= x}
    f_yh = mean 1{Y_l <= x and H_l <= x} = mean 1{max(Y_l, H_l) <= x}
The control-variate coefficient is alpha = cov / var of the two indicators.
"""
import math
from dataclasses import dataclass

import numpy as np

from cdf.estimates import as_sample_matrix, ecdf_eval, grid_counts
from cdf.grids import EvalGrid
from core.exceptions import DimensionMismatchError, SampleSizeError
from surrogate.regression import fitted_values

DEFAULT_TAU = 0.05


@dataclass(frozen=True, eq=False)
class IndicatorStats:
    """Empirical indicator fractions, scalars or arrays over a grid."""

    f_y: np.ndarray
    f_h: np.ndarray
    f_yh: np.ndarray

    @property
    def variance_y(self):
        return self.f_y * (1.0 - self.f_y)

    @property
    def variance_h(self):
        return self.f_h * (1.0 - self.f_h)

    @property
    def covariance(self):
        return self.f_yh - self.f_y * self.f_h

    @property
    def inside_support(self):
        """True where 0 < f_h < 1, i.e. the surrogate indicator is not constant."""
        return (self.f_h > 0.0) & (self.f_h < 1.0)


def check_pair(y, h):
    y = as_sample_matrix(y)
    h = as_sample_matrix(h)
    if y.shape != h.shape:
        raise DimensionMismatchError(f"Y rows {y.shape} and surrogate rows {h.shape} differ")
    if y.shape[0] == 0:
        raise SampleSizeError("indicator statistics need at least one exploration row")
    return y, h


def indicator_stats_from_values(y, h, x) -> IndicatorStats:
    y, h = check_pair(y, h)
    return IndicatorStats(
        f_y=np.float64(ecdf_eval(y, x)),
        f_h=np.float64(ecdf_eval(h, x)),
        f_yh=np.float64(ecdf_eval(np.maximum(y, h), x)),
    )


def indicator_stats(batch, coeffs, x) -> IndicatorStats:
    """Indicator fractions at one point x over the exploration rows of ``batch``."""
    return indicator_stats_from_values(batch.y, fitted_values(batch, coeffs), x)


def indicator_fields(y, h, grid: EvalGrid) -> IndicatorStats:
    """Indicator fractions at every lattice point of ``grid``."""
    y, h = check_pair(y, h)
    m = y.shape[0]
    return IndicatorStats(
        f_y=grid_counts(y, grid) / m,
        f_h=grid_counts(h, grid) / m,
        f_yh=grid_counts(np.maximum(y, h), grid) / m,
    )


def alpha_hat(stats: IndicatorStats):
    """
    (f_yh - f_y f_h) / (f_h (1 - f_h)) where 0 < f_h < 1, and 0 elsewhere.

    The value is a regression slope of one indicator on another, so it lies
    in [-1, 1]; rounding is clipped back into that range.
    """
    variance = np.asarray(stats.variance_h, dtype=float)
    covariance = np.asarray(stats.covariance, dtype=float)
    inside = np.asarray(stats.inside_support)
    safe = np.where(inside, variance, 1.0)
    alpha = np.where(inside, covariance / safe, 0.0)
    alpha = np.clip(alpha, -1.0, 1.0)
    return float(alpha) if alpha.ndim == 0 else alpha


def empirical_quantile(values, level: float) -> float:
    """Smallest sample value v with ECDF(v) >= level."""
    values = np.sort(np.asarray(values, dtype=float).ravel())
    rank = math.ceil(level * values.size - 1e-12)
    if rank < 1:
        raise SampleSizeError(f"the {level} quantile needs at least {math.ceil(1 / level)} samples, got {values.size}")
    return float(values[rank - 1])


def tail_alphas(y, h, tau: float = DEFAULT_TAU):
    """
    Tail-extended alpha for d=1: values used below and above the surrogate's
    empirical support.

    Returns:
        Tuple (lower, upper)
    """
    y, h = check_pair(y, h)
    if y.shape[1] != 1:
        raise DimensionMismatchError("the tail extension of alpha is only defined for d=1")
    if not 0 < tau < 0.5:
        raise ValueError(f"tail level must lie in (0, 1/2), got {tau}")
    if tau * y.shape[0] < 1 - 1e-12:
        raise SampleSizeError(f"the {tau} tail quantile needs at least {math.ceil(1 / tau)} exploration rows")
    joint = np.maximum(y, h)
    scale = tau * (1.0 - tau)
    out = []
    for level in (tau, 1.0 - tau):
        point = empirical_quantile(h, level)
        f_yh = ecdf_eval(joint, [point])
        f_y = ecdf_eval(y, [point])
        out.append(float(np.clip((f_yh - f_y * level) / scale, -1.0, 1.0)))
    return tuple(out)


def alpha_tail_extension(batch, coeffs, x: float, tau: float = DEFAULT_TAU) -> float:
    """
    Alpha estimate at a point x outside the surrogate's empirical support.

    The in-support formula is evaluated at the tau (below the support) or
    1 - tau (above it) empirical quantile of the surrogate, with the
    surrogate CDF replaced by its nominal level.
    """
    h = fitted_values(batch, coeffs)
    h_min, h_max = float(h.min()), float(h.max())
    if h_min <= x < h_max:
        raise ValueError(f"x={x} lies inside the surrogate support [{h_min}, {h_max})")
    lower, upper = tail_alphas(batch.y, h, tau)
    return lower if x < h_min else upper


def alpha_field(stats: IndicatorStats, y=None, h=None, tau=None):
    """
    Alpha at every evaluated point.

    With ``tau`` set (d=1 only) points outside the support take the tail
    values instead of 0.
    """
    alpha = np.asarray(alpha_hat(stats), dtype=float)
    if tau is None:
        return alpha
    lower, upper = tail_alphas(y, h, tau)
    f_h = np.asarray(stats.f_h, dtype=float)
    alpha = np.where(f_h <= 0.0, lower, alpha)
    return np.where(f_h >= 1.0, upper, alpha)
