"""
Risk metrics of a one-dimensional CDF estimate.

The default convention inverts the step CDF by linear interpolation through
its (value, location) pairs; the ``atoms`` mode treats the jumps as exact
point masses instead.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from cdf.estimates import CdfEstimate, Cdf1D, quantile
from core.exceptions import ImproperCdfError

MODE_INTERPOLATED = "interpolated"
MODE_ATOMS = "atoms"

DEFAULT_CVAR_LEVELS = (0.99,)


@dataclass
class RiskReport:
    mean: float
    std: float
    cvar: dict = field(default_factory=dict)
    quantiles: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "std": self.std,
            "cvar": {str(level): value for level, value in self.cvar.items()},
            "quantiles": {str(level): value for level, value in self.quantiles.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RiskReport":
        return cls(
            mean=payload["mean"],
            std=payload["std"],
            cvar={float(level): value for level, value in payload.get("cvar", {}).items()},
            quantiles={float(level): value for level, value in payload.get("quantiles", {}).items()},
        )


def as_cdf1d(cdf) -> Cdf1D:
    if isinstance(cdf, CdfEstimate):
        return cdf.to_cdf1d()
    return cdf


def _check_proper(cdf: Cdf1D) -> None:
    if cdf.final_value < 1 - 1e-9:
        raise ImproperCdfError(f"CDF only reaches {cdf.final_value}; its support is unbounded")
    if not np.all(np.isfinite(cdf.points)):
        raise ImproperCdfError("CDF jump locations must be finite")


def _inverse_knots(cdf: Cdf1D):
    """Knots (p, F^{-1}(p)) of the interpolated inverse, starting at p=0."""
    levels, first = np.unique(np.minimum(cdf.values, 1.0), return_index=True)
    locations = cdf.points[first]
    return np.concatenate([[0.0], levels]), np.concatenate([[locations[0]], locations])


def _segments(cdf: Cdf1D, lower: float):
    """Linear pieces of the inverse CDF restricted to [lower, 1]."""
    p, z = _inverse_knots(cdf)
    keep = p > lower
    knots = np.concatenate([[lower], p[keep]])
    values = np.interp(knots, p, z)
    if knots[-1] < 1.0:
        knots = np.append(knots, 1.0)
        values = np.append(values, z[-1])
    return knots, values


def cvar(cdf, a: float, mode: str = MODE_INTERPOLATED) -> float:
    """
    Upper-tail conditional value at risk: (1 / (1 - a)) int_a^1 F^{-1}(p) dp.

    Raises:
        ValueError: a outside (0, 1)
        ImproperCdfError: the CDF does not reach 1
    """
    if not 0 < a < 1:
        raise ValueError(f"CVaR level must lie in (0, 1), got {a}")
    cdf = as_cdf1d(cdf)
    _check_proper(cdf)
    if mode == MODE_ATOMS:
        upper = np.minimum(cdf.values, 1.0)
        lower = np.concatenate([[0.0], upper[:-1]])
        overlap = np.clip(upper - np.maximum(lower, a), 0.0, None)
        return float(np.dot(overlap, cdf.points) / (1 - a))
    if mode != MODE_INTERPOLATED:
        raise ValueError(f"unknown inversion mode {mode!r}")
    knots, values = _segments(cdf, a)
    area = np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(knots))
    return float(area / (1 - a))


def mean_std_from_cdf(cdf, mode: str = MODE_INTERPOLATED):
    """
    Mean and standard deviation of the distribution the CDF induces.

    Returns:
        Tuple (mean, std)
    """
    cdf = as_cdf1d(cdf)
    _check_proper(cdf)
    if mode == MODE_ATOMS:
        masses = np.clip(cdf.masses, 0.0, None)
        masses = masses / masses.sum()
        mean = float(np.dot(masses, cdf.points))
        second = float(np.dot(masses, cdf.points ** 2))
    elif mode == MODE_INTERPOLATED:
        knots, values = _segments(cdf, 0.0)
        widths = np.diff(knots)
        left, right = values[:-1], values[1:]
        mean = float(np.sum(0.5 * (left + right) * widths))
        second = float(np.sum((left ** 2 + left * right + right ** 2) / 3.0 * widths))
    else:
        raise ValueError(f"unknown inversion mode {mode!r}")
    return mean, math.sqrt(max(second - mean ** 2, 0.0))


def relative_error(estimate: float, reference: float) -> float:
    """|estimate - reference| / |reference|; inf for a nonzero gap to a zero reference."""
    gap = abs(estimate - reference)
    if reference == 0:
        return 0.0 if gap == 0 else math.inf
    return gap / abs(reference)


def risk_report(cdf, levels=DEFAULT_CVAR_LEVELS, quantile_levels=(), mode: str = MODE_INTERPOLATED) -> RiskReport:
    """Mean, std, CVaR at every level and the requested quantiles."""
    cdf = as_cdf1d(cdf)
    mean, std = mean_std_from_cdf(cdf, mode)
    return RiskReport(
        mean=mean,
        std=std,
        cvar={float(a): cvar(cdf, a, mode) for a in levels},
        quantiles={float(p): quantile(cdf, p) for p in quantile_levels},
    )
