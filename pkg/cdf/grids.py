"""
Tensor-product evaluation grids.

A grid stores strictly increasing breakpoints per dimension; lattice points
are their Cartesian product in row-major (``ij``) order.
"""
from dataclasses import dataclass

import numpy as np

from core.exceptions import ConfigurationError, DimensionMismatchError


@dataclass(frozen=True, eq=False)
class EvalGrid:
    breakpoints: tuple

    def __post_init__(self):
        for axis, points in enumerate(self.breakpoints):
            if points.ndim != 1 or points.size == 0:
                raise ConfigurationError(f"grid axis {axis} must be a nonempty vector")
            if np.any(np.diff(points) <= 0):
                raise ConfigurationError(f"grid axis {axis} breakpoints must be strictly increasing")

    @classmethod
    def from_arrays(cls, *arrays) -> "EvalGrid":
        return cls(tuple(np.asarray(a, dtype=float).ravel() for a in arrays))

    @property
    def d(self) -> int:
        return len(self.breakpoints)

    @property
    def shape(self) -> tuple:
        return tuple(points.size for points in self.breakpoints)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        """All lattice points as a (size x d) matrix, row-major."""
        mesh = np.meshgrid(*self.breakpoints, indexing="ij")
        return np.column_stack([axis.ravel() for axis in mesh])

    def to_dict(self) -> dict:
        return {"d": self.d, "breakpoints": [points.tolist() for points in self.breakpoints]}

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalGrid":
        return cls.from_arrays(*payload["breakpoints"])


def _normalize_bounds(bounds):
    bounds = [tuple(float(v) for v in pair) for pair in bounds]
    for lo, hi in bounds:
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise ConfigurationError(f"empty or unbounded domain [{lo}, {hi}]")
    return bounds


def build_grid(domain=None, resolution=None, samples=None) -> EvalGrid:
    """
    Build an evaluation grid.

    Args:
        domain: Per-dimension (lo, hi) intervals for an equispaced lattice
        resolution: Points per dimension (int or sequence, each >= 2)
        samples: 1-d samples; when given, breakpoints are their sorted unique values

    Returns:
        EvalGrid
    """
    if samples is not None:
        values = np.asarray(samples, dtype=float)
        if values.ndim == 2:
            if values.shape[1] != 1:
                raise DimensionMismatchError("sample-driven grids are only defined for d=1")
            values = values[:, 0]
        if values.size == 0:
            raise ConfigurationError("cannot build a grid from an empty sample set")
        return EvalGrid.from_arrays(np.unique(values))

    if domain is None:
        raise ConfigurationError("either a domain or samples are required")
    bounds = _normalize_bounds(domain)
    if resolution is None:
        raise ConfigurationError("a domain grid needs a resolution")
    counts = [int(resolution)] * len(bounds) if np.isscalar(resolution) else [int(r) for r in resolution]
    if len(counts) != len(bounds):
        raise DimensionMismatchError("resolution and domain dimensions differ")
    if any(count < 2 for count in counts):
        raise ConfigurationError("resolution must be at least 2 per dimension")
    return EvalGrid.from_arrays(*(np.linspace(lo, hi, count) for (lo, hi), count in zip(bounds, counts)))


def quadrature_grid(bounds, resolution):
    """
    Midpoint rule nodes on a rectangle.

    Returns:
        Tuple (EvalGrid of cell midpoints, volume of one cell)
    """
    bounds = _normalize_bounds(bounds)
    counts = [int(resolution)] * len(bounds) if np.isscalar(resolution) else [int(r) for r in resolution]
    if any(count < 1 for count in counts):
        raise ConfigurationError("quadrature resolution must be positive")
    axes = []
    volume = 1.0
    for (lo, hi), count in zip(bounds, counts):
        width = (hi - lo) / count
        axes.append(lo + width * (np.arange(count) + 0.5))
        volume *= width
    return EvalGrid.from_arrays(*axes), volume
