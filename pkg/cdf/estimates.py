"""
Piecewise-constant CDF representations.

- CdfEstimate: tensor of values on an EvalGrid (any d)
- Cdf1D: jump locations and right-continuous values (d=1)
- ecdf_eval / grid_ecdf / empirical_cdf: empirical CDFs of sample matrices
- quantile: linear interpolation of the inverse of a Cdf1D
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from core.exceptions import DimensionMismatchError, ImproperCdfError, SampleSizeError
from .grids import EvalGrid

MONOTONE_TOL = 1e-12


def as_sample_matrix(samples) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    return samples


@dataclass(eq=False)
class CdfEstimate:
    """
    CDF values on a grid.

    ``values`` are what callers consume (clipped to [0, 1] once repaired);
    ``raw`` keeps the unclipped control-variate values when they exist.
    """

    grid: EvalGrid
    values: np.ndarray
    monotone: bool = False
    raw: Optional[np.ndarray] = None
    sweeps: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if self.raw is not None:
            self.raw = np.asarray(self.raw, dtype=float).reshape(self.grid.shape)

    @property
    def d(self) -> int:
        return self.grid.d

    def is_monotone(self, tol: float = MONOTONE_TOL) -> bool:
        return all(np.all(np.diff(self.values, axis=axis) >= -tol) for axis in range(self.d))

    def evaluate(self, points) -> np.ndarray:
        """
        Right-continuous step lookup at rows of ``points``.

        Below the first breakpoint in any dimension the value is 0; beyond the
        last breakpoint the last value holds.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.d == 1 and points.shape[1] != 1 and points.shape[0] == 1:
            points = points.T
        if points.shape[1] != self.d:
            raise DimensionMismatchError(f"expected {self.d}-dimensional points, got {points.shape[1]}")
        index = []
        below = np.zeros(points.shape[0], dtype=bool)
        for axis, breakpoints in enumerate(self.grid.breakpoints):
            position = np.searchsorted(breakpoints, points[:, axis], side="right") - 1
            below |= position < 0
            index.append(np.clip(position, 0, None))
        out = self.values[tuple(index)]
        out[below] = 0.0
        return out

    def to_cdf1d(self) -> "Cdf1D":
        if self.d != 1:
            raise DimensionMismatchError("only d=1 estimates convert to Cdf1D")
        return Cdf1D(points=self.grid.breakpoints[0].copy(), values=self.values.copy())

    def to_dict(self) -> dict:
        payload = {
            "grid": self.grid.to_dict(),
            "values": self.values.ravel(order="C").tolist(),
            "monotone": bool(self.monotone),
            "sweeps": int(self.sweeps),
        }
        if self.raw is not None:
            payload["raw"] = self.raw.ravel(order="C").tolist()
        return payload

    @classmethod
    def from_dict(cls, payload: dict) -> "CdfEstimate":
        grid = EvalGrid.from_dict(payload["grid"])
        return cls(
            grid=grid,
            values=np.asarray(payload["values"], dtype=float),
            monotone=payload.get("monotone", False),
            raw=np.asarray(payload["raw"], dtype=float) if "raw" in payload else None,
            sweeps=payload.get("sweeps", 0),
        )

    def to_frame(self) -> pd.DataFrame:
        """Long table: one row per lattice point, columns z_1..z_d and value."""
        frame = pd.DataFrame(self.grid.points(), columns=[f"z_{k + 1}" for k in range(self.d)])
        frame["value"] = self.values.ravel(order="C")
        if self.raw is not None:
            frame["raw"] = self.raw.ravel(order="C")
        return frame


@dataclass(eq=False)
class Cdf1D:
    """Right-continuous step CDF: F(x) = values[j] for points[j] <= x < points[j+1]."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).ravel()
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.points.shape != self.values.shape or self.points.size == 0:
            raise ImproperCdfError("a 1-d CDF needs one value per jump location")
        if np.any(np.diff(self.points) <= 0):
            raise ImproperCdfError("jump locations must be strictly increasing")
        if np.any(np.diff(self.values) < -MONOTONE_TOL):
            raise ImproperCdfError("CDF values must be nondecreasing")
        if self.values[0] < -MONOTONE_TOL or self.values[-1] > 1 + MONOTONE_TOL:
            raise ImproperCdfError("CDF values must lie in [0, 1]")

    @classmethod
    def from_samples(cls, samples) -> "Cdf1D":
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size == 0:
            raise SampleSizeError("empirical CDF of an empty sample set")
        points, counts = np.unique(samples, return_counts=True)
        return cls(points=points, values=np.cumsum(counts) / samples.size)

    @property
    def final_value(self) -> float:
        return float(self.values[-1])

    @property
    def masses(self) -> np.ndarray:
        """Jump sizes (the first jump is measured from 0)."""
        return np.diff(self.values, prepend=0.0)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        position = np.searchsorted(self.points, x, side="right") - 1
        return np.where(position < 0, 0.0, self.values[np.clip(position, 0, None)])


def ecdf_eval(samples, x) -> float:
    """Fraction of sample rows componentwise <= x."""
    samples = as_sample_matrix(samples)
    if samples.shape[0] == 0:
        raise SampleSizeError("empirical CDF of an empty sample set")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != samples.shape[1]:
        raise DimensionMismatchError(f"expected a {samples.shape[1]}-vector, got {x.size}")
    return float(np.mean(np.all(samples <= x, axis=1)))


def grid_counts(samples, grid: EvalGrid) -> np.ndarray:
    """
    Number of rows <= each lattice point.

    Each row is dropped into the first lattice cell that dominates it, then
    counts are accumulated along every axis.
    """
    samples = as_sample_matrix(samples)
    if samples.shape[1] != grid.d:
        raise DimensionMismatchError(f"samples have {samples.shape[1]} columns, grid has {grid.d} axes")
    index = [np.searchsorted(breakpoints, samples[:, axis], side="left") for axis, breakpoints in enumerate(grid.breakpoints)]
    inside = np.all([idx < size for idx, size in zip(index, grid.shape)], axis=0)
    counts = np.zeros(grid.shape)
    np.add.at(counts, tuple(idx[inside] for idx in index), 1.0)
    for axis in range(grid.d):
        counts = np.cumsum(counts, axis=axis)
    return counts


def grid_ecdf(samples, grid: EvalGrid) -> np.ndarray:
    samples = as_sample_matrix(samples)
    if samples.shape[0] == 0:
        raise SampleSizeError("empirical CDF of an empty sample set")
    return grid_counts(samples, grid) / samples.shape[0]


def empirical_cdf(samples, grid: Optional[EvalGrid] = None) -> CdfEstimate:
    """ECDF as a CdfEstimate; d=1 defaults to the sample-induced grid."""
    samples = as_sample_matrix(samples)
    if samples.shape[0] == 0:
        raise SampleSizeError("empirical CDF of an empty sample set")
    if grid is None:
        if samples.shape[1] != 1:
            raise DimensionMismatchError("d >= 2 empirical CDFs need an explicit grid")
        cdf = Cdf1D.from_samples(samples[:, 0])
        return CdfEstimate(grid=EvalGrid.from_arrays(cdf.points), values=cdf.values, monotone=True)
    return CdfEstimate(grid=grid, values=grid_ecdf(samples, grid), monotone=True)


def quantile(cdf: Cdf1D, p: float) -> float:
    """
    Inverse CDF by linear interpolation through the points (F_j, z_j).

    Levels at or below the first value map to the first jump location.
    Repeated values keep their first (leftmost) location.

    Raises:
        ImproperCdfError: p outside (0, 1) or above the final value
    """
    if not 0 < p < 1:
        raise ImproperCdfError(f"quantile level must lie in (0, 1), got {p}")
    if p > cdf.final_value + MONOTONE_TOL:
        raise ImproperCdfError(f"CDF only reaches {cdf.final_value}, cannot invert at {p}")
    if p <= cdf.values[0]:
        return float(cdf.points[0])
    levels, first = np.unique(cdf.values, return_index=True)
    return float(np.interp(p, levels, cdf.points[first]))
