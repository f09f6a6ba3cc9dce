"""
Weight functions for the weighted L2 loss.

Two kinds are supported: the constant weight 1 (d=1 only) and the indicator
of a bounded rectangle. In d=1 step functions integrate exactly over their
breakpoint partition; in d >= 2 integrals use the midpoint rule on the
rectangle.
"""
import logging
from dataclasses import dataclass

import numpy as np

from cdf.grids import quadrature_grid
from core.exceptions import ConfigurationError, DimensionMismatchError

logger = logging.getLogger(__name__)

KIND_CONSTANT = "constant-one"
KIND_RECTANGLE = "rectangle"

WEIGHT_KINDS = [
    (KIND_CONSTANT, "Constant weight 1 on the real line (d=1)"),
    (KIND_RECTANGLE, "Indicator of a bounded rectangle"),
]


@dataclass(frozen=True)
class WeightSpec:
    kind: str = KIND_CONSTANT
    bounds: tuple = ()
    resolution: int = 128

    def __post_init__(self):
        if self.kind not in (KIND_CONSTANT, KIND_RECTANGLE):
            raise ConfigurationError(f"unknown weight kind {self.kind!r}")
        if self.kind == KIND_RECTANGLE:
            if not self.bounds:
                raise ConfigurationError("a rectangle weight needs bounds")
            for lo, hi in self.bounds:
                if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
                    raise ConfigurationError(f"rectangle side [{lo}, {hi}] must be finite with positive length")
        if self.resolution < 1:
            raise ConfigurationError("quadrature resolution must be positive")

    @classmethod
    def rectangle(cls, bounds, resolution: int = 128) -> "WeightSpec":
        return cls(kind=KIND_RECTANGLE, bounds=tuple((float(lo), float(hi)) for lo, hi in bounds), resolution=resolution)

    @property
    def bounded(self) -> bool:
        return self.kind == KIND_RECTANGLE

    def check(self, d: int) -> None:
        """Raise unless this weight is usable for d-dimensional CDFs."""
        if self.kind == KIND_CONSTANT and d != 1:
            raise DimensionMismatchError("the constant weight is only integrable in d=1")
        if self.kind == KIND_RECTANGLE and len(self.bounds) != d:
            raise DimensionMismatchError(f"rectangle has {len(self.bounds)} sides, CDF has dimension {d}")

    def cell_lengths(self, breakpoints: np.ndarray) -> np.ndarray:
        """
        Weighted length of each cell [z_j, z_{j+1}), the last cell being [z_M, inf).
        """
        left = np.asarray(breakpoints, dtype=float)
        right = np.append(left[1:], np.inf)
        if self.kind == KIND_CONSTANT:
            return right - left
        lo, hi = self.bounds[0]
        return np.clip(np.minimum(right, hi) - np.maximum(left, lo), 0.0, None)

    def integrate_steps(self, breakpoints, values) -> float:
        """
        Integral of a right-continuous step function over d=1.

        ``values[j]`` holds on [z_j, z_{j+1}); the function is 0 below z_0 and
        keeps its last value beyond z_M. Returns inf when the weight is
        unbounded and the last value is nonzero.
        """
        values = np.asarray(values, dtype=float)
        lengths = self.cell_lengths(breakpoints)
        if np.isinf(lengths[-1]):
            if values[-1] != 0:
                logger.warning("Step function does not vanish at +inf under an unbounded weight; integral is infinite")
                return float("inf")
            lengths = lengths.copy()
            lengths[-1] = 0.0
        return float(np.dot(values, lengths))

    def quadrature(self, resolution=None):
        """Midpoint nodes and cell volume on the rectangle."""
        if self.kind != KIND_RECTANGLE:
            raise ConfigurationError("grid quadrature needs a rectangle weight")
        return quadrature_grid(self.bounds, resolution or self.resolution)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "bounds": [list(pair) for pair in self.bounds], "resolution": self.resolution}
