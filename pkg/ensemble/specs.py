"""
Domain types for coupled multifidelity model families.

Model 0 is the high-fidelity model Y; models 1..n are the low-fidelity
models X_1..X_n. Subsets of low-fidelity models are sorted tuples of
1-based indices.
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from core.exceptions import DimensionMismatchError

KIND_GBM = "gbm-extrema"
KIND_LINEAR_GAUSSIAN = "linear-gaussian"
KIND_POOL = "pool"

ENSEMBLE_KINDS = [
    (KIND_GBM, "Extrema of geometric Brownian motion (Euler-Maruyama levels)"),
    (KIND_LINEAR_GAUSSIAN, "Synthetic linear-Gaussian ensemble"),
    (KIND_POOL, "Tabulated pool of joint samples"),
]


def nonempty_subsets(n: int) -> list:
    """All 2^n - 1 nonempty subsets of {1..n}, in lexicographic order."""
    subsets = [combo for size in range(1, n + 1) for combo in combinations(range(1, n + 1), size)]
    return sorted(subsets)


def format_subset(subset) -> str:
    return "{" + ",".join(str(i) for i in subset) + "}"


@dataclass(frozen=True)
class ModelSpec:
    """One model of the ensemble: index, output dimension and cost per draw."""

    id: int
    dim: int
    cost: float


@dataclass(frozen=True)
class GbmParams:
    """Geometric Brownian motion discretized at several time steps (finest first)."""

    mu: float
    sigma: float
    s0: float
    horizon: float
    dt_levels: tuple

    @property
    def finest_dt(self) -> float:
        return self.dt_levels[0]

    def steps(self, dt: float) -> int:
        return int(round(self.horizon / dt))

    def ratio(self, dt: float, base_dt: Optional[float] = None) -> int:
        """Number of ``base_dt`` steps in one ``dt`` step."""
        base = self.finest_dt if base_dt is None else base_dt
        return int(round(dt / base))


@dataclass(frozen=True)
class LinearGaussianParams:
    """Y ~ N(mean, std^2 I); X_i = Y + N(0, noise_std_i^2 I)."""

    mean: float
    std: float
    noise_stds: tuple

    def correlation(self, model: int) -> float:
        noise = self.noise_stds[model - 1]
        return self.std / float(np.sqrt(self.std ** 2 + noise ** 2))


@dataclass(frozen=True, eq=False)
class PoolSource:
    """Precomputed joint samples, columns ordered (Y, X_1, ..., X_n)."""

    table: np.ndarray
    replacement: bool = False
    path: str = ""

    @property
    def rows(self) -> int:
        return self.table.shape[0]


@dataclass(frozen=True, eq=False)
class EnsembleHandle:
    """A validated, immutable multifidelity ensemble."""

    specs: tuple
    kind: str
    base_seed: int
    gbm: Optional[GbmParams] = None
    linear_gaussian: Optional[LinearGaussianParams] = None
    pool: Optional[PoolSource] = None

    @property
    def n(self) -> int:
        """Number of low-fidelity models."""
        return len(self.specs) - 1

    @property
    def d(self) -> int:
        return self.specs[0].dim

    @property
    def dims(self) -> tuple:
        return tuple(spec.dim for spec in self.specs)

    @property
    def costs(self) -> tuple:
        return tuple(spec.cost for spec in self.specs)

    @property
    def c_epr(self) -> float:
        return float(sum(self.costs))

    @property
    def min_exploration(self) -> int:
        """Initial exploration size: sum of low-fidelity dims plus two."""
        return sum(self.dims[1:]) + 2

    def subset_cost(self, subset) -> float:
        return float(sum(self.specs[i].cost for i in subset))

    def subset_dim(self, subset) -> int:
        return sum(self.specs[i].dim for i in subset)

    def column_offsets(self) -> list:
        """Start column of each model in a joint (Y, X_1, ..., X_n) row."""
        offsets = [0]
        for spec in self.specs[:-1]:
            offsets.append(offsets[-1] + spec.dim)
        return offsets

    @property
    def total_columns(self) -> int:
        return sum(self.dims)

    def check_subset(self, subset) -> tuple:
        subset = tuple(subset)
        if not subset:
            raise ValueError("subset must be nonempty")
        if any(i < 1 or i > self.n for i in subset) or len(set(subset)) != len(subset):
            raise ValueError(f"invalid subset {subset} for {self.n} low-fidelity models")
        return tuple(sorted(subset))


@dataclass(frozen=True)
class EnsembleDescriptor:
    """Summary returned by ``validate``."""

    d: int
    dims: tuple
    costs: tuple
    c_epr: float
    subset_costs: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "dims": list(self.dims),
            "costs": list(self.costs),
            "c_epr": self.c_epr,
            "subset_costs": {format_subset(s): c for s, c in self.subset_costs.items()},
        }


@dataclass(frozen=True, eq=False)
class JointBatch:
    """m coupled draws of (Y, X_1, ..., X_n)."""

    count: int
    y: np.ndarray
    x: tuple
    charged_cost: float

    def __post_init__(self):
        if self.y.shape[0] != self.count or any(block.shape[0] != self.count for block in self.x):
            raise DimensionMismatchError("all blocks of a joint batch must share the row count")

    def x_subset(self, subset) -> np.ndarray:
        """Covariate matrix X_S (m x d_S) for a subset of low-fidelity models."""
        return np.hstack([self.x[i - 1] for i in subset])

    def concat(self, other: "JointBatch") -> "JointBatch":
        return JointBatch(
            count=self.count + other.count,
            y=np.vstack([self.y, other.y]),
            x=tuple(np.vstack([a, b]) for a, b in zip(self.x, other.x)),
            charged_cost=self.charged_cost + other.charged_cost,
        )

    @classmethod
    def empty(cls, handle: EnsembleHandle) -> "JointBatch":
        return cls(
            count=0,
            y=np.empty((0, handle.d)),
            x=tuple(np.empty((0, spec.dim)) for spec in handle.specs[1:]),
            charged_cost=0.0,
        )


@dataclass(frozen=True, eq=False)
class SubsetBatch:
    """N draws of the covariates X_S of one subset, independent of exploration."""

    subset: tuple
    count: int
    x: np.ndarray
    charged_cost: float
