"""
Sample-pool ensembles.

A pool is a table of precomputed joint samples (Y then X_1..X_n). Runs
draw rows from it, by default without replacement, mirroring a workflow in
which expensive simulations are generated once and reused.
"""
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from core.exceptions import ConfigurationError, DimensionMismatchError, PoolExhaustedError

logger = logging.getLogger(__name__)


def pool_header(dims) -> list:
    """Canonical column names: y_1..y_d, x1_1..x1_{d1}, x2_1.., ..."""
    names = [f"y_{k + 1}" for k in range(dims[0])]
    for model, dim in enumerate(dims[1:], start=1):
        names.extend(f"x{model}_{k + 1}" for k in range(dim))
    return names


def load_pool_table(path, dims) -> np.ndarray:
    """
    Read a pool table from CSV (with header) or ``.npy``.

    Args:
        path: File path
        dims: Model dimensions (d, d_1, ..., d_n)

    Returns:
        Float matrix with d + sum(d_i) columns
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"pool file not found: {path}")
    expected = pool_header(dims)
    if path.suffix == ".npy":
        table = np.load(path, allow_pickle=False)
    else:
        frame = pd.read_csv(path)
        if len(frame.columns) == len(expected) and list(frame.columns) != expected:
            raise ConfigurationError(f"pool header {list(frame.columns)} does not match {expected}")
        table = frame.to_numpy(dtype=float)
    table = np.atleast_2d(np.asarray(table, dtype=float))
    if table.shape[1] != len(expected):
        raise DimensionMismatchError(
            f"pool table has {table.shape[1]} columns, ensemble dims require {len(expected)}"
        )
    if not np.all(np.isfinite(table)):
        raise ConfigurationError("pool table contains non-finite entries")
    logger.info(f"Loaded pool of {table.shape[0]} rows from {path}")
    return table


def write_pool_table(path, table: np.ndarray, dims) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".npy":
        np.save(path, table)
    else:
        pd.DataFrame(table, columns=pool_header(dims)).to_csv(path, index=False, float_format="%.17g")
    return path


class PoolState:
    """
    Row bookkeeping for one run over a pool.

    Without replacement the run walks a single random permutation, so no
    row index is ever handed out twice. Owned by a single run.
    """

    def __init__(self, rows: int, replacement: bool, rng):
        self.rows = rows
        self.replacement = replacement
        self._order = None if replacement else rng.permutation(rows)
        self._cursor = 0
        self.issued = []

    @classmethod
    def for_run(cls, handle, rng) -> "PoolState":
        return cls(handle.pool.rows, handle.pool.replacement, rng)

    @property
    def remaining(self) -> int:
        if self.replacement:
            return self.rows
        return self.rows - self._cursor

    def take(self, count: int, rng) -> np.ndarray:
        """Row indices for the next batch."""
        if self.replacement:
            return rng.integers(0, self.rows, size=count)
        if count > self.remaining:
            raise PoolExhaustedError(
                f"pool exhausted: requested {count} rows, {self.remaining} of {self.rows} remain"
            )
        rows = self._order[self._cursor:self._cursor + count]
        self._cursor += count
        self.issued.append(rows)
        return rows
