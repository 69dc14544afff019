"""Named time-series container shared by the estimators and the harness."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ResultSeries:
    """Uniform time grid plus named columns of equal length."""

    times: np.ndarray
    columns: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        for name, col in self.columns.items():
            if len(col) != n:
                raise ValueError(f"column {name!r} has length {len(col)}, grid has {n}")

    def column_names(self) -> list:
        return list(self.columns)

    def merged_with(self, other: "ResultSeries", suffix: str = "") -> "ResultSeries":
        if len(other.times) != len(self.times) or np.max(np.abs(other.times - self.times)) > 1e-12:
            raise ValueError("cannot merge series on different grids")
        cols = dict(self.columns)
        for name, col in other.columns.items():
            cols[name + suffix] = col
        meta = dict(self.meta)
        for key, val in other.meta.items():
            meta.setdefault(key + suffix, val)
        return ResultSeries(self.times, cols, meta)
