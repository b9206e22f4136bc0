"""Dataset container for the classical ML pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..core import DomainError


@dataclass
class Dataset:
    """Feature matrix, binary labels, and patient groups.

    ``groups`` ties rows to patients for group-aware CV; when absent
    each row is its own group.
    """

    X: np.ndarray
    y: np.ndarray
    groups: Optional[np.ndarray] = None
    names: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y)
        if self.X.ndim != 2:
            raise DomainError("X must be 2D (cases x features)")
        if not np.all(np.isfinite(self.X)):
            raise DomainError("X contains non-finite values")
        if self.y.shape != (self.X.shape[0],):
            raise DomainError("labels do not align with X rows")
        if not np.all(np.isin(self.y, [0, 1])):
            raise DomainError("labels must be binary 0/1")
        self.y = self.y.astype(np.int64)
        if self.groups is None:
            self.groups = np.array([f"g{i}" for i in range(len(self.y))])
        else:
            self.groups = np.asarray(self.groups)
            if self.groups.shape != self.y.shape:
                raise DomainError("groups do not align with labels")
        if not self.names:
            self.names = [f"c{j}" for j in range(self.X.shape[1])]
        elif len(self.names) != self.X.shape[1]:
            raise DomainError("column names do not align with X columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows].copy(), self.y[rows].copy(),
                       self.groups[rows].copy(), list(self.names))
