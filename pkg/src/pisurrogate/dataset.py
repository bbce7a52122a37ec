"""Named-column numeric datasets with CSV round-tripping."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dimensions import VariableSpec


@dataclass(frozen=True)
class Dataset:
    """An ``n x k`` real matrix with column names.

    ``output`` names the response column when one is present.  ``specs`` links
    columns back to the physical variables they came from (empty for derived
    columns).
    """

    columns: tuple[str, ...]
    values: np.ndarray
    provenance: str = "training"
    output: str | None = None
    specs: Mapping[str, VariableSpec] = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        object.__setattr__(self, "columns", tuple(self.columns))
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise ValueError(f"values shape {values.shape} does not match {len(self.columns)} columns")
        if values.shape[0] < 1:
            raise ValueError("a dataset needs at least one row")
        if np.isnan(values).any():
            raise ValueError("datasets may not contain missing entries")
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        if self.output is not None and self.output not in self.columns:
            raise ValueError(f"output column {self.output!r} not present")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_columns(cls, data: Mapping[str, np.ndarray], **kwargs) -> Dataset:
        names = list(data)
        n = max(np.size(v) for v in data.values())
        mat = np.column_stack([np.broadcast_to(np.asarray(data[k], dtype=float), (n,)) for k in names])
        return cls(tuple(names), mat, **kwargs)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def input_columns(self) -> tuple[str, ...]:
        return tuple(c for c in self.columns if c != self.output)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def __getitem__(self, name: str) -> np.ndarray:
        return self.column(name)

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def as_dict(self) -> dict[str, np.ndarray]:
        return {c: self.values[:, k] for k, c in enumerate(self.columns)}

    def select(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self.column(c) for c in names]) if names else np.empty((self.n, 0))

    @property
    def X(self) -> np.ndarray:
        return self.select(self.input_columns)

    @property
    def y(self) -> np.ndarray:
        if self.output is None:
            raise ValueError("dataset has no output column")
        return self.column(self.output)

    def with_column(self, name: str, values, output: bool = False) -> Dataset:
        values = np.broadcast_to(np.asarray(values, dtype=float), (self.n,))
        return Dataset(
            self.columns + (name,),
            np.column_stack([self.values, values]),
            provenance=self.provenance,
            output=name if output else self.output,
            specs=self.specs,
        )

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update("|".join(self.columns).encode())
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()[:16]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for row in self.values:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, output: str | None = None, provenance: str = "training") -> Dataset:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        values = np.array([[float(v) for v in r] for r in body if r], dtype=float)
        if output is not None and output not in header:
            output = None
        return cls(tuple(h.strip() for h in header), values, provenance=provenance, output=output)
