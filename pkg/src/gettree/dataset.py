"""Tabular data loading, min-max normalization and reproducible splits.

Shuffling uses numpy's ``PCG64`` bit generator (``np.random.default_rng``)
seeded with the user-supplied integer, so partitions are reproducible
across platforms for a given numpy major version.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


class RawData(NamedTuple):
    X: np.ndarray
    y: np.ndarray
    feature_names: Optional[list]


def _parse_cell(text, row, col):
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col}: cannot parse {text!r} as a number") from None
    if not np.isfinite(value):
        raise DataError(f"row {row}, column {col}: non-finite value {text!r}")
    return value


def read_matrix(path, has_header=False, allow_empty=False):
    """Read a numeric CSV into a 2-D array. Returns ``(matrix, header_or_None)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    header = None
    if has_header:
        if not rows:
            raise DataError("no rows: file is empty")
        header = [c.strip() for c in rows.pop(0)]
    if not rows:
        if allow_empty:
            width = len(header) if header is not None else 0
            return np.zeros((0, width)), header
        raise DataError("no rows")
    width = len(header) if header is not None else len(rows[0])
    # line numbers are 1-based and count the header
    offset = 2 if has_header else 1
    data = np.empty((len(rows), width))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"row {i + offset}: expected {width} columns, found {len(r)}")
        for j, cell in enumerate(r):
            data[i, j] = _parse_cell(cell.strip(), i + offset, j + 1)
    return data, header


def load_csv(path, target_column: Union[str, int], has_header: bool = False) -> RawData:
    """Load a numeric CSV and split off the target column.

    ``target_column`` is a header name (requires ``has_header``) or a
    0-based column index; negative indices count from the end.
    """
    data, header = read_matrix(path, has_header=has_header)
    ncol = data.shape[1]
    if isinstance(target_column, str) and not target_column.lstrip("-").isdigit():
        if header is None:
            raise DataError(f"target column {target_column!r} given by name but file has no header")
        if target_column not in header:
            raise DataError(f"missing target column {target_column!r}")
        idx = header.index(target_column)
    else:
        idx = int(target_column)
        if not -ncol <= idx < ncol:
            raise DataError(f"missing target column: index {idx} out of range for {ncol} columns")
        idx %= ncol
    if ncol < 2:
        raise DataError("need at least one feature column besides the target")
    keep = [j for j in range(ncol) if j != idx]
    names = [header[j] for j in keep] if header is not None else None
    return RawData(data[:, keep], data[:, idx].copy(), names)


@dataclass(frozen=True)
class NormalizationTransform:
    x_min: np.ndarray
    x_max: np.ndarray
    y_min: float
    y_max: float

    @classmethod
    def fit(cls, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        return cls(X.min(axis=0), X.max(axis=0), float(y.min()), float(y.max()))

    @staticmethod
    def _scale(v, lo, hi):
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (v - lo) / safe, 0.0)

    def transform_X(self, X):
        return self._scale(np.asarray(X, dtype=float), self.x_min, self.x_max)

    def transform_y(self, y):
        return self._scale(np.asarray(y, dtype=float), self.y_min, self.y_max)

    def inverse_y(self, y):
        # constant target: every prediction maps back to that constant
        return self.y_min + np.asarray(y, dtype=float) * (self.y_max - self.y_min)

    def inverse_X(self, X):
        return self.x_min + np.asarray(X, dtype=float) * (self.x_max - self.x_min)

    def to_dict(self):
        return {
            "x_min": self.x_min.tolist(),
            "x_max": self.x_max.tolist(),
            "y_min": self.y_min,
            "y_max": self.y_max,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["x_min"], float), np.asarray(d["x_max"], float),
                   float(d["y_min"]), float(d["y_max"]))


@dataclass(frozen=True)
class Dataset:
    """Normalized features in [0, 1]^p and targets in [0, 1]."""

    X: np.ndarray
    y: np.ndarray
    norm: Optional[NormalizationTransform] = None
    feature_names: Optional[list] = None

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"row count mismatch: {X.shape[0]} feature rows, {y.shape[0]} targets")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("dataset needs n >= 1 and p >= 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.X[idx], self.y[idx], self.norm, self.feature_names)


def normalize(raw, y=None, fit_rows=None) -> Dataset:
    """Min-max normalize raw data into a :class:`Dataset`.

    ``raw`` is a :class:`RawData` or a feature matrix (then ``y`` is
    required). Statistics come from ``fit_rows`` when given, e.g. the
    training partition, otherwise from every row.
    """
    if isinstance(raw, RawData):
        X, y, names = raw
    else:
        X, names = raw, None
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("raw values must be finite")
    rows = slice(None) if fit_rows is None else np.asarray(fit_rows)
    norm = NormalizationTransform.fit(X[rows], y[rows])
    return Dataset(norm.transform_X(X), norm.transform_y(y), norm, names)


@dataclass(frozen=True)
class SplitSpec:
    """``mode`` is ``"holdout_75_25"``, ``"holdout_50_25_25"`` or ``"kfold"``."""

    mode: str = "holdout_75_25"
    seed: int = 0
    k: int = 5

    @classmethod
    def parse(cls, text, seed=0):
        """Parse the CLI forms ``75/25``, ``50/25/25`` and ``cv:<k>``."""
        text = text.strip()
        if text == "75/25":
            return cls("holdout_75_25", seed)
        if text == "50/25/25":
            return cls("holdout_50_25_25", seed)
        if text.startswith("cv:"):
            return cls("kfold", seed, int(text[3:]))
        raise DataError(f"unknown split {text!r}; expected 75/25, 50/25/25 or cv:<k>")


@dataclass
class Partition:
    train: np.ndarray
    test: np.ndarray
    validation: Optional[np.ndarray] = None
    folds: list = field(default_factory=list)


def split(n_or_ds, spec: SplitSpec) -> Partition:
    """Partition sample indices ``0..n-1`` according to ``spec``.

    For ``kfold`` the ``folds`` attribute holds ``k`` (train, validation)
    index pairs over all samples and ``train``/``test`` are left as the
    first fold's pair.
    """
    n = n_or_ds if isinstance(n_or_ds, (int, np.integer)) else len(n_or_ds.y)
    perm = np.random.default_rng(spec.seed).permutation(n)
    if spec.mode == "holdout_75_25":
        n_train = int(round(0.75 * n))
        part = Partition(np.sort(perm[:n_train]), np.sort(perm[n_train:]))
        sizes = [len(part.train), len(part.test)]
    elif spec.mode == "holdout_50_25_25":
        n_train = int(round(0.5 * n))
        n_val = int(round(0.25 * n))
        part = Partition(np.sort(perm[:n_train]), np.sort(perm[n_train + n_val:]),
                         np.sort(perm[n_train:n_train + n_val]))
        sizes = [len(part.train), len(part.validation), len(part.test)]
    elif spec.mode == "kfold":
        if spec.k < 2:
            raise DataError("kfold needs k >= 2")
        chunks = np.array_split(perm, spec.k)
        folds = []
        for i, val in enumerate(chunks):
            tr = np.concatenate([c for j, c in enumerate(chunks) if j != i])
            folds.append((np.sort(tr), np.sort(val)))
        sizes = [len(c) for c in chunks]
        part = Partition(folds[0][0], folds[0][1], folds=folds)
    else:
        raise DataError(f"unknown split mode {spec.mode!r}")
    if min(sizes) == 0:
        raise DataError(f"n={n} too small: split {spec.mode} would leave a partition empty")
    return part
