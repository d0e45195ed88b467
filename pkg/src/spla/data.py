"""Dataset ingestion, centering/standardization and sample covariance."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .matops import NotPositiveDefiniteError, cholesky_upper

__all__ = [
    "DataError",
    "ConstantColumnError",
    "DataMatrix",
    "CovMatrix",
    "load_csv",
    "center",
    "standardize",
    "sample_cov",
]


class DataError(Exception):
    """Invalid dataset content (parsing, arity, non-numeric cells)."""


class ConstantColumnError(DataError):
    """A column with (numerically) zero sample standard deviation."""


@dataclass(frozen=True)
class DataMatrix:
    """An ``N x M`` observation matrix with named variables."""

    values: np.ndarray
    variable_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        if values.ndim != 2:
            raise DataError(f"expected 2-d data, got shape {values.shape}")
        n, m = values.shape
        if n < 2:
            raise DataError("need at least 2 observations")
        if len(self.variable_names) != m:
            raise DataError(
                f"{len(self.variable_names)} names for {m} columns"
            )
        if len(set(self.variable_names)) != m:
            raise DataError("variable names must be unique")
        if not np.all(np.isfinite(values)):
            raise DataError("data contains missing or non-finite cells")

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CovMatrix:
    """An ``M x M`` symmetric positive-definite covariance/correlation matrix."""

    values: np.ndarray
    variable_names: tuple[str, ...]
    is_correlation: bool = False
    n_obs: int | None = field(default=None)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))
        m = values.shape[0]
        if values.ndim != 2 or values.shape[1] != m:
            raise DataError(f"covariance must be square, got {values.shape}")
        if len(self.variable_names) != m:
            raise DataError(f"{len(self.variable_names)} names for {m} variables")
        if m > 1 and np.max(np.abs(values - values.T)) > 1e-10:
            raise DataError("covariance matrix is not symmetric")
        # Assumption: the covariance is strictly positive definite. Verified
        # eagerly so near-singular conditioning blocks surface here, not in a
        # later regression projection.
        try:
            cholesky_upper(values)
        except NotPositiveDefiniteError as exc:
            raise DataError(f"covariance matrix is not positive definite: {exc}")
        if self.is_correlation and np.max(np.abs(values.diagonal() - 1.0)) > 1e-10:
            raise DataError("correlation matrix must have unit diagonal")

    @property
    def n_vars(self) -> int:
        return self.values.shape[0]

    def trace(self) -> float:
        return float(np.trace(self.values))


def load_csv(path) -> DataMatrix:
    """Read a CSV dataset: header row of variable names, numeric body.

    Separator ``,``, decimal point ``.``, UTF-8. Wrong-arity rows and
    non-numeric cells abort with a row/column diagnostic.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        names = [h.strip() for h in header]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(names):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(names)}"
                )
            parsed = []
            for col, cell in zip(names, row):
                cell = cell.strip()
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {col!r}: non-numeric value {cell!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return DataMatrix(np.array(rows, dtype=float), tuple(names))


def center(d: DataMatrix) -> DataMatrix:
    """Subtract each column's sample mean."""
    return DataMatrix(d.values - d.values.mean(axis=0), d.variable_names)


def standardize(d: DataMatrix) -> DataMatrix:
    """Center and scale each column to unit sample variance (divisor N-1)."""
    centered = d.values - d.values.mean(axis=0)
    sd = centered.std(axis=0, ddof=1)
    bad = np.nonzero(sd <= 1e-12)[0]
    if bad.size:
        raise ConstantColumnError(
            f"constant column(s): {', '.join(d.variable_names[i] for i in bad)}"
        )
    return DataMatrix(centered / sd, d.variable_names)


def sample_cov(d: DataMatrix, is_correlation: bool | None = None) -> CovMatrix:
    """Sample covariance ``(N-1)^-1 x^T x`` of the centered data.

    Centers internally; positive definiteness is asserted on construction.
    When ``is_correlation`` is omitted it is inferred from the diagonal.
    """
    x = d.values - d.values.mean(axis=0)
    s = (x.T @ x) / (d.n_obs - 1)
    s = (s + s.T) / 2.0
    if is_correlation is None:
        is_correlation = bool(np.max(np.abs(s.diagonal() - 1.0)) <= 1e-10)
    try:
        return CovMatrix(s, d.variable_names, is_correlation=is_correlation,
                         n_obs=d.n_obs)
    except NotPositiveDefiniteError:
        raise NotPositiveDefiniteError(
            "sample covariance is not positive definite (collinear sample?)"
        ) from None
