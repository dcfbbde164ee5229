"""Loading, validating, writing and summarising tabular data.

CSV files have a header row, comma separators and a decimal point.  The
package ships ``swiss.csv`` (47 Swiss provinces, 1888) with all indicators
stored as proportions in ``(0, 1)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .links import LinkDomainError, LinkSpec

__all__ = [
    "Dataset",
    "DataError",
    "load_csv",
    "write_csv",
    "summarize",
    "bundled_path",
    "format_float",
]


class DataError(ValueError):
    """Malformed input file: missing column or non-numeric cell."""


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class Dataset:
    """``m x n`` matrix of observations with column names and per-column domains."""

    column_names: tuple
    values: np.ndarray
    link_domains: tuple

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float)).copy()
        names = tuple(self.column_names)
        if values.shape[1] != len(names):
            raise ValueError("number of names does not match number of columns")
        if values.shape[0] < 1:
            raise ValueError("dataset has no rows")
        domains = tuple(tuple(d) for d in self.link_domains)
        if len(domains) != len(names):
            raise ValueError("one domain per column is required")
        for c, (lo, hi) in enumerate(domains):
            _check_column(values[:, c], lo, hi, names[c])
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "link_domains", domains)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, links: Sequence[LinkSpec] | None = None,
                   names: Sequence[str] | None = None) -> "Dataset":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        n = values.shape[1]
        names = tuple(names) if names is not None else tuple(f"y{i + 1}" for i in range(n))
        domains = (tuple(l.domain for l in links) if links is not None
                   else ((-math.inf, math.inf),) * n)
        return cls(names, values, domains)


def _check_column(col: np.ndarray, lo: float, hi: float, name: str):
    bad = np.flatnonzero(~((col > lo) & (col < hi)))
    if bad.size:
        r = int(bad[0])
        raise LinkDomainError(
            f"row {r + 1}, column {name!r}: value {float(col[r])!r} is outside the open "
            f"domain ({lo:g}, {hi:g})"
        )


def bundled_path(name: str = "swiss.csv") -> Path:
    """Filesystem path of a dataset shipped inside the package."""
    return Path(str(resources.files("egse").joinpath("data").joinpath(name)))


def load_csv(path, columns: Sequence[str] | None = None, links: Sequence[LinkSpec] | None = None,
             percent: bool = False) -> Dataset:
    """Read the named numeric ``columns`` of a CSV file into a validated :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
    columns : sequence of str, optional
        Defaults to every column whose cells all parse as numbers.
    links : sequence of LinkSpec, optional
        One per column; values must lie strictly inside each link's domain.
    percent : bool
        Divide by 100 the columns whose link domain is ``(0, 1)``.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if columns is None:
        columns = [h for k, h in enumerate(header) if all(_is_float(r[k]) for r in rows)]
    columns = list(columns)
    missing = [c for c in columns if c not in header]
    if missing:
        raise DataError(f"column(s) {missing} not found in {path}; available: {header}")
    idx = [header.index(c) for c in columns]
    values = np.empty((len(rows), len(columns)))
    for r, row in enumerate(rows):
        for c, k in enumerate(idx):
            cell = row[k].strip() if k < len(row) else ""
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise DataError(f"row {r + 1}, column {columns[c]!r}: non-numeric cell {cell!r}") from None
    if links is not None and len(links) != len(columns):
        raise ValueError(f"{len(columns)} columns but {len(links)} links")
    domains = [l.domain for l in links] if links is not None else [(-math.inf, math.inf)] * len(columns)
    if percent:
        for c, dom in enumerate(domains):
            if tuple(dom) == (0.0, 1.0):
                values[:, c] /= 100.0
    return Dataset(tuple(columns), values, tuple(domains))


def _is_float(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_csv(path, values, names: Sequence[str] | None = None):
    """Write rows with 17 significant digits; header defaults to ``y1,...,yn``."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    names = list(names) if names is not None else [f"y{i + 1}" for i in range(values.shape[1])]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in values:
            w.writerow([format_float(v) for v in row])


def summarize(dataset: Dataset) -> dict:
    """Descriptive statistics per column.

    ``sd`` uses the ``m - 1`` divisor and ``cv = 100 sd / mean``; skewness and
    kurtosis are the moment ratios ``m3 / m2^1.5`` and ``m4 / m2^2 - 3``.
    Columns with zero variance are flagged and get ``nan`` shape statistics.
    """
    if dataset.m < 4:
        raise ValueError("at least 4 rows are needed")
    out = {}
    for name, col in zip(dataset.column_names, dataset.values.T):
        sd = float(np.std(col, ddof=1))
        mean = float(np.mean(col))
        degenerate = sd == 0.0
        out[name] = {
            "min": float(np.min(col)),
            "median": float(np.median(col)),
            "mean": mean,
            "max": float(np.max(col)),
            "sd": sd,
            "cv": 100.0 * sd / mean if mean != 0 else math.nan,
            "skewness": math.nan if degenerate else float(stats.skew(col)),
            "kurtosis": math.nan if degenerate else float(stats.kurtosis(col)),
            "degenerate": degenerate,
            "n": int(col.size),
        }
    return out
