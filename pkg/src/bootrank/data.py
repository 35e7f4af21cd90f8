"""Reading observation tables and assembling the first-stage blocks.

The first stage regresses endogenous variables ``X`` (n x k) on instruments
``Z`` (n x m) and controls ``W`` (n x l). A :class:`Table` is the raw, named
column store read from CSV; :func:`assemble` turns it into a :class:`Dataset`.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = ["Table", "Dataset", "load_csv", "set_time", "lag", "assemble", "MISSING_TOKENS"]

# Cells read as missing values (Stata writes "." for missing).
MISSING_TOKENS = frozenset({"", ".", "NA", "nan", "NaN"})


@dataclass(frozen=True)
class Table:
    """Named columns of equal length.

    Numeric columns are float arrays with ``nan`` marking missing cells; label
    columns (cluster identifiers) are kept as strings.
    """

    numeric: dict[str, np.ndarray]
    labels: dict[str, np.ndarray] = field(default_factory=dict)
    time: str | None = None

    @property
    def n_rows(self) -> int:
        for col in (*self.numeric.values(), *self.labels.values()):
            return len(col)
        return 0

    @property
    def columns(self) -> list[str]:
        return [*self.numeric, *self.labels]

    def take(self, idx: np.ndarray) -> Table:
        return Table(
            numeric={k: v[idx] for k, v in self.numeric.items()},
            labels={k: v[idx] for k, v in self.labels.items()},
            time=self.time,
        )


@dataclass(frozen=True)
class Dataset:
    """Aligned blocks of the first-stage regression.

    Attributes
    ----------
    X : (n, k) endogenous variables.
    Z : (n, m) nonconstant instruments.
    W : (n, l) controls; the first column is the constant unless suppressed.
    cluster_ids : optional (n,) array of string labels.
    time_index : optional (n,) strictly increasing integer array.
    n_table : number of rows in the source table before listwise deletion.
    names : column names of each block, keyed ``"X"``, ``"Z"``, ``"W"``.
    """

    X: np.ndarray
    Z: np.ndarray
    W: np.ndarray
    cluster_ids: np.ndarray | None = None
    time_index: np.ndarray | None = None
    n_table: int | None = None
    names: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        n = self.X.shape[0]
        if self.Z.shape[0] != n or self.W.shape[0] != n:
            raise DataError("X, Z and W must have the same number of rows")
        if self.cluster_ids is not None:
            if len(self.cluster_ids) != n:
                raise DataError("cluster_ids must have one label per row")
            if len(np.unique(self.cluster_ids)) < 2:
                raise DataError("at least two distinct clusters are required")
        if self.time_index is not None and len(self.time_index) != n:
            raise DataError("time_index must have one entry per row")
        if self.n_table is None:
            object.__setattr__(self, "n_table", n)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.Z.shape[1]

    @property
    def ell(self) -> int:
        return self.W.shape[1]

    @property
    def n_clusters(self) -> int | None:
        if self.cluster_ids is None:
            return None
        return len(np.unique(self.cluster_ids))

    def time_is_contiguous(self) -> bool:
        if self.time_index is None:
            return True
        return bool(np.all(np.diff(self.time_index) == 1))

    @classmethod
    def from_arrays(cls, X, Z, W=None, *, constant: bool = True, cluster_ids=None,
                    time_index=None) -> Dataset:
        """Build a dataset directly from arrays.

        ``W`` holds nonconstant controls; a leading column of ones is added when
        ``constant`` is true.
        """
        X = _as_2d(X, "X")
        Z = _as_2d(Z, "Z")
        n = X.shape[0]
        W = np.empty((n, 0)) if W is None else _as_2d(W, "W")
        if constant:
            W = np.column_stack([np.ones(n), W])
        if cluster_ids is not None:
            cluster_ids = np.asarray([str(c) for c in cluster_ids])
        if time_index is not None:
            time_index = np.asarray(time_index, dtype=np.int64)
        return cls(X=X, Z=Z, W=W, cluster_ids=cluster_ids, time_index=time_index)


def _as_2d(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DataError(f"{name} must be one- or two-dimensional")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains missing or non-finite values")
    return a


def load_csv(path, numeric: Sequence[str] | None = None, labels: Sequence[str] = ()) -> Table:
    """Read a UTF-8, comma-delimited CSV file with a header row.

    Parameters
    ----------
    path : path-like
    numeric : column names to parse as reals. ``None`` means every column not
        listed in ``labels``.
    labels : column names kept as strings (e.g. cluster identifiers).

    Raises
    ------
    DataError
        Missing file, duplicate or missing column, no data rows, or a cell that
        is neither a number nor a missing token. Row numbers in messages count
        data rows from 1.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file, no header row")
        header = [h.strip() for h in header]
        dupes = sorted({h for h in header if header.count(h) > 1})
        if dupes:
            raise DataError(f"{path}: duplicate column name(s) {dupes}")
        rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{path}: no data rows")

    labels = list(labels)
    if numeric is None:
        numeric = [h for h in header if h not in labels]
    missing = [c for c in (*numeric, *labels) if c not in header]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")

    pos = {h: j for j, h in enumerate(header)}
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")

    num: dict[str, np.ndarray] = {}
    for name in numeric:
        j = pos[name]
        values = np.empty(len(rows))
        for i, row in enumerate(rows, start=1):
            cell = row[j].strip()
            if cell in MISSING_TOKENS:
                values[i - 1] = np.nan
                continue
            try:
                values[i - 1] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: row {i}, column {name!r}: cannot parse {cell!r} as a number"
                ) from None
        num[name] = values
    lab = {name: np.array([row[pos[name]].strip() for row in rows]) for name in labels}
    return Table(numeric=num, labels=lab)


def set_time(table: Table, column: str) -> Table:
    """Declare ``column`` as the time index and sort rows by it.

    Time values must be integers without duplicates. Gaps are allowed here;
    :func:`lag` rejects them.
    """
    if column not in table.numeric:
        raise DataError(f"time column {column!r} not found")
    t = table.numeric[column]
    if np.any(np.isnan(t)) or np.any(t != np.round(t)):
        raise DataError(f"time column {column!r} must hold integers without missing values")
    order = np.argsort(t, kind="stable")
    if np.any(np.diff(t[order]) == 0):
        raise DataError(f"time column {column!r} has repeated values")
    sorted_table = table.take(order)
    return Table(numeric=sorted_table.numeric, labels=sorted_table.labels, time=column)


def lag(table: Table, column: str, order: int = 1) -> Table:
    """Add ``<column>_L<order>``, the value ``order`` periods earlier.

    The first ``order`` rows get a missing value and are later removed by
    :func:`assemble`.
    """
    if table.time is None:
        raise DataError("lag requires a time column; call set_time first")
    if column not in table.numeric:
        raise DataError(f"cannot lag unknown column {column!r}")
    n = table.n_rows
    if int(order) != order or order < 1:
        raise DataError(f"lag order must be a positive integer, got {order!r}")
    if order >= n:
        raise DataError(f"lag order {order} must be smaller than the number of rows {n}")
    t = table.numeric[table.time]
    if np.any(np.diff(t) != 1):
        raise DataError(f"time column {table.time!r} is not contiguous; lags are undefined")
    x = table.numeric[column]
    lagged = np.full(n, np.nan)
    lagged[order:] = x[:-order]
    numeric = dict(table.numeric)
    numeric[f"{column}_L{order}"] = lagged
    return Table(numeric=numeric, labels=table.labels, time=table.time)


def assemble(
    table: Table,
    endogenous: Sequence[str],
    instruments: Sequence[str],
    partial: Sequence[str] = (),
    noconstant: bool = False,
    cluster: str | None = None,
) -> Dataset:
    """Select the ``X``, ``Z`` and ``W`` blocks and drop incomplete rows.

    ``W`` is ``[1, partial...]``, or just ``partial`` under ``noconstant``.
    Rows with a missing value in any used column are removed (listwise
    deletion).
    """
    endogenous, instruments, partial = list(endogenous), list(instruments), list(partial)
    if not endogenous:
        raise DataError("at least one endogenous variable is required")
    if not instruments:
        raise DataError("at least one instrument is required")
    seen: dict[str, str] = {}
    for role, names in (("endogenous", endogenous), ("instruments", instruments),
                        ("partial", partial)):
        for name in names:
            if name in seen:
                raise DataError(f"variable {name!r} appears in both {seen[name]} and {role}")
            seen[name] = role
    for name in seen:
        if name not in table.numeric:
            raise DataError(f"unknown variable {name!r}")
    if cluster is not None and cluster not in table.labels and cluster not in table.numeric:
        raise DataError(f"unknown cluster variable {cluster!r}")

    used = [*endogenous, *instruments, *partial]
    mat = np.column_stack([table.numeric[c] for c in used])
    keep = ~np.any(np.isnan(mat), axis=1)
    if cluster is not None and cluster in table.numeric:
        keep &= ~np.isnan(table.numeric[cluster])
    mat = mat[keep]
    n = mat.shape[0]
    k, m = len(endogenous), len(instruments)

    X = mat[:, :k]
    Z = mat[:, k:k + m]
    W = mat[:, k + m:]
    if not noconstant:
        W = np.column_stack([np.ones(n), W])
    if n <= m + W.shape[1]:
        raise DataError(
            f"insufficient observations: n={n} must exceed m + l = {m + W.shape[1]}"
        )
    for j, name in enumerate(instruments):
        if np.ptp(Z[:, j]) == 0:
            raise DataError(f"instrument {name!r} is constant in the estimation sample")

    cluster_ids = None
    if cluster is not None:
        if cluster in table.labels:
            cluster_ids = table.labels[cluster][keep]
        else:
            cluster_ids = np.array([_label(v) for v in table.numeric[cluster][keep]])
    time_index = None
    if table.time is not None:
        time_index = table.numeric[table.time][keep].astype(np.int64)

    names = {
        "X": tuple(endogenous),
        "Z": tuple(instruments),
        "W": tuple(([] if noconstant else ["_cons"]) + partial),
    }
    return Dataset(X=X, Z=Z, W=W, cluster_ids=cluster_ids, time_index=time_index,
                   n_table=table.n_rows, names=names)


def _label(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))
