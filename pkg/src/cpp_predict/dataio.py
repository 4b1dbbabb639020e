"""CSV ingestion, column standardization and result emission."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conjugate import Dataset

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "NA", "N/A", "NaN", "nan", "null", "NULL"})

# Column order of the emitted tables. Extra per-run columns are not allowed so
# that downstream readers can rely on these headers.
REPLICATES_COLUMNS = (
    "replicate", "seed_entropy", "mlpd", "cpp_positive", "mean_abs_shift",
    "boundary_draws", "nonconvex_points", "failed", "error",
)
SPLITS_COLUMNS = (
    "split", "n_train", "n_test", "mlpd", "gain_clean", "gain_outlier",
    "boundary_draws", "nonconvex_points",
)
OBSERVATION_COLUMNS = (
    "unit", "index", "outlier", "y", "cpp_mean", "map_mean", "pred_var", "gain",
)


class CsvFormatError(ValueError):
    def __init__(self, path, line, column, message):
        self.path, self.line, self.column = path, line, column
        super().__init__(f"{path}:{line}: column {column!r}: {message}")


class MissingValuesError(ValueError):
    def __init__(self, rows):
        self.rows = list(rows)
        shown = ", ".join(map(str, self.rows[:20])) + (" ..." if len(self.rows) > 20 else "")
        super().__init__(f"{len(self.rows)} row(s) with missing cells (data rows {shown})")


@dataclass(frozen=True)
class LoadedData:
    data: Dataset
    features: tuple
    response: str
    dropped_rows: tuple = ()
    constant_columns: tuple = ()


def read_numeric_csv(path):
    """Header plus a float matrix; missing cells become NaN."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(path, 1, None, "file is empty") from None
        if len(set(header)) != len(header):
            raise CsvFormatError(path, 1, None, "duplicate column names")
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CsvFormatError(path, line_no, None, f"expected {len(header)} cells, got {len(row)}")
            vals = []
            for name, cell in zip(header, row):
                cell = cell.strip()
                if cell in MISSING_TOKENS:
                    vals.append(math.nan)
                    continue
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvFormatError(path, line_no, name, f"non-numeric cell {cell!r}") from None
            rows.append(vals)
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def load_csv(path, response, features=None, missing="reject") -> LoadedData:
    """Load a numeric CSV into a :class:`Dataset`.

    ``missing="reject"`` raises :class:`MissingValuesError` naming the 1-based
    data rows with empty or ``NA`` cells; ``missing="drop"`` removes them
    (complete-case analysis) and records which rows went.
    """
    header, M = read_numeric_csv(path)
    if response not in header:
        raise KeyError(f"response column {response!r} not in {header}")
    features = [h for h in header if h != response] if features is None else list(features)
    unknown = [f for f in features if f not in header]
    if unknown:
        raise KeyError(f"unknown feature columns {unknown}")
    cols = [header.index(f) for f in features]
    X = M[:, cols]
    y = M[:, header.index(response)]
    bad = ~(np.all(np.isfinite(X), axis=1) & np.isfinite(y))
    dropped = tuple(int(r) + 1 for r in np.flatnonzero(bad))
    if dropped and missing == "reject":
        raise MissingValuesError(dropped)
    if missing not in ("reject", "drop"):
        raise ValueError("missing must be 'reject' or 'drop'")
    X, y = X[~bad], y[~bad]
    constant = tuple(f for f, col in zip(features, X.T) if col.size and np.all(col == col[0]))
    if constant:
        log.warning("constant columns in %s: %s", path, ", ".join(constant))
    return LoadedData(Dataset(X, y), tuple(features), response, dropped, constant)


@dataclass(frozen=True)
class ColumnTransform:
    """Affine map fitted on training rows and reused on any other rows."""

    x_mean: np.ndarray
    x_sd: np.ndarray
    y_mean: float = 0.0
    y_sd: float = 1.0

    def apply_X(self, X):
        return (np.asarray(X, dtype=float) - self.x_mean) / self.x_sd

    def apply_y(self, y):
        return (np.asarray(y, dtype=float) - self.y_mean) / self.y_sd

    def invert_y(self, z):
        return np.asarray(z, dtype=float) * self.y_sd + self.y_mean

    def apply(self, data: Dataset) -> Dataset:
        return Dataset(self.apply_X(data.X), self.apply_y(data.y))

    def to_dict(self):
        return {"x_mean": self.x_mean.tolist(), "x_sd": self.x_sd.tolist(),
                "y_mean": self.y_mean, "y_sd": self.y_sd}


def _moments(a, what):
    mean = a.mean(axis=0)
    sd = a.std(axis=0, ddof=1)
    if np.any(~(sd > 0)):
        raise ValueError(f"zero-variance {what} column(s): {np.flatnonzero(~(sd > 0)).tolist()}")
    return mean, sd


def fit_transform(X, y=None) -> ColumnTransform:
    """Column means and sample sds (``ddof=1``); ``y=None`` leaves the response alone."""
    xm, xs = _moments(np.atleast_2d(np.asarray(X, dtype=float)), "covariate")
    if y is None:
        return ColumnTransform(xm, xs)
    ym, ys = _moments(np.asarray(y, dtype=float)[:, None], "response")
    return ColumnTransform(xm, xs, float(ym[0]), float(ys[0]))


def standardize(data: Dataset, response=True):
    """Standardize ``data`` on its own moments; returns ``(Dataset, ColumnTransform)``."""
    tr = fit_transform(data.X, data.y if response else None)
    return tr.apply(data), tr


# ---------------------------------------------------------------------------
# emission


@dataclass
class Report:
    summary: dict
    unit_name: str  # "replicates" or "splits"
    units: list
    plotdata: dict = field(default_factory=dict)


def _schema_for(name):
    return {"replicates": REPLICATES_COLUMNS, "splits": SPLITS_COLUMNS}[name]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_rows(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="raise", lineterminator="\n")
        w.writeheader()
        for row in rows:
            extra = set(row) - set(columns)
            if extra:
                raise ValueError(f"{path}: columns {sorted(extra)} are not in the schema")
            w.writerow({k: _cell(row.get(k, "")) for k in columns})


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_rows(path):
    """Read a table written by :func:`write_rows`; numeric cells become numbers."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            out.append({k: _parse_cell(v) for k, v in row.items()})
        return reader.fieldnames, out


def _parse_cell(v):
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def emit_results(report: Report, out_dir) -> list:
    """Write ``summary.json``, the per-unit table and ``plotdata_*.csv`` files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    path = out_dir / "summary.json"
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(_jsonable(report.summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    written.append(path)
    path = out_dir / f"{report.unit_name}.csv"
    write_rows(path, _schema_for(report.unit_name), report.units)
    written.append(path)
    for name, rows in report.plotdata.items():
        path = out_dir / f"plotdata_{name}.csv"
        write_rows(path, OBSERVATION_COLUMNS, rows)
        written.append(path)
    return written
