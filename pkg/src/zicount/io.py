"""CSV ingestion into :class:`Dataset` and the reverse for simulated data."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .model import INTERCEPT, Dataset

__all__ = ["DataError", "load_csv", "write_csv"]

MISSING = {"", "na", "nan", "null", "none", "."}


class DataError(ValueError):
    """Malformed input data; ``line`` and ``column`` locate the problem when known."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


def _float(cell):
    try:
        return float(cell)
    except ValueError:
        return None


def _encode(name, cells, first_line):
    """Numeric column as-is; all-text column as reference-coded indicators."""
    parsed = [_float(c) for c in cells]
    bad = [i for i, v in enumerate(parsed) if v is None]
    if not bad:
        return [name], np.array(parsed, dtype=float)[:, None]
    if len(bad) < len(cells):
        i = next(i for i, v in enumerate(parsed) if v is not None)
        j = bad[0]
        raise DataError(
            f"cannot parse {cells[j]!r} in a column that is numeric elsewhere (e.g. {cells[i]!r})",
            line=first_line + j,
            column=name,
        )
    levels = sorted(set(cells))
    cols = [f"{name}[{lev}]" for lev in levels[1:]]
    M = np.array([[1.0 if c == lev else 0.0 for lev in levels[1:]] for c in cells]).reshape(len(cells), len(cols))
    return cols, M


def _design(names, table, n, first_line, intercept):
    labels = [INTERCEPT] if intercept else []
    blocks = [np.ones((n, 1))] if intercept else []
    for name in names:
        cols, M = _encode(name, table[name], first_line)
        labels += cols
        blocks.append(M)
    M = np.hstack(blocks) if blocks else np.empty((n, 0))
    return M, tuple(labels)


def load_csv(path, response: str, count_formula, zero_formula=None, intercept: bool = True) -> Dataset:
    """Read a comma-separated file with a header row into a :class:`Dataset`.

    ``zero_formula=None`` gives a dataset without a zero part; an empty list
    gives an intercept-only zero part.  Rows with missing values in any used
    column are rejected, never dropped.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError("empty file")
        header = [h.strip() for h in header]
        rows = [r for r in reader if any(c.strip() for c in r)]
    if not rows:
        raise DataError("file has a header but no data rows")
    count_formula = list(count_formula or [])
    zero_part = zero_formula is not None
    zero_formula = list(zero_formula or [])
    used = [response] + count_formula + [c for c in zero_formula if c not in count_formula]
    for c in used:
        if c not in header:
            raise DataError("missing column", column=c)
    index = {h: i for i, h in enumerate(header)}
    first_line = 2

    table = {c: [] for c in used}
    missing_lines = []
    for offset, row in enumerate(rows):
        line = first_line + offset
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, found {len(row)}", line=line)
        cells = {c: row[index[c]].strip() for c in used}
        if any(v.lower() in MISSING for v in cells.values()):
            missing_lines.append(line)
            continue
        for c in used:
            table[c].append(cells[c])
    if missing_lines:
        raise DataError(f"missing values on lines {', '.join(map(str, missing_lines))}")

    y = []
    for offset, cell in enumerate(table[response]):
        v = _float(cell)
        if v is None or not np.isfinite(v) or v < 0 or not float(v).is_integer():
            raise DataError(f"response {cell!r} is not a nonnegative integer", line=first_line + offset, column=response)
        y.append(int(v))
    n = len(y)
    X, x_names = _design(count_formula, table, n, first_line, intercept)
    if zero_part:
        Z, z_names = _design(zero_formula, table, n, first_line, intercept)
    else:
        Z, z_names = np.empty((n, 0)), ()
    return Dataset(np.array(y, dtype=np.int64), X, Z, x_names, z_names)


def write_csv(data: Dataset, path, response: str = "y") -> None:
    """Write ``y`` and the non-intercept design columns with round-trip precision."""
    names = [c for c in data.x_names if c != INTERCEPT]
    cols = [data.X[:, data.x_names.index(c)] for c in names]
    for c in data.z_names:
        if c != INTERCEPT and c not in names:
            names.append(c)
            cols.append(data.Z[:, data.z_names.index(c)])
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([response] + names)
        for i in range(data.n):
            w.writerow([int(data.y[i])] + [repr(float(c[i])) for c in cols])
