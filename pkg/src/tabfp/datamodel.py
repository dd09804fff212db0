"""CSV ingestion into a typed numeric matrix plus run configuration.

A table is held as float64 values with NaN at missing cells and a parallel
boolean mask. Columns whose cells never parse as numbers are label-encoded
(sorted level order -> codes 0..L-1) so class columns such as species names
still participate in the matrix and in categorical partitioning; every such
cell also counts toward the "non numeric percent" tally.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import (
    ConfigError,
    DuplicateHeaderError,
    EmptyFileError,
    NoNumericColumnsError,
)

DEFAULT_CLASS_COLUMNS = ("class", "quality", "species")

_WS = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    """Column-name normalization: strip, collapse whitespace to underscores."""
    return _WS.sub("_", name.strip())


@dataclass
class FingerprintConfig:
    """Run configuration for the fingerprinting pipeline."""

    dp_enabled: bool = False
    epsilon: float = 1.0
    rho: float = 0.95
    kappa: int = 12
    n_min: int = 30
    scad_a: float = 3.7
    seed: int = 42
    column_bounds: dict[str, tuple[float, float]] | None = None
    class_columns: tuple[str, ...] = DEFAULT_CLASS_COLUMNS
    dp_data_level: bool = False

    def __post_init__(self):
        if self.dp_enabled and not self.epsilon > 0:
            raise ConfigError("epsilon must be > 0 when dp_enabled")
        if not (0.0 < self.rho < 1.0):
            raise ConfigError("rho must lie in (0, 1)")
        if self.kappa < 1:
            raise ConfigError("kappa must be a positive integer")
        if self.n_min < 2:
            raise ConfigError("n_min must be >= 2")
        if not self.scad_a > 2:
            raise ConfigError("scad_a must be > 2")

    def snapshot(self) -> dict:
        d = asdict(self)
        d["class_columns"] = list(self.class_columns)
        if self.column_bounds is not None:
            d["column_bounds"] = {k: list(v) for k, v in self.column_bounds.items()}
        return d


@dataclass
class ColumnKind:
    kind: str  # "numeric" | "categorical"
    unique_count: int

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"


@dataclass
class DataMatrix:
    """An n x p numeric table with missingness bookkeeping.

    values holds NaN where missing_mask is True. level_names maps the index
    of a label-encoded column to its sorted level labels; encoded cells carry
    the level's position. Instances are treated as immutable after load.
    """

    values: np.ndarray
    column_names: list[str]
    missing_mask: np.ndarray
    non_numeric_mask: np.ndarray
    level_names: dict[int, list[str]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def non_numeric_fraction(self) -> np.ndarray:
        return self.non_numeric_mask.mean(axis=0)

    def column(self, j: int) -> np.ndarray:
        """Non-missing entries of column j."""
        return self.values[~self.missing_mask[:, j], j]

    def level_label(self, j: int, value: float) -> str:
        """Human label for a cell value of column j (decodes label encoding)."""
        if j in self.level_names:
            idx = int(round(value))
            levels = self.level_names[j]
            if 0 <= idx < len(levels):
                return levels[idx]
        if float(value).is_integer():
            return str(int(value))
        return repr(float(value))


def _parse_cell(token: str) -> float | None:
    token = token.strip()
    if not token:
        return None
    try:
        v = float(token)
    except ValueError:
        return None
    if math.isnan(v) or math.isinf(v):
        return None
    return v


def load_csv(path, config: FingerprintConfig | None = None) -> DataMatrix:
    """Load an RFC-4180 CSV (UTF-8, header row) into a DataMatrix.

    Cells that fail numeric parsing inside an otherwise numeric column are
    marked missing and tallied as non-numeric; columns with no numeric cell
    at all are label-encoded instead.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]  # drop fully blank lines
    if len(rows) < 2:
        raise EmptyFileError(f"{path}: need a header row and at least one data row")

    header = [normalize_name(h) for h in rows[0]]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DuplicateHeaderError(f"{path}: duplicate column names {dupes}")

    p = len(header)
    body = rows[1:]
    n = len(body)
    cells = [[row[j].strip() if j < len(row) else "" for j in range(p)] for row in body]

    values = np.full((n, p), np.nan)
    missing = np.ones((n, p), dtype=bool)
    non_numeric = np.zeros((n, p), dtype=bool)
    level_names: dict[int, list[str]] = {}
    any_numeric_column = False

    for j in range(p):
        parsed = [_parse_cell(cells[i][j]) for i in range(n)]
        has_numeric = any(v is not None for v in parsed)
        nonempty = [i for i in range(n) if cells[i][j]]
        if has_numeric:
            any_numeric_column = True
            for i in range(n):
                if parsed[i] is not None:
                    values[i, j] = parsed[i]
                    missing[i, j] = False
                elif cells[i][j]:
                    non_numeric[i, j] = True
        elif nonempty:
            # pure token column: encode sorted levels as 0..L-1
            levels = sorted({cells[i][j] for i in nonempty})
            code = {lv: k for k, lv in enumerate(levels)}
            for i in nonempty:
                values[i, j] = code[cells[i][j]]
                missing[i, j] = False
                non_numeric[i, j] = True
            level_names[j] = levels
        # else: fully empty column stays all-missing

    if not any_numeric_column:
        raise NoNumericColumnsError(f"{path}: no column contains numeric data")

    return DataMatrix(values, header, missing, non_numeric, level_names)


def write_csv(m: DataMatrix, path) -> None:
    """Write a DataMatrix back to CSV; missing cells become empty strings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(m.column_names)
        for i in range(m.n):
            row = []
            for j in range(m.p):
                if m.missing_mask[i, j]:
                    row.append("")
                elif j in m.level_names:
                    row.append(m.level_names[j][int(round(m.values[i, j]))])
                else:
                    row.append(repr(float(m.values[i, j])))
            w.writerow(row)


def classify_columns(m: DataMatrix, kappa: int,
                     class_columns=DEFAULT_CLASS_COLUMNS) -> list[ColumnKind]:
    """Cardinality thresholding: <= kappa distinct non-missing values is
    categorical; class-named columns are categorical regardless."""
    kinds = []
    class_set = {normalize_name(c).lower() for c in class_columns}
    for j, name in enumerate(m.column_names):
        col = m.column(j)
        unique_count = len(np.unique(col)) if col.size else 0
        forced = name.lower() in class_set
        if forced or unique_count <= kappa:
            kinds.append(ColumnKind("categorical", unique_count))
        else:
            kinds.append(ColumnKind("numeric", unique_count))
    return kinds
