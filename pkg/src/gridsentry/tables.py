"""Sample tables and their CSV serialization.

Every dataset artifact in the pipeline is a flat float64 matrix with a
fixed column layout:

    time,V1,V2,V3,I1,I2,I3,P_DG1,Q_DG1,f_DG1,...,P_DG10,Q_DG10,f_DG10,
    label_bin,label_multi

Values are written as decimal text with 9 significant digits; the two
label columns are written as integers.  Reading a file written by this
module and writing it again reproduces the bytes exactly, so CSV is the
canonical interchange format between pipeline stages.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import SchemaError

N_DG = 10
BUS_NAMES = ("V1", "V2", "V3", "I1", "I2", "I3")

FEATURE_COLUMNS = tuple(
    list(BUS_NAMES)
    + [f"{q}_DG{i}" for i in range(1, N_DG + 1) for q in ("P", "Q", "f")]
)
LABEL_COLUMNS = ("label_bin", "label_multi")
SCHEMA = ("time",) + FEATURE_COLUMNS + LABEL_COLUMNS

FLOAT_FMT = "%.9g"


@dataclass
class SampleTable:
    """A column-named float64 matrix; the unit every pipeline stage consumes."""

    columns: tuple
    data: np.ndarray  # (n_rows, n_cols) float64

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise SchemaError(f"table data must be 2-D, got shape {self.data.shape}")
        if self.data.shape[1] != len(self.columns):
            raise SchemaError(
                f"{len(self.columns)} column names for {self.data.shape[1]} data columns"
            )

    def __len__(self):
        return self.data.shape[0]

    def col(self, name: str) -> np.ndarray:
        try:
            return self.data[:, self.columns.index(name)]
        except ValueError:
            raise SchemaError(f"no column named {name!r}") from None

    def col_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaError(f"no column named {name!r}") from None

    @property
    def has_labels(self) -> bool:
        return all(c in self.columns for c in LABEL_COLUMNS)

    def features(self) -> np.ndarray:
        """The 36 measurement columns, in schema order."""
        idx = [self.col_index(c) for c in FEATURE_COLUMNS]
        return self.data[:, idx]

    def take(self, rows) -> "SampleTable":
        return SampleTable(self.columns, self.data[np.asarray(rows, dtype=np.intp)])

    def copy(self) -> "SampleTable":
        return SampleTable(self.columns, self.data.copy())


def check_sample_schema(table: SampleTable):
    if table.columns != SCHEMA:
        raise SchemaError(
            f"unexpected column layout: got {len(table.columns)} columns "
            f"starting {table.columns[:4]}, want the canonical {len(SCHEMA)}-column schema"
        )


def _format_rows(columns, data, int_cols) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns))
    buf.write("\n")
    n_cols = len(columns)
    fmts = ["%d" if j in int_cols else FLOAT_FMT for j in range(n_cols)]
    row_fmt = ",".join(fmts) + "\n"
    for row in data:
        buf.write(row_fmt % tuple(row))
    return buf.getvalue()


def write_csv(table: SampleTable, path):
    """Write a table; floats at 9 significant digits, labels as integers."""
    if not np.isfinite(table.data).all():
        raise SchemaError(f"refusing to write non-finite values to {path}")
    int_cols = {
        j for j, c in enumerate(table.columns) if c in LABEL_COLUMNS
    }
    text = _format_rows(table.columns, table.data, int_cols)
    with open(path, "w") as fh:
        fh.write(text)


def read_csv(path, expect_schema: bool = False) -> SampleTable:
    """Read a CSV written by write_csv back into a SampleTable."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header:
            raise SchemaError(f"{path}: empty file")
        columns = tuple(header.split(","))
        try:
            data = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise SchemaError(f"{path}: {exc}") from None
    if data.size == 0:
        data = np.empty((0, len(columns)))
    if data.shape[1] != len(columns):
        raise SchemaError(
            f"{path}: {data.shape[1]} data columns under a "
            f"{len(columns)}-column header"
        )
    table = SampleTable(columns, data)
    if expect_schema:
        check_sample_schema(table)
    return table
