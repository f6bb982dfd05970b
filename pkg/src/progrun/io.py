"""Progressive CSV ingestion: chunked parsing under the module quantum.

A loader walks a glob of files (optionally bz2/gzip compressed, streamed),
parses up to ``step_size`` rows per run_step call, and appends them to its
output table.  Column dtypes are inferred from the first chunk and fixed for
the rest of the source; files appearing later in a multi-file source may add
new columns, which are backfilled with nulls for earlier rows.
"""

import bz2
import csv
import glob as globlib
import gzip
import logging
import re

import numpy as np

from .errors import SchemaError
from .module import Module, StepResult
from .states import ModuleState
from .table import DataTable

logger = logging.getLogger(__name__)

_INT_RE = re.compile(r"^[+-]?\d+$")


def expand_glob(pattern: str) -> list:
    """Matching paths in lexicographic order; a non-glob literal passes through."""
    if globlib.has_magic(pattern):
        return sorted(globlib.glob(pattern))
    return [pattern]


def _open_text(path: str):
    if path.endswith(".bz2"):
        return bz2.open(path, "rt", encoding="utf-8", newline="")
    if path.endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8", newline="")
    return open(path, "rt", encoding="utf-8", newline="")


def infer_dtype(values) -> str:
    """Column dtype from sample strings: int64 if all integral, float64 if
    all numeric (empty cells count as missing), utf8 otherwise."""
    all_int = True
    all_float = True
    for s in values:
        if all_int and not _INT_RE.match(s):
            all_int = False
        if not all_int:
            if s == "":
                continue
            try:
                float(s)
            except ValueError:
                all_float = False
                break
    if all_int and values:
        return "int64"
    if all_float:
        return "float64"
    return "utf8"


class CsvSource:
    """Cursor over a list of CSV files, yielding rows file by file."""

    def __init__(self, pattern, delimiter=",", header=True):
        self.pattern = pattern
        self.files = expand_glob(pattern)
        self.file_index = -1
        self.delimiter = delimiter
        self.header = header
        self.skipped_rows = 0
        self._stream = None
        self._reader = None
        self._pushback = None  # first data row when the file has no header
        self.current_columns = None  # column names of the open file
        self.rows_read = 0

    @property
    def byte_offset(self):
        if self._stream is None:
            return 0
        try:
            return self._stream.buffer.tell()
        except (AttributeError, OSError):
            return None

    def _open_next(self) -> bool:
        if self._stream is not None:
            self._stream.close()
            self._stream = None
            self._reader = None
        self.file_index += 1
        if self.file_index >= len(self.files):
            return False
        path = self.files[self.file_index]
        self._stream = _open_text(path)
        self._reader = csv.reader(self._stream, delimiter=self.delimiter)
        header_row = next(self._reader, None)
        if header_row is None:
            self.current_columns = []
            return True
        if self.header:
            self.current_columns = [c.strip() for c in header_row]
        else:
            self.current_columns = [f"col{i}" for i in range(len(header_row))]
            self._pushback = header_row
        return True

    def read_rows(self, limit: int):
        """Up to ``limit`` data rows from the current file.

        Returns (rows, columns, opened_new_file).  Rows never span a file
        boundary, so per-file column layouts stay unambiguous.
        """
        opened = False
        if self._reader is None:
            if not self._open_next():
                return [], None, False
            opened = True
        rows = []
        if self._pushback is not None:
            rows.append(self._pushback)
            self._pushback = None
        while len(rows) < limit:
            row = next(self._reader, None)
            if row is None:
                self._stream.close()
                self._stream = None
                self._reader = None
                break
            if not row:
                continue
            rows.append(row)
        self.rows_read += len(rows)
        return rows, list(self.current_columns or []), opened

    def exhausted(self) -> bool:
        return self._reader is None and self.file_index >= len(self.files) - 1

    def close(self):
        if self._stream is not None:
            self._stream.close()
            self._stream = None
            self._reader = None


class CSVLoader(Module):
    """Streams CSV files into a table, a bounded chunk per activation."""

    input_descriptors = ()
    output_names = ("df",)
    param_defaults = {
        "quantum": 1.0,
        "delimiter": ",",
        "header": True,
        "infer_types": True,
        "malformed": "skip",  # or "fail"
    }

    def __init__(self, pattern, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self.pattern = pattern
        self._source = None
        self._table = None
        self._dtypes = {}  # column -> dtype, fixed once inferred
        self._warned_skip = False

    def run_step(self, run_number, step_size, howlong):
        if self._source is None:
            self._source = CsvSource(
                self.pattern,
                delimiter=self.params["delimiter"],
                header=self.params["header"],
            )
            if not self._source.files:
                return StepResult(ModuleState.BLOCKED, 0)
        rows, columns, _ = self._source.read_rows(max(int(step_size), 1))
        steps = 0
        if columns is not None:
            steps = self._ingest(rows, columns, run_number)
        if self._source.exhausted():
            self._source.close()
            return StepResult(ModuleState.ZOMBIE, steps)
        return StepResult(ModuleState.READY, steps)

    # ------------------------------------------------------------------ parsing

    def _ingest(self, rows, columns, run_number) -> int:
        if self._table is None and columns is not None:
            self._table = DataTable()
            self.set_output("df", self._table)
        if not columns and not rows:
            return 0

        expected = len(columns)
        good, bad = [], 0
        for row in rows:
            if len(row) == expected:
                good.append(row)
            else:
                bad += 1
        if bad and self.params["malformed"] == "fail":
            raise SchemaError(f"{bad} malformed rows in {self._source.files[self._source.file_index]}")

        by_col = list(zip(*good)) if good else [() for _ in columns]
        # fix dtypes for columns we have not seen before
        new_cols = [c for c in columns if c not in self._dtypes]
        for name in new_cols:
            values = by_col[columns.index(name)]
            if not self.params["infer_types"]:
                dtype = "utf8"
            else:
                dtype = infer_dtype(list(values))
                if dtype == "int64" and len(self._table):
                    dtype = "float64"  # earlier rows need a null backfill
            self._dtypes[name] = dtype
            self._table.add_column(name, dtype, run=run_number)

        if not good:
            self._count_skipped(bad)
            return 0

        converted, kept = self._convert(good, columns)
        values = {}
        n = len(kept)
        for name in self._table.column_names:
            if name in columns:
                values[name] = converted[name]
            else:  # column absent from this file: null fill
                dtype = self._dtypes[name]
                if dtype == "float64":
                    values[name] = np.full(n, np.nan)
                elif dtype == "utf8":
                    values[name] = [""] * n
                else:
                    values[name] = np.zeros(n, dtype=np.int64)
        self._table.append(values, run=run_number)
        self.mark_published(run_number)
        self._count_skipped(bad + (len(good) - n))
        return n

    def _convert(self, rows, columns):
        """Bulk-convert rows; falls back to row filtering on bad cells."""
        by_col = {name: np.asarray(vals, dtype=object) for name, vals in zip(columns, zip(*rows))}
        keep = np.ones(len(rows), dtype=bool)
        converted = {}
        any_failed = False
        for name in columns:
            dtype = self._dtypes[name]
            raw = by_col[name]
            if dtype == "utf8":
                converted[name] = raw
                continue
            try:
                converted[name] = self._cast(raw, dtype)
            except (ValueError, OverflowError):
                if self.params["malformed"] == "fail":
                    raise SchemaError(
                        f"unparseable {dtype} cell in column {name!r}"
                    ) from None
                any_failed = True
                keep &= ~self._bad_cells(raw, dtype)
        kept_rows = np.flatnonzero(keep)
        if any_failed or len(kept_rows) != len(rows):
            for name in columns:
                raw = by_col[name][keep]
                dtype = self._dtypes[name]
                converted[name] = raw if dtype == "utf8" else self._cast(raw, dtype)
        return converted, kept_rows

    @staticmethod
    def _cast(raw: np.ndarray, dtype: str) -> np.ndarray:
        if dtype == "int64":
            return raw.astype(np.int64)
        cleaned = np.where(raw == "", "nan", raw)
        return cleaned.astype(np.float64)

    @staticmethod
    def _bad_cells(raw: np.ndarray, dtype: str) -> np.ndarray:
        bad = np.zeros(len(raw), dtype=bool)
        for i, s in enumerate(raw):
            try:
                if dtype == "int64":
                    v = int(s)
                    if not -(2**63) <= v < 2**63:
                        bad[i] = True  # parses in python, overflows int64
                else:
                    float(s or "nan")
            except ValueError:
                bad[i] = True
        return bad

    def _count_skipped(self, n: int) -> None:
        if n <= 0:
            return
        self._source.skipped_rows += n
        if not self._warned_skip:
            logger.warning("%s: skipping malformed rows (%d so far)", self.name, self._source.skipped_rows)
            self._warned_skip = True

    def to_json(self, short=False):
        out = super().to_json(short=short)
        if self._source is not None:
            out["source"] = {
                "files": self._source.files,
                "file_index": self._source.file_index,
                "rows_read": self._source.rows_read,
                "byte_offset": self._source.byte_offset,
                "skipped_rows": self._source.skipped_rows,
            }
        return out
