"""Columnar in-memory table with run-number provenance.

Every table carries a reserved ``_update`` column holding, per row, the run
number of the last mutation that touched it.  Together with an append-only
deletion log this is enough for consumers to ask "what changed between run
a and run b" (:meth:`DataTable.changes_between`) without the producer keeping
per-consumer state.

Row ids are dense ascending integers assigned at append time and never reused,
even after deletion.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import RunOrderError, SchemaError, UnknownRowError

UPDATE_COL = "_update"

_NULLS = {"float64": np.nan, "int64": 0, "utf8": ""}
_NP_DTYPES = {"float64": np.float64, "int64": np.int64, "utf8": object}

_generation_counter = itertools.count(1)


class _Column:
    """Growable typed column backed by a numpy buffer."""

    __slots__ = ("dtype", "_buf", "_len")

    def __init__(self, dtype: str, capacity: int = 16):
        if dtype not in _NP_DTYPES:
            raise SchemaError(f"unsupported column dtype {dtype!r}")
        self.dtype = dtype
        self._buf = np.empty(capacity, dtype=_NP_DTYPES[dtype])
        self._len = 0

    def __len__(self):
        return self._len

    def values(self) -> np.ndarray:
        """Read-only view of the live values."""
        v = self._buf[: self._len].view()
        v.setflags(write=False)
        return v

    def _reserve(self, extra: int) -> None:
        need = self._len + extra
        if need <= len(self._buf):
            return
        cap = max(need, 2 * len(self._buf))
        buf = np.empty(cap, dtype=self._buf.dtype)
        buf[: self._len] = self._buf[: self._len]
        self._buf = buf

    def coerce(self, values) -> np.ndarray:
        """Convert ``values`` to this column's dtype, raising SchemaError."""
        try:
            if self.dtype == "utf8":
                arr = np.empty(len(values), dtype=object)
                for i, v in enumerate(values):
                    if not isinstance(v, str):
                        raise SchemaError(f"expected str, got {type(v).__name__}")
                    arr[i] = v
                return arr
            arr = np.asarray(values, dtype=_NP_DTYPES[self.dtype])
            if arr.ndim != 1:
                raise SchemaError("column values must be one-dimensional")
            if self.dtype == "int64" and not np.issubdtype(np.asarray(values).dtype, np.integer):
                # reject silent float->int truncation
                back = np.asarray(values, dtype=np.float64)
                if not np.array_equal(back, arr.astype(np.float64)):
                    raise SchemaError("non-integral values for int64 column")
            return arr
        except (TypeError, ValueError, OverflowError) as exc:
            raise SchemaError(str(exc)) from exc

    def append(self, arr: np.ndarray) -> None:
        self._reserve(len(arr))
        self._buf[self._len : self._len + len(arr)] = arr
        self._len += len(arr)

    def set_at(self, positions: np.ndarray, values: np.ndarray) -> None:
        self._buf[positions] = values

    def compact(self, keep_mask: np.ndarray) -> None:
        kept = self._buf[: self._len][keep_mask]
        self._len = len(kept)
        self._buf[: self._len] = kept


@dataclass(frozen=True)
class ChangeSet:
    """Disjoint created/updated/deleted row-id sets over (low_run, high_run]."""

    created: frozenset = frozenset()
    updated: frozenset = frozenset()
    deleted: frozenset = frozenset()
    low_run: int = 0
    high_run: int = 0
    # created ids in creation (ascending id) order, for ordered buffering
    created_order: tuple = field(default=(), repr=False)

    def __bool__(self):
        return bool(self.created or self.updated or self.deleted)


@dataclass(frozen=True)
class _DeletionRecord:
    row_id: int
    run: int
    created_run: int


class DataTable:
    """Ordered named columns of equal length, plus id and run bookkeeping.

    A table is owned by the module that produces it; consumers read it only
    between that module's activations, so no internal locking is done.
    """

    def __init__(self, schema=None):
        # generation distinguishes replacement tables published on one slot
        self.generation = next(_generation_counter)
        self._columns: dict[str, _Column] = {}
        self._ids = _Column("int64")
        self._created = _Column("int64")
        self._update = _Column("int64")
        self._log: list[_DeletionRecord] = []
        self._next_id = 0
        self._last_change_run = 0
        if schema:
            for name, dtype in schema.items():
                self._add_column_unchecked(name, dtype)

    # ------------------------------------------------------------------ shape

    def __len__(self):
        return len(self._ids)

    def __contains__(self, row_id):
        return self._position(int(row_id)) is not None

    @property
    def schema(self) -> dict:
        """Data columns and dtypes, excluding the reserved ``_update``."""
        return {name: col.dtype for name, col in self._columns.items()}

    @property
    def column_names(self) -> list:
        return list(self._columns)

    @property
    def row_ids(self) -> np.ndarray:
        return self._ids.values()

    @property
    def last_change_run(self) -> int:
        return self._last_change_run

    @property
    def deletion_log(self) -> list:
        """(row_id, run_number) pairs for deleted rows, in deletion order."""
        return [(r.row_id, r.run) for r in self._log]

    def max_update(self) -> int:
        u = self._update.values()
        return int(u.max()) if len(u) else 0

    # ------------------------------------------------------------------ access

    def column(self, name: str) -> np.ndarray:
        if name == UPDATE_COL:
            return self._update.values()
        try:
            return self._columns[name].values()
        except KeyError:
            raise SchemaError(f"no column {name!r}") from None

    def value(self, row_id: int, name: str):
        pos = self._require_positions([row_id])[0]
        return self.column(name)[pos]

    def _position(self, row_id: int):
        ids = self._ids.values()
        pos = int(np.searchsorted(ids, row_id))
        if pos < len(ids) and ids[pos] == row_id:
            return pos
        return None

    def _require_positions(self, row_ids) -> np.ndarray:
        arr = np.asarray(row_ids, dtype=np.int64)
        if len(arr) == 0:
            return np.empty(0, dtype=np.int64)
        ids = self._ids.values()
        if len(ids) == 0:
            raise UnknownRowError(f"unknown row ids {arr.tolist()[:10]}")
        pos = np.searchsorted(ids, arr)
        bad = (pos >= len(ids)) | (ids[np.minimum(pos, len(ids) - 1)] != arr)
        if bad.any():
            raise UnknownRowError(f"unknown row ids {arr[bad].tolist()[:10]}")
        return pos

    def get_rows(self, row_ids, columns=None) -> dict:
        """Values of the given rows as {column: ndarray}, in the given order."""
        pos = self._require_positions(row_ids)
        names = columns if columns is not None else self.column_names
        return {name: self.column(name)[pos] for name in names}

    def last_row(self, columns=None):
        """Values of the physically last row as a dict, or None when empty."""
        if len(self) == 0:
            return None
        names = columns if columns is not None else self.column_names
        return {name: self.column(name)[len(self) - 1] for name in names}

    def numeric_columns(self) -> list:
        return [n for n, c in self._columns.items() if c.dtype in ("float64", "int64")]

    def to_numpy(self, columns) -> np.ndarray:
        """Live rows of the given columns as a float64 matrix."""
        if not columns:
            return np.empty((len(self), 0), dtype=np.float64)
        return np.column_stack([self.column(n).astype(np.float64) for n in columns])

    def to_numpy_rows(self, row_ids, columns) -> np.ndarray:
        """The given rows of the given columns as a float64 matrix."""
        if not columns:
            return np.empty((len(row_ids), 0), dtype=np.float64)
        rows = self.get_rows(row_ids, columns)
        return np.column_stack([rows[n].astype(np.float64) for n in columns])

    # ------------------------------------------------------------------ mutation

    def _check_run(self, run: int) -> None:
        if run < self._last_change_run:
            raise RunOrderError(
                f"run {run} is older than last change run {self._last_change_run}"
            )

    def _add_column_unchecked(self, name, dtype):
        if name == UPDATE_COL:
            raise SchemaError(f"{UPDATE_COL!r} is reserved")
        if name in self._columns:
            raise SchemaError(f"column {name!r} already exists")
        col = _Column(dtype)
        if len(self):
            col.append(np.full(len(self), _NULLS[dtype], dtype=_NP_DTYPES[dtype]))
        self._columns[name] = col
        return col

    def add_column(self, name: str, dtype: str, run: int, fill=None) -> None:
        """Add a column mid-stream; existing rows get ``fill`` (default null).

        All existing rows are stamped updated at ``run`` so consumers observe
        the column-set change.
        """
        self._check_run(run)
        col = self._add_column_unchecked(name, dtype)
        if len(self):
            if fill is not None:
                col.set_at(np.arange(len(self)), col.coerce([fill] * len(self)))
            self._update.set_at(np.arange(len(self)), np.full(len(self), run, np.int64))
            self._last_change_run = max(self._last_change_run, run)

    def _coerce_all(self, values: dict, expect_len=None):
        if UPDATE_COL in values:
            raise SchemaError(f"{UPDATE_COL!r} is set by the table, not callers")
        unknown = set(values) - set(self._columns)
        if unknown:
            raise SchemaError(f"unknown columns {sorted(unknown)}")
        out = {}
        n = expect_len
        for name, vals in values.items():
            arr = self._columns[name].coerce(vals)
            if n is None:
                n = len(arr)
            elif len(arr) != n:
                raise SchemaError(f"column {name!r} has length {len(arr)}, expected {n}")
            out[name] = arr
        return out, (n or 0)

    def append(self, values: dict, run: int) -> list:
        """Append column-aligned rows at ``run``; returns the new row ids."""
        missing = set(self._columns) - set(values)
        if missing:
            raise SchemaError(f"missing columns {sorted(missing)}")
        coerced, n = self._coerce_all(values)
        ids = np.arange(self._next_id, self._next_id + n, dtype=np.int64)
        return self._append(ids, coerced, n, run)

    def append_with_ids(self, row_ids, values: dict, run: int) -> None:
        """Append rows preserving caller-chosen ids (ascending, unused).

        Used by filtering modules whose output rows mirror input rows.
        """
        ids = np.asarray(row_ids, dtype=np.int64)
        missing = set(self._columns) - set(values)
        if missing:
            raise SchemaError(f"missing columns {sorted(missing)}")
        coerced, n = self._coerce_all(values, expect_len=len(ids))
        if n == 0:
            return
        if len(ids) > 1 and not (np.diff(ids) > 0).all():
            raise SchemaError("row ids must be strictly ascending")
        if ids[0] < self._next_id:
            raise SchemaError(f"row id {int(ids[0])} already assigned")
        self._append(ids, coerced, n, run)

    def _append(self, ids, coerced, n, run):
        self._check_run(run)
        if run < self.max_update():
            raise RunOrderError(f"run {run} is older than an existing {UPDATE_COL}")
        if n == 0:
            return []
        for name, col in self._columns.items():
            col.append(coerced[name])
        self._ids.append(ids)
        self._created.append(np.full(n, run, np.int64))
        self._update.append(np.full(n, run, np.int64))
        self._next_id = int(ids[-1]) + 1
        self._last_change_run = max(self._last_change_run, run)
        return ids.tolist()

    def update_rows(self, row_ids, values: dict, run: int) -> None:
        """Overwrite cells of existing rows; stamps their ``_update`` to ``run``.

        Scalar values broadcast across all targeted rows.  Rejected atomically
        when any id is unknown.
        """
        self._check_run(run)
        ids = np.asarray(row_ids, dtype=np.int64)
        if len(ids) == 0:
            return
        pos = self._require_positions(ids)
        expanded = {}
        for name, vals in values.items():
            if np.isscalar(vals) or isinstance(vals, str) or vals is None:
                vals = [vals] * len(ids)
            expanded[name] = vals
        coerced, _ = self._coerce_all(expanded, expect_len=len(ids))
        for name, arr in coerced.items():
            self._columns[name].set_at(pos, arr)
        self._update.set_at(pos, np.full(len(ids), run, np.int64))
        self._last_change_run = max(self._last_change_run, run)

    def delete_rows(self, row_ids, run: int) -> None:
        """Remove rows and log (id, run); rejected atomically on unknown ids."""
        self._check_run(run)
        ids = np.unique(np.asarray(row_ids, dtype=np.int64))
        if len(ids) == 0:
            return
        pos = self._require_positions(ids)
        created = self._created.values()[pos]
        keep = np.ones(len(self), dtype=bool)
        keep[pos] = False
        for col in self._columns.values():
            col.compact(keep)
        self._ids.compact(keep)
        self._created.compact(keep)
        self._update.compact(keep)
        for rid, crun in zip(ids.tolist(), created.tolist()):
            self._log.append(_DeletionRecord(rid, run, crun))
        self._last_change_run = max(self._last_change_run, run)

    # ------------------------------------------------------------------ diffs

    def changes_between(self, low_run: int, high_run: int) -> ChangeSet:
        """Row-id sets that changed in the interval ``(low_run, high_run]``.

        Precedence on overlap: deleted > created > updated; a row both created
        and deleted inside the interval appears in neither set.  ``updated``
        reflects the current ``_update`` column, which holds only the last
        touch per row; it is exact whenever ``high_run`` is the present run.
        """
        if low_run > high_run:
            raise ValueError("low_run must be <= high_run")
        created = self._created.values()
        updates = self._update.values()
        ids = self._ids.values()
        if low_run == high_run:
            return ChangeSet(low_run=low_run, high_run=high_run)

        # live rows created in the window (creation runs ascend with position)
        lo = int(np.searchsorted(created, low_run, side="right"))
        hi = int(np.searchsorted(created, high_run, side="right"))
        created_live = ids[lo:hi]
        # deleted rows: created in window + deleted after it still count as created
        created_deleted = [
            r.row_id
            for r in self._log
            if low_run < r.created_run <= high_run and r.run > high_run
        ]
        created_ids = np.concatenate([created_live, np.asarray(created_deleted, np.int64)])
        created_ids.sort()

        upd_mask = (updates > low_run) & (updates <= high_run) & (created <= low_run)
        updated_ids = frozenset(ids[upd_mask].tolist())

        deleted_ids = frozenset(
            r.row_id
            for r in self._log
            if low_run < r.run <= high_run and r.created_run <= low_run
        )
        return ChangeSet(
            created=frozenset(created_ids.tolist()),
            updated=updated_ids - deleted_ids,
            deleted=deleted_ids,
            low_run=low_run,
            high_run=high_run,
            created_order=tuple(created_ids.tolist()),
        )

    # ------------------------------------------------------------------ export

    def to_json_slice(self, offset: int = 0, limit=None, columns=None) -> dict:
        """Column-major JSON-safe slice: {"columns": {...}, "row_ids": [...]}."""
        n = len(self)
        offset = max(0, int(offset))
        stop = n if limit is None else min(n, offset + int(limit))
        names = list(columns) if columns is not None else self.column_names + [UPDATE_COL]
        cols = {}
        for name in names:
            vals = self.column(name)[offset:stop]
            if vals.dtype == np.float64:
                cols[name] = [None if np.isnan(v) else float(v) for v in vals]
            else:
                cols[name] = vals.tolist()
        return {
            "columns": cols,
            "row_ids": self.row_ids[offset:stop].tolist(),
            "total_rows": n,
            "offset": offset,
        }
