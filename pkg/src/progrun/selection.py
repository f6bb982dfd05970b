"""Row-filtering modules.

``Select`` keeps the input rows satisfying a filter expression, preserving row
ids.  An undefined or empty query passes everything through.  When the query
changes, or upstream rows are updated or deleted, the module restarts: it
publishes a fresh output table and refilters from the beginning, so the fixed
point always equals an eager filter with the final query.

``SelectDelta`` damps change propagation: a row is forwarded only when its
numeric vector moved at least ``delta`` (L2) since the version last forwarded.
Deletions always propagate.
"""

import numpy as np

from .errors import FilterEvalError
from .filters import MatchAll, evaluate, parse_filter, unparse
from .module import Module, SlotDescriptor, StepResult
from .states import ModuleState
from .table import DataTable


class Select(Module):
    input_descriptors = (
        SlotDescriptor("df", required=True),
        SlotDescriptor("query", required=False),
    )
    output_names = ("df",)

    def __init__(self, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self._expr = MatchAll()
        self._query_text = ""
        self._table = None
        self.diagnostic = None

    @property
    def query(self) -> str:
        return self._query_text

    @property
    def expr(self):
        return self._expr

    def _read_query(self):
        """Current query string from the query slot, or None when absent."""
        slot = self.get_input_slot("query")
        if not slot.connected:
            return None
        data = slot.data()
        if data is None or len(data) == 0 or "query" not in data.column_names:
            return None
        value = data.last_row(["query"])["query"]
        if not isinstance(value, str):
            return None
        return value

    def _restart(self, df_slot, data, run_number):
        df_slot.reset()
        df_slot.update(run_number)
        self._table = DataTable(data.schema if data is not None else {})
        self.set_output("df", self._table)
        self.mark_published(run_number)

    def run_step(self, run_number, step_size, howlong):
        qslot = self.get_input_slot("query")
        df_slot = self.get_input_slot("df")
        df_slot.update(run_number)
        data = df_slot.data()

        if qslot.connected:
            qslot.update(run_number)
            qslot.next_created(qslot.created_count())
            qslot.take_updated()
            qslot.take_deleted()
            text = self._read_query()
            if text is not None and text != self._query_text:
                self._expr = parse_filter(text)
                self._query_text = text
                self.diagnostic = None
                self._restart(df_slot, data, run_number)

        if df_slot.has_updated() or df_slot.has_deleted():
            self._restart(df_slot, data, run_number)

        if data is None:
            return StepResult(ModuleState.BLOCKED, 0)
        if self._table is None:
            self._table = DataTable(data.schema)
            self.set_output("df", self._table)

        missing = self._expr.columns() - set(data.column_names)
        if missing:
            self.diagnostic = f"query references unknown columns {sorted(missing)}"
            return StepResult(ModuleState.BLOCKED, 0)

        ids = df_slot.next_created(step_size)
        steps = len(ids)
        if steps:
            for name, dtype in data.schema.items():
                if name not in self._table.schema:
                    self._table.add_column(name, dtype, run=run_number)
            rows = data.get_rows(ids)
            numeric = {
                name: rows[name]
                for name, dtype in data.schema.items()
                if dtype in ("float64", "int64")
            }
            try:
                mask = evaluate(self._expr, numeric, steps)
            except FilterEvalError as exc:
                self.diagnostic = str(exc)
                return StepResult(ModuleState.BLOCKED, 0)
            if mask.any():
                kept = np.asarray(ids)[mask]
                values = {name: vals[mask] for name, vals in rows.items()}
                self._table.append_with_ids(kept, values, run=run_number)
                self.mark_published(run_number)
        return StepResult(df_slot.next_state(), steps)


class SelectDelta(Module):
    """Forwards rows whose numeric vector drifted >= delta since last forward."""

    input_descriptors = (SlotDescriptor("df", required=True),)
    output_names = ("df",)
    param_defaults = {"quantum": 1.0, "delta": 0.0, "columns": None}

    def __init__(self, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        if self.params["delta"] < 0:
            raise ValueError("delta must be >= 0")
        self._vectors: dict = {}
        self._table = None

    def _vector_columns(self, data) -> list:
        cols = self.params["columns"]
        if cols is None:
            return data.numeric_columns()
        bad = [c for c in cols if data.schema.get(c) not in ("float64", "int64")]
        if bad:
            raise ValueError(f"non-numeric columns {bad}")
        return list(cols)

    def validate(self):
        errors = super().validate()
        slot = self._inputs["df"]
        data = slot.data() if slot.connected else None
        if data is not None and self.params["columns"] is not None:
            bad = [
                c
                for c in self.params["columns"]
                if data.schema.get(c) not in ("float64", "int64")
            ]
            if bad:
                errors.append(f"non-numeric columns {bad}")
        return errors

    def _restart(self, slot, data, run_number):
        slot.reset()
        slot.update(run_number)
        self._vectors = {}
        self._table = DataTable(data.schema if data is not None else {})
        self.set_output("df", self._table)
        self.mark_published(run_number)

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("df")
        slot.update(run_number)
        data = slot.data()
        if data is None:
            return StepResult(ModuleState.BLOCKED, 0)
        if self._table is None:
            self._table = DataTable(data.schema)
            self.set_output("df", self._table)

        steps = 0
        emitted = False
        cols = self._vector_columns(data)

        deleted = slot.take_deleted() if slot.has_deleted() else set()
        if deleted is None:
            # upstream replaced its table wholesale: start over
            self._restart(slot, data, run_number)
            deleted = set()
        elif deleted:
            gone = [rid for rid in deleted if rid in self._vectors]
            present = [rid for rid in gone if rid in self._table]
            if present:
                self._table.delete_rows(present, run=run_number)
                emitted = True
            for rid in gone:
                self._vectors.pop(rid, None)
            steps += len(deleted)

        updated = slot.take_updated() if slot.has_updated() else set()
        if updated:
            known = sorted(rid for rid in updated if rid in self._vectors and rid in data)
            if known:
                rows = data.get_rows(known)
                vectors = np.column_stack(
                    [rows[c].astype(np.float64) for c in cols]
                ) if cols else np.zeros((len(known), 0))
                delta = self.params["delta"]
                for i, rid in enumerate(known):
                    vec = vectors[i]
                    prev = self._vectors[rid]
                    if len(prev) != len(vec):
                        self._restart(slot, data, run_number)
                        return StepResult(ModuleState.READY, steps)
                    if float(np.linalg.norm(vec - prev)) >= delta:
                        self._table.update_rows(
                            [rid], {c: [rows[c][i]] for c in rows}, run=run_number
                        )
                        self._vectors[rid] = vec
                        emitted = True
            steps += len(updated)

        ids = slot.next_created(step_size)
        if len(ids):
            for name, dtype in data.schema.items():
                if name not in self._table.schema:
                    self._table.add_column(name, dtype, run=run_number)
            rows = data.get_rows(ids)
            vectors = (
                np.column_stack([rows[c].astype(np.float64) for c in cols])
                if cols
                else np.zeros((len(ids), 0))
            )
            self._table.append_with_ids(ids, rows, run=run_number)
            for i, rid in enumerate(np.asarray(ids).tolist()):
                self._vectors[rid] = vectors[i]
            emitted = True
            steps += len(ids)

        if emitted:
            self.mark_published(run_number)
        return StepResult(slot.next_state(), steps)
