"""Interactive input modules: Variable and RangeQuery.

A ``Variable`` holds a single-row table that outside clients mutate through
``from_input`` messages; each accepted message is stamped with a fresh run
number so downstream modules see the change, and it flips the scheduler into
interaction mode.  When a ``like`` input is connected the variable clones that
table's schema (initially all values undefined); otherwise the first messages
define the columns.

``RangeQuery`` turns a pair of lo/hi variables into a filter-expression string
``lo < column < hi`` joined with ``and``, one clause per column whose two
bounds are both defined.
"""

import logging
import math

import numpy as np

from .errors import InvalidMessageError
from .filters import _format_number
from .module import Module, SlotDescriptor, StepResult
from .states import ModuleState
from .table import DataTable

logger = logging.getLogger(__name__)


class Variable(Module):
    input_descriptors = (SlotDescriptor("like", required=False),)
    output_names = ("df",)

    def __init__(self, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self._table = None
        self._row_id = None

    def is_input(self) -> bool:
        return True

    def _like_schema(self):
        slot = self.get_input_slot("like")
        if not slot.connected:
            return None
        data = slot.data()
        if data is None or not data.column_names:
            return None
        return dict(data.schema)

    def _ensure_table(self, run_number) -> bool:
        """Create the one-row output once a schema is known."""
        if self._table is not None:
            return True
        schema = self._like_schema()
        if schema is None:
            if self.get_input_slot("like").connected:
                return False  # wait for the template
            schema = {}
        self._table = DataTable(schema)
        self.set_output("df", self._table)
        if schema:
            nulls = {
                name: [np.nan if dtype == "float64" else ("" if dtype == "utf8" else 0)]
                for name, dtype in schema.items()
            }
            (self._row_id,) = self._table.append(nulls, run=run_number)
        self.mark_published(run_number)
        return True

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("like")
        if slot.connected:
            slot.update(run_number)
            slot.next_created(slot.created_count())
            slot.take_updated()
            slot.take_deleted()
        made = self._table is None and self._ensure_table(run_number)
        return StepResult(ModuleState.BLOCKED, 1 if made else 0)

    # ------------------------------------------------------------------ input

    def _validate_input(self, msg):
        schema = self._table.schema if self._table is not None else self._like_schema()
        like_connected = self.get_input_slot("like").connected
        for key, value in msg.items():
            if not isinstance(key, str):
                raise InvalidMessageError(f"key {key!r} is not a string")
            if like_connected:
                if schema is None:
                    raise InvalidMessageError("schema not available yet")
                if key not in schema:
                    raise InvalidMessageError(f"unknown key {key!r}")
            if schema and key in schema:
                dtype = schema[key]
                if dtype == "utf8" and not isinstance(value, (str, type(None))):
                    raise InvalidMessageError(f"{key!r} expects a string")
                if dtype in ("float64", "int64") and not isinstance(
                    value, (int, float, type(None))
                ):
                    raise InvalidMessageError(f"{key!r} expects a number")
            elif not isinstance(value, (int, float, str, type(None))):
                raise InvalidMessageError(f"unsupported value type for {key!r}")

    def _apply_input(self, msg) -> bool:
        if not msg:
            return False
        if self._table is None and self.get_input_slot("like").connected:
            if self._like_schema() is None:  # template not published yet
                logger.warning("%s: dropping message, schema not ready", self.name)
                return False
        run = self.scheduler.for_input(self)
        if not self._ensure_table(run):
            return False
        for key, value in msg.items():
            if key not in self._table.schema:
                dtype = "utf8" if isinstance(value, str) else "float64"
                self._table.add_column(key, dtype, run=run)
        if self._row_id is None:
            nulls = {
                name: [np.nan if dtype == "float64" else ("" if dtype == "utf8" else 0)]
                for name, dtype in self._table.schema.items()
            }
            (self._row_id,) = self._table.append(nulls, run=run)
        values = {}
        for key, value in msg.items():
            dtype = self._table.schema[key]
            if value is None:
                value = np.nan if dtype == "float64" else ""
            values[key] = [value]
        self._table.update_rows([self._row_id], values, run=run)
        self.mark_published(run)
        return True

    def values(self) -> dict:
        if self._table is None or len(self._table) == 0:
            return {}
        return self._table.last_row()


class RangeQuery(Module):
    """Emits a one-column table 'query' combining per-column lo/hi bounds."""

    input_descriptors = (
        SlotDescriptor("min", required=True),
        SlotDescriptor("max", required=True),
    )
    output_names = ("df",)

    def __init__(self, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self._table = None
        self._query = None
        self.diagnostics: list = []

    @staticmethod
    def _defined(value) -> bool:
        try:
            return math.isfinite(float(value))
        except (TypeError, ValueError):
            return False

    def _build_query(self) -> str:
        lo_data = self.get_input_slot("min").data()
        hi_data = self.get_input_slot("max").data()
        if lo_data is None or hi_data is None:
            return ""
        lo = lo_data.last_row() or {}
        hi = hi_data.last_row() or {}
        clauses = []
        self.diagnostics = []
        for col in lo_data.column_names:
            if col == "_update" or col not in hi:
                continue
            lo_v, hi_v = lo.get(col), hi.get(col)
            if not (self._defined(lo_v) and self._defined(hi_v)):
                continue
            lo_f, hi_f = float(lo_v), float(hi_v)
            if lo_f > hi_f:
                self.diagnostics.append(
                    f"{col}: empty range ({lo_f} > {hi_f})"
                )
            clauses.append(
                f"{_format_number(lo_f)} < {col} < {_format_number(hi_f)}"
            )
        return " and ".join(clauses)

    def run_step(self, run_number, step_size, howlong):
        for name in ("min", "max"):
            slot = self.get_input_slot(name)
            slot.update(run_number)
            slot.next_created(slot.created_count())
            slot.take_updated()
            slot.take_deleted()
        text = self._build_query()
        steps = 0
        if text != self._query:
            self._query = text
            if self._table is None:
                self._table = DataTable({"query": "utf8"})
                self._table.append({"query": [text]}, run=run_number)
                self.set_output("df", self._table)
            else:
                self._table.update_rows([0], {"query": text}, run=run_number)
            self.mark_published(run_number)
            steps = 1
        return StepResult(ModuleState.BLOCKED, steps)
