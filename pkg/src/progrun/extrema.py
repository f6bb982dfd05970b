"""Running per-column min/max over a streaming input table.

Incremental on appends; any upstream update or deletion invalidates the
running value, so the module restarts from the beginning of the input (the
recompute is cheap, millions of values per second).  One result row is
published per activation, stamped with the activation's run number, so the
output table doubles as a convergence history; consumers read the last row.
"""

import logging

import numpy as np

from .module import Module, SlotDescriptor, StepResult
from .table import DataTable

logger = logging.getLogger(__name__)


class _Extrema(Module):
    input_descriptors = (SlotDescriptor("df", required=True),)
    output_names = ("df",)
    param_defaults = {"quantum": 1.0, "columns": None}

    _fold = None  # np.fmin / np.fmax, set by subclasses

    def __init__(self, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self._running = {}
        self._table = None
        self._pub_run = 0
        self._pub_id = None
        self._warned = set()

    def _watch_columns(self, data) -> list:
        wanted = self.params["columns"]
        numeric = set(data.numeric_columns())
        if wanted is None:
            return sorted(numeric & set(data.column_names), key=data.column_names.index)
        cols = []
        for name in wanted:
            if name in numeric:
                cols.append(name)
            elif name not in self._warned:
                self._warned.add(name)
                logger.warning("%s: column %r is not numeric, skipping", self.name, name)
        return cols

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("df")
        slot.update(run_number)
        if slot.has_updated() or slot.has_deleted():
            # incremental fold can't un-see old values: restart from scratch
            slot.reset()
            self._running = {}
            slot.update(run_number)
        ids = slot.next_created(step_size)
        steps = len(ids)
        if steps:
            data = slot.data()
            cols = self._watch_columns(data)
            rows = data.get_rows(ids, cols)
            fold = type(self)._fold
            for name in cols:
                chunk = fold.reduce(rows[name].astype(np.float64))
                prev = self._running.get(name)
                self._running[name] = chunk if prev is None else fold(prev, chunk)
            self._publish(run_number)
        return StepResult(slot.next_state(), steps)

    def _publish(self, run_number):
        if self._table is None:
            self._table = DataTable({name: "float64" for name in self._running})
            self.set_output("df", self._table)
        for name in self._running:
            if name not in self._table.schema:
                self._table.add_column(name, "float64", run=run_number)
        values = {
            name: [self._running.get(name, np.nan)] for name in self._table.schema
        }
        if self._pub_run == run_number and self._pub_id is not None:
            self._table.update_rows(
                [self._pub_id], {k: v[0] for k, v in values.items()}, run=run_number
            )
        else:
            (self._pub_id,) = self._table.append(values, run=run_number)
            self._pub_run = run_number
        self.mark_published(run_number)

    def current(self) -> dict:
        """Latest running values per column."""
        return dict(self._running)


class Min(_Extrema):
    """Per-column running minimum (NaN cells ignored)."""

    _fold = np.fmin


class Max(_Extrema):
    """Per-column running maximum (NaN cells ignored)."""

    _fold = np.fmax
