"""Progressive 2D histogram.

Bins incoming (x, y) rows into a fixed grid whose bounds come from upstream
min/max tables.  While rows are still flowing, bound drifts of at most
``bounds_tolerance`` (relative to each axis range) are deferred to avoid a
rebin storm during early convergence; the deferred change is applied as an
exact full rebin once the pending input drains, so the fixed point equals the
eager computation bin for bin.  Updates or deletions upstream always force a
full rebin.
"""

import numpy as np

from .module import Module, SlotDescriptor, StepResult
from .states import ModuleState
from .table import DataTable

_BOUND_KEYS = ("xmin", "xmax", "ymin", "ymax")


def _drain(slot) -> bool:
    """Consume every pending event on a bounds slot; True when anything arrived."""
    changed = bool(
        slot.created_count() or slot.has_updated() or slot.has_deleted()
    )
    slot.next_created(slot.created_count())
    slot.take_updated()
    slot.take_deleted()
    return changed


class Histogram2D(Module):
    input_descriptors = (
        SlotDescriptor("df", required=True),
        SlotDescriptor("min", required=True),
        SlotDescriptor("max", required=True),
    )
    output_names = ("df", "bounds")
    param_defaults = {
        "quantum": 1.0,
        "xbins": 512,
        "ybins": 512,
        "bounds_tolerance": 0.01,
    }

    def __init__(self, x_column, y_column, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self.x_column = x_column
        self.y_column = y_column
        self._grid = np.zeros((self.params["ybins"], self.params["xbins"]), dtype=np.int64)
        self._bounds = None  # active (xmin, xmax, ymin, ymax)
        self._deferred = False  # a sub-tolerance bound drift awaits the drain
        self._grid_table = None
        self._bounds_table = None
        self._binned = 0

    # ------------------------------------------------------------------ bounds

    def _candidate_bounds(self):
        lo = self.get_input_slot("min").data()
        hi = self.get_input_slot("max").data()
        if lo is None or hi is None or len(lo) == 0 or len(hi) == 0:
            return None
        cols = (self.x_column, self.y_column)
        if any(c not in lo.column_names for c in cols) or any(
            c not in hi.column_names for c in cols
        ):
            return None
        lo_row = lo.last_row(cols)
        hi_row = hi.last_row(cols)
        bounds = (
            float(lo_row[self.x_column]),
            float(hi_row[self.x_column]),
            float(lo_row[self.y_column]),
            float(hi_row[self.y_column]),
        )
        if not all(np.isfinite(v) for v in bounds):
            return None
        return bounds

    def _drift_exceeds_tolerance(self, cand) -> bool:
        tol = self.params["bounds_tolerance"]
        xmin, xmax, ymin, ymax = self._bounds
        xrange_ = max(xmax - xmin, 1e-300)
        yrange_ = max(ymax - ymin, 1e-300)
        scale = (xrange_, xrange_, yrange_, yrange_)
        return any(
            abs(c - b) / s > tol for c, b, s in zip(cand, self._bounds, scale)
        )

    # ------------------------------------------------------------------ stepping

    def run_step(self, run_number, step_size, howlong):
        min_slot = self.get_input_slot("min")
        max_slot = self.get_input_slot("max")
        min_slot.update(run_number)
        max_slot.update(run_number)
        _drain(min_slot)
        _drain(max_slot)

        df_slot = self.get_input_slot("df")
        df_slot.update(run_number)
        dirty = False
        if df_slot.has_updated() or df_slot.has_deleted():
            self._full_reset(df_slot, run_number)
            dirty = True

        cand = self._candidate_bounds()
        if cand is None and self._bounds is None:
            return StepResult(ModuleState.BLOCKED, 0)
        if cand is not None and self._bounds is None:
            self._bounds = cand
            dirty = True
        elif cand is not None and cand != self._bounds:
            if self._drift_exceeds_tolerance(cand) or df_slot.created_count() == 0:
                self._bounds = cand
                self._full_reset(df_slot, run_number)
                dirty = True
                self._deferred = False
            else:
                self._deferred = True
        elif cand == self._bounds:
            self._deferred = False

        ids = df_slot.next_created(step_size)
        steps = len(ids)
        if steps:
            self._bin(df_slot.data(), ids)
            dirty = True
        if dirty:
            self._publish(run_number)

        next_state = df_slot.next_state()
        if self._deferred and next_state is ModuleState.BLOCKED:
            next_state = ModuleState.READY  # come back to apply the drift exactly
        return StepResult(next_state, steps)

    def _full_reset(self, df_slot, run_number):
        df_slot.reset()
        df_slot.update(run_number)
        self._grid[:] = 0
        self._binned = 0

    def _bin(self, data, ids):
        rows = data.get_rows(ids, (self.x_column, self.y_column))
        x = rows[self.x_column].astype(np.float64)
        y = rows[self.y_column].astype(np.float64)
        finite = np.isfinite(x) & np.isfinite(y)
        x, y = x[finite], y[finite]
        if len(x) == 0:
            return
        xmin, xmax, ymin, ymax = self._bounds
        xbins = self.params["xbins"]
        ybins = self.params["ybins"]
        # values at the upper bound clamp into the last bin
        bx = (
            np.zeros(len(x), dtype=np.int64)
            if xmax <= xmin
            else np.clip(((x - xmin) * (xbins / (xmax - xmin))).astype(np.int64), 0, xbins - 1)
        )
        by = (
            np.zeros(len(y), dtype=np.int64)
            if ymax <= ymin
            else np.clip(((y - ymin) * (ybins / (ymax - ymin))).astype(np.int64), 0, ybins - 1)
        )
        np.add.at(self._grid, (by, bx), 1)
        self._binned += len(x)

    # ------------------------------------------------------------------ output

    @property
    def grid(self) -> np.ndarray:
        view = self._grid.view()
        view.setflags(write=False)
        return view

    @property
    def bounds(self):
        return self._bounds

    def _publish(self, run_number):
        xbins = self.params["xbins"]
        ybins = self.params["ybins"]
        cols = [f"c{i}" for i in range(xbins)]
        values = {name: self._grid[:, i] for i, name in enumerate(cols)}
        if self._grid_table is None:
            self._grid_table = DataTable({name: "int64" for name in cols})
            self._grid_table.append(values, run=run_number)
            self.set_output("df", self._grid_table)
        else:
            self._grid_table.update_rows(
                np.arange(ybins), values, run=run_number
            )
        bvals = dict(zip(_BOUND_KEYS, self._bounds))
        if self._bounds_table is None:
            self._bounds_table = DataTable({k: "float64" for k in _BOUND_KEYS})
            self._bounds_table.append({k: [v] for k, v in bvals.items()}, run=run_number)
            self.set_output("bounds", self._bounds_table)
        else:
            self._bounds_table.update_rows([0], bvals, run=run_number)
        self.mark_published(run_number)
