"""Shared reference models and synthetic modules for the test suite."""

import random
import time

import numpy as np

from progrun.module import Module, SlotDescriptor, StepResult
from progrun.states import ModuleState
from progrun.table import DataTable


class ShadowTable:
    """Dict-of-dicts reference model for DataTable semantics.

    Scripts must write distinct values on update so that value-level snapshot
    diffs coincide with touch-level change tracking.
    """

    def __init__(self):
        self.rows = {}  # id -> {col: value}
        self.next_id = 0
        self.deleted = set()

    def append(self, values, n):
        ids = list(range(self.next_id, self.next_id + n))
        self.next_id += n
        for i, rid in enumerate(ids):
            self.rows[rid] = {c: vals[i] for c, vals in values.items()}
        return ids

    def update(self, ids, values):
        for i, rid in enumerate(ids):
            for c, vals in values.items():
                self.rows[rid][c] = vals[i]

    def delete(self, ids):
        for rid in ids:
            del self.rows[rid]
            self.deleted.add(rid)

    def snapshot(self):
        return {rid: dict(row) for rid, row in self.rows.items()}

    @staticmethod
    def diff(old, new):
        """(created, updated, deleted) id sets between two snapshots."""
        created = set(new) - set(old)
        deleted = set(old) - set(new)
        updated = {rid for rid in set(old) & set(new) if old[rid] != new[rid]}
        return created, updated, deleted


def run_random_script(seed, n_ops=40, snapshot_every=7):
    """Random append/update/delete script applied to both implementations.

    Returns (table, shadow, snapshots) where snapshots is {run: shadow_snapshot}.
    """
    rng = random.Random(seed)
    table = DataTable({"a": "float64", "b": "int64"})
    shadow = ShadowTable()
    snapshots = {0: {}}
    run = 0
    counter = [0.0]

    def fresh():
        counter[0] += 1.0
        return counter[0]

    for step in range(n_ops):
        run += 1
        live = sorted(shadow.rows)
        op = rng.choice(["append", "append", "update", "delete"])
        if op == "append":
            n = rng.randint(0, 4)
            values = {
                "a": [fresh() for _ in range(n)],
                "b": [rng.randint(0, 100) for _ in range(n)],
            }
            table.append(values, run=run)
            shadow.append(values, n)
        elif op == "update" and live:
            ids = rng.sample(live, k=min(len(live), rng.randint(1, 3)))
            values = {"a": [fresh() for _ in ids]}
            table.update_rows(ids, values, run=run)
            shadow.update(ids, values)
        elif op == "delete" and live:
            ids = rng.sample(live, k=min(len(live), rng.randint(1, 2)))
            table.delete_rows(ids, run=run)
            shadow.delete(ids)
        if step % snapshot_every == 0:
            snapshots[run] = shadow.snapshot()
    snapshots[run] = shadow.snapshot()
    return table, shadow, snapshots, run


class LinearCostModule(Module):
    """Synthetic module whose run_step costs `cost_per_step` seconds per step.

    An endless supply of work: stays READY forever.
    """

    input_descriptors = ()
    output_names = ("df",)
    param_defaults = {"quantum": 1.0, "cost_per_step": 1e-4}

    def __init__(self, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self.total_steps = 0

    def run_step(self, run_number, step_size, howlong):
        target = time.perf_counter() + step_size * self.params["cost_per_step"]
        x = 0.0
        while time.perf_counter() < target:
            x += 1.0
        self.total_steps += step_size
        return StepResult(ModuleState.READY, step_size)


class Stamp(Module):
    """Cheap passthrough: republishes a counter whenever its input changes."""

    input_descriptors = (SlotDescriptor("df", required=True),)
    output_names = ("df",)

    def __init__(self, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self._table = None
        self._count = 0

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("df")
        slot.update(run_number)
        changed = bool(slot.created_count() or slot.has_updated() or slot.has_deleted())
        slot.next_created(slot.created_count())
        slot.take_updated()
        slot.take_deleted()
        if not changed:
            return StepResult(ModuleState.BLOCKED, 0)
        self._count += 1
        if self._table is None:
            self._table = DataTable({"count": "int64"})
            self._table.append({"count": [self._count]}, run=run_number)
            self.set_output("df", self._table)
        else:
            self._table.update_rows([0], {"count": self._count}, run=run_number)
        self.mark_published(run_number)
        return StepResult(ModuleState.BLOCKED, 1)


class VisSink(Stamp):
    """A Stamp that counts as a visualization for reachability purposes."""

    def is_visualization(self):
        return True


class TableSource(Module):
    """Feeds a prebuilt sequence of value chunks into an output table.

    Emits at most ``chunks_per_run`` chunks per activation so tests can
    control the exact chunk schedule the consumers observe.
    """

    input_descriptors = ()
    output_names = ("df",)
    param_defaults = {"quantum": 1.0, "chunks_per_run": 1}

    def __init__(self, chunks, schema, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self._chunks = list(chunks)
        self._i = 0
        self._emitted_this_run = (None, 0)
        self._table = DataTable(schema)
        self.set_output("df", self._table)

    def run_step(self, run_number, step_size, howlong):
        if self._i >= len(self._chunks):
            return StepResult(ModuleState.ZOMBIE, 0)
        run, emitted = self._emitted_this_run
        if run != run_number:
            emitted = 0
        if emitted >= self.params["chunks_per_run"]:
            return StepResult(ModuleState.READY, 0)  # yield until the next activation
        values = self._chunks[self._i]
        self._i += 1
        self._emitted_this_run = (run_number, emitted + 1)
        n = len(next(iter(values.values()))) if values else 0
        self._table.append(values, run=run_number)
        self.mark_published(run_number)
        state = ModuleState.READY if self._i < len(self._chunks) else ModuleState.ZOMBIE
        return StepResult(state, max(n, 1))


class ScriptSource(Module):
    """Replays a script of table ops, one per activation.

    Ops: ("append", values_dict), ("update", ids, values_dict), ("delete", ids).
    """

    input_descriptors = ()
    output_names = ("df",)

    def __init__(self, schema, script, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self._script = list(script)
        self._i = 0
        self._done_run = None
        self._table = DataTable(schema)
        self.set_output("df", self._table)

    def run_step(self, run_number, step_size, howlong):
        if self._i >= len(self._script):
            return StepResult(ModuleState.ZOMBIE, 0)
        if self._done_run == run_number:
            return StepResult(ModuleState.READY, 0)
        op = self._script[self._i]
        self._i += 1
        self._done_run = run_number
        kind = op[0]
        if kind == "append":
            self._table.append(op[1], run=run_number)
        elif kind == "update":
            self._table.update_rows(op[1], op[2], run=run_number)
        elif kind == "delete":
            self._table.delete_rows(op[1], run=run_number)
        else:
            raise ValueError(f"unknown op {kind!r}")
        self.mark_published(run_number)
        state = ModuleState.READY if self._i < len(self._script) else ModuleState.ZOMBIE
        return StepResult(state, 1)


def make_source(scheduler, data: dict, chunk_size=None, name=None):
    """TableSource emitting `data` (dict of equal-length lists) in chunks."""
    n = len(next(iter(data.values()))) if data else 0
    if chunk_size is None:
        chunk_size = max(n, 1)
    chunks = []
    for start in range(0, n, chunk_size):
        chunks.append({c: vals[start : start + chunk_size] for c, vals in data.items()})
    schema = {}
    for c, vals in data.items():
        if vals and isinstance(vals[0], str):
            schema[c] = "utf8"
        elif vals and isinstance(vals[0], (int, np.integer)) and not isinstance(vals[0], bool):
            schema[c] = "int64"
        else:
            schema[c] = "float64"
    return TableSource(chunks, schema, scheduler=scheduler, name=name)
