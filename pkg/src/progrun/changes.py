"""Per-input-slot bookkeeping of what upstream data a module has consumed.

A :class:`SlotTracker` keeps a run-number watermark, a buffer of created row
ids not yet handed to the module, and window flags for updates/deletions.
Created rows stream through :meth:`next_created` exactly once; updates and
deletions are exposed as flags plus on-demand id sets, since every module
reacts to them either by restarting or by algorithm-specific repair.
"""

from collections import deque

import numpy as np

from .states import ModuleState


class _IdBuffer:
    """FIFO of row ids stored as chunks, preserving insertion order."""

    __slots__ = ("_chunks", "_head", "_count")

    def __init__(self):
        self._chunks = deque()
        self._head = 0  # offset into the first chunk
        self._count = 0

    def __len__(self):
        return self._count

    def push(self, ids) -> None:
        arr = np.asarray(ids, dtype=np.int64)
        if len(arr):
            self._chunks.append(arr)
            self._count += len(arr)

    def pop(self, n: int) -> np.ndarray:
        out = []
        taken = 0
        while taken < n and self._chunks:
            chunk = self._chunks[0]
            avail = len(chunk) - self._head
            take = min(avail, n - taken)
            out.append(chunk[self._head : self._head + take])
            taken += take
            self._head += take
            if self._head == len(chunk):
                self._chunks.popleft()
                self._head = 0
        self._count -= taken
        if not out:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(out)

    def clear(self) -> None:
        self._chunks.clear()
        self._head = 0
        self._count = 0


class SlotTracker:
    """Watermarked view of one upstream table for one consumer slot."""

    def __init__(self):
        self.last_run = 0
        self._buffer = _IdBuffer()
        self._updated: set = set()
        self._deleted: set = set()
        self._replaced = False  # producer swapped in a whole new table
        self._generation = None
        self._seen_run = None

    # ------------------------------------------------------------------ window

    def update(self, table, run_number: int) -> None:
        """Fold changes in ``(last_run, run_number]`` into the tracker.

        Idempotent within one activation: a second call with the same run
        number is a no-op.
        """
        if table is None:
            return
        if run_number < self.last_run:
            raise ValueError(f"run {run_number} precedes watermark {self.last_run}")
        if self._seen_run == run_number:
            return
        if self._generation is not None and table.generation != self._generation:
            # replacement table: everything previously delivered is gone
            had_rows = self.last_run > 0
            self.reset()
            if had_rows:
                self._replaced = True
        self._generation = table.generation
        cs = table.changes_between(self.last_run, run_number)
        self._buffer.push(cs.created_order)
        self._updated |= cs.updated
        self._deleted |= cs.deleted
        self.last_run = run_number
        self._seen_run = run_number

    def next_created(self, step_size: int) -> np.ndarray:
        """Remove and return up to ``step_size`` buffered ids, oldest first."""
        return self._buffer.pop(int(step_size))

    def created_count(self) -> int:
        return len(self._buffer)

    def has_updated(self) -> bool:
        return bool(self._updated) or self._replaced

    def has_deleted(self) -> bool:
        return bool(self._deleted) or self._replaced

    def was_replaced(self) -> bool:
        return self._replaced

    def take_updated(self) -> set:
        """Drain the pending updated-id set."""
        out, self._updated = self._updated, set()
        return out

    def take_deleted(self):
        """Drain the pending deleted-id set; None means "everything"
        (the producer replaced its table wholesale)."""
        if self._replaced:
            self._replaced = False
            self._updated = set()
            self._deleted = set()
            return None
        out, self._deleted = self._deleted, set()
        return out

    # ------------------------------------------------------------------ control

    def reset(self) -> None:
        """Forget all progress; the next update() re-delivers every live row."""
        self.last_run = 0
        self._buffer.clear()
        self._updated = set()
        self._deleted = set()
        self._replaced = False
        self._seen_run = None

    def next_state(self) -> ModuleState:
        if len(self._buffer) or self._updated or self._deleted or self._replaced:
            return ModuleState.READY
        return ModuleState.BLOCKED
