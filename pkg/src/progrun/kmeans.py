"""Steerable progressive mini-batch k-means.

Centroids are refined one small batch at a time with the per-centroid
learning-rate rule: assignments for a batch are computed against the centroids
as of the batch start, then each point moves its centroid by eta = 1/count.
With k=1 the rule telescopes to the running mean of all consumed points.

Steering: clients overwrite chosen centroids through ``from_input``; the
module zeroes the update counts and reprocesses the whole input stream with
the current centroids as the initial configuration, which lets a centroid
dragged into an unclaimed cluster keep it.
"""

import numpy as np

from .errors import InvalidMessageError
from .module import Module, SlotDescriptor, StepResult
from .states import ModuleState
from .table import DataTable


def gen_batches(n: int, batch_size: int):
    """Consecutive slices covering range(n), each at most batch_size long."""
    for start in range(0, n, batch_size):
        yield slice(start, min(start + batch_size, n))


def kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding over the rows of X."""
    n = len(X)
    centers = np.empty((k, X.shape[1]), dtype=np.float64)
    centers[0] = X[int(rng.integers(n))]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            idx = int(rng.integers(n))
        centers[j] = X[idx]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def minibatch_update(centers: np.ndarray, counts: np.ndarray, batch: np.ndarray) -> None:
    """One mini-batch step, in place: assign against the batch-start centers,
    then move each assigned center by eta = 1/count toward its point."""
    d2 = ((batch[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assign = np.argmin(d2, axis=1)
    for i in range(len(batch)):
        c = int(assign[i])
        counts[c] += 1
        eta = 1.0 / counts[c]
        centers[c] = (1.0 - eta) * centers[c] + eta * batch[i]


def nearest_labels(centers: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Index of the closest center per row; ties go to the lowest index."""
    d2 = ((rows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


class MBKMeans(Module):
    input_descriptors = (SlotDescriptor("df", required=True),)
    output_names = ("df",)
    param_defaults = {
        "quantum": 1.0,
        "batch_size": 100,
        "seed": 0,
        "columns": None,
        "init": None,  # explicit initial centroids, bypassing k-means++
    }

    def __init__(self, k, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = int(k)
        self._rng = np.random.default_rng(self.params["seed"])
        self._centers = None
        self._counts = np.zeros(self.k, dtype=np.int64)
        self._cols = list(self.params["columns"]) if self.params["columns"] else None
        self._seed_rows: list = []  # buffered rows until k are available
        self._table = None

    def is_input(self) -> bool:
        return True

    @property
    def centroids(self):
        return None if self._centers is None else self._centers.copy()

    @property
    def counts(self):
        return self._counts.copy()

    @property
    def columns(self):
        return list(self._cols) if self._cols else None

    # ------------------------------------------------------------------ stepping

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("df")
        slot.update(run_number)
        data = slot.data()
        if data is None:
            return StepResult(ModuleState.BLOCKED, 0)
        if self._cols is None:
            self._cols = data.numeric_columns()
            if not self._cols:
                return StepResult(ModuleState.BLOCKED, 0)

        ids = slot.next_created(step_size).tolist()
        # changed rows are absorbed by re-feeding them; deletions need nothing
        updated = slot.take_updated() if slot.has_updated() else set()
        slot.take_deleted()
        refeed = sorted(rid for rid in updated if rid in data)
        all_ids = ids + refeed
        steps = len(all_ids)
        if not all_ids:
            return StepResult(slot.next_state(), 0)
        X = data.to_numpy_rows(all_ids, self._cols)

        if self._centers is None:
            self._seed_rows.append(X)
            buffered = np.concatenate(self._seed_rows)
            if len(buffered) < self.k:
                return StepResult(slot.next_state(), steps)
            init = self.params["init"]
            if init is not None:
                self._centers = np.asarray(init, dtype=np.float64).copy()
                if self._centers.shape != (self.k, len(self._cols)):
                    raise ValueError("init centroids have the wrong shape")
            else:
                self._centers = kmeans_pp(buffered, self.k, self._rng)
            self._seed_rows = []
            X = buffered  # the seeding rows are part of the stream

        batch_size = int(self.params["batch_size"]) or 100
        for batch in gen_batches(len(X), batch_size):
            minibatch_update(self._centers, self._counts, X[batch])
        self._publish(run_number)
        return StepResult(slot.next_state(), steps)

    def _publish(self, run_number):
        values = {c: self._centers[:, i] for i, c in enumerate(self._cols)}
        if self._table is None:
            self._table = DataTable({c: "float64" for c in self._cols})
            self._table.append(values, run=run_number)
            self.set_output("df", self._table)
        else:
            self._table.update_rows(
                np.arange(self.k), values, run=run_number
            )
        self.mark_published(run_number)

    # ------------------------------------------------------------------ steering

    def _validate_input(self, msg):
        if self._centers is None:
            raise InvalidMessageError("centroids are not initialized yet")
        for key, coords in msg.items():
            try:
                idx = int(key)
            except (TypeError, ValueError):
                raise InvalidMessageError(f"bad centroid index {key!r}") from None
            if not 0 <= idx < self.k:
                raise InvalidMessageError(f"centroid index {idx} out of range")
            arr = np.asarray(coords, dtype=np.float64)
            if arr.shape != (self._centers.shape[1],):
                raise InvalidMessageError(
                    f"centroid {idx} expects {self._centers.shape[1]} coordinates"
                )

    def _apply_input(self, msg) -> bool:
        if not msg:
            return False
        run = self.scheduler.for_input(self)
        for key, coords in msg.items():
            self.set_centroid(int(key), coords)
        # reprocess the whole stream with the current centroids as the init
        self._counts[:] = 0
        self.get_input_slot("df").reset()
        self._publish(run)
        return True

    def set_centroid(self, index: int, coords) -> None:
        self._centers[index] = np.asarray(coords, dtype=np.float64)

    def labels(self, rows) -> np.ndarray:
        """Nearest-centroid index for each row (array-like, shape (n, d))."""
        if self._centers is None:
            raise ValueError("centroids are not initialized yet")
        return nearest_labels(self._centers, np.asarray(rows, dtype=np.float64))
