"""Drag a trapped k-means centroid and watch the algorithm recover.

The stream starts with two blobs, so seeding places all three centroids
there; a third blob arriving later stays unclaimed.  Moving one centroid into
it (the Listing-5-style steering message) zeroes the update counts and
reprocesses the whole stream with the moved centroids as the new start.
"""

import numpy as np

from progrun import MBKMeans, Scheduler
from progrun.module import Module, StepResult
from progrun.states import ModuleState
from progrun.table import DataTable

BLOBS = {"A": (0.0, 0.0), "B": (8.0, 0.0), "C": (25.0, 25.0)}


def sample_blob(rng, center, n, sigma=0.5):
    return rng.normal(size=(n, 2)) * sigma + np.asarray(center)


class BlobStream(Module):
    input_descriptors = ()
    output_names = ("df",)

    def __init__(self, chunks, *, scheduler, **params):
        super().__init__(scheduler=scheduler, **params)
        self.chunks = list(chunks)
        self.table = DataTable({"x": "float64", "y": "float64"})
        self.set_output("df", self.table)

    def run_step(self, run_number, step_size, howlong):
        if not self.chunks:
            return StepResult(ModuleState.ZOMBIE, 0)
        chunk = self.chunks.pop(0)
        self.table.append({"x": chunk[:, 0], "y": chunk[:, 1]}, run=run_number)
        self.mark_published(run_number)
        state = ModuleState.READY if self.chunks else ModuleState.ZOMBIE
        return StepResult(state, len(chunk))


rng = np.random.default_rng(21)
head = np.concatenate([sample_blob(rng, BLOBS["A"], 800), sample_blob(rng, BLOBS["B"], 800)])
rng.shuffle(head)
late = sample_blob(rng, BLOBS["C"], 800)
chunks = [head[i : i + 400] for i in range(0, len(head), 400)]
chunks += [late[i : i + 400] for i in range(0, len(late), 400)]

sched = Scheduler()
stream = BlobStream(chunks, scheduler=sched)
kmeans = MBKMeans(3, scheduler=sched, columns=["x", "y"], seed=5, batch_size=100)
sched.connect(stream, "df", kmeans, "df")


def show(label):
    print(f"\n{label}")
    for i, (cx, cy) in enumerate(kmeans.centroids):
        nearest = min(BLOBS, key=lambda b: (BLOBS[b][0] - cx) ** 2 + (BLOBS[b][1] - cy) ** 2)
        dist = np.hypot(BLOBS[nearest][0] - cx, BLOBS[nearest][1] - cy)
        print(f"  centroid {i}: ({cx:6.2f}, {cy:6.2f})  nearest blob {nearest} (dist {dist:5.2f})")


sched.run_until_quiescent()
show("after one pass (blob C unclaimed, one centroid stuck between B and C):")

stray = int(np.argmin(np.linalg.norm(kmeans.centroids - np.array(BLOBS["C"]), axis=1)))
print(f"\nsteering: from_input({{'{stray}': {list(BLOBS['C'])}}})")
kmeans.from_input({str(stray): list(BLOBS["C"])})

sched.run_until_quiescent()
show("after reprocessing with the moved centroid:")
print(f"\nupdate counts per centroid: {kmeans.counts.tolist()} "
      f"(total = {kmeans.counts.sum()} = rows reprocessed)")
