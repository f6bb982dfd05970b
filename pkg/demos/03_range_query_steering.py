"""Steer a running pipeline with range queries.

A Select module sits between the loader and the histogram.  Mid-load we post
filter expressions to the query variable, exactly as the browser UI would,
and the selection (and the histogram behind it) re-filters from scratch.
"""

from pathlib import Path

import numpy as np

from progrun.pipeline import build_heatmap_pipeline
from progrun.scheduler import Scheduler

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(3)
n = 100_000
csv_path = out_dir / "uniform.csv"
with open(csv_path, "w") as f:
    f.write("x,y\n")
    np.savetxt(f, rng.uniform(size=(n, 2)), fmt="%.6f", delimiter=",")

sched = Scheduler()
mods = build_heatmap_pipeline(
    sched, str(csv_path), "x", "y", xbins=64, ybins=64, quantum=0.1, with_query=True
)

queries = [
    (3, "0.4 < x < 0.6"),           # zoom into the middle band mid-load
    (8, "0.4 < x < 0.6 and y < 0.3"),
    (14, ""),                        # clear the filter again
]
pending = list(queries)

cycle = 0
while True:
    activations = sched.run_cycle()
    cycle += 1
    if pending and cycle >= pending[0][0]:
        _, text = pending.pop(0)
        mods["variable"].from_input({"query": text})
        print(f"cycle {cycle:3d}: posted query {text!r}")
        continue  # give the message a cycle before testing for quiescence
    selected = mods["select"].get_data("df")
    if selected is not None and cycle % 3 == 0:
        print(f"cycle {cycle:3d}: select passes {len(selected):6d} rows "
              f"(query={mods['select'].query!r})")
    if activations == 0 and not pending:
        break

loaded = mods["csv"].get_data("df")
final = mods["select"].get_data("df")
print(f"\nloaded {len(loaded)} rows; final selection {len(final)} rows "
      f"with query {mods['select'].query!r} (empty query = pass-through)")
print(f"histogram total equals selection: {mods['histogram2d'].grid.sum() == len(final)}")
