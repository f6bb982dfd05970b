"""The classic five-module pipeline: CSV -> min/max -> 2D histogram -> heatmap.

Generates a synthetic two-spiral dataset, loads it progressively, and writes
the heatmap PNG after every scheduler cycle so you can watch the picture
sharpen as rows arrive (frames land in demo_out/).
"""

from pathlib import Path

import numpy as np

from progrun.pipeline import build_heatmap_pipeline
from progrun.scheduler import Scheduler

out_dir = Path("demo_out")
out_dir.mkdir(exist_ok=True)

# --- synthesize a spiral point cloud -------------------------------------
rng = np.random.default_rng(7)
n = 200_000
t = rng.uniform(0, 4 * np.pi, size=n)
arm = rng.integers(0, 2, size=n)
r = t / (4 * np.pi)
x = r * np.cos(t + arm * np.pi) + rng.normal(scale=0.02, size=n)
y = r * np.sin(t + arm * np.pi) + rng.normal(scale=0.02, size=n)

csv_path = out_dir / "spiral.csv"
with open(csv_path, "w") as f:
    f.write("x,y\n")
    np.savetxt(f, np.column_stack([x, y]), fmt="%.5f", delimiter=",")
print(f"wrote {n} rows to {csv_path}")

# --- build and run the pipeline -------------------------------------------
sched = Scheduler()
mods = build_heatmap_pipeline(
    sched, str(csv_path), "x", "y", xbins=256, ybins=256, quantum=0.05
)

frame_no = 0
while True:
    activations = sched.run_cycle()
    frame = mods["heatmap"].frame
    if frame is not None and frame_no < frame.run_number:
        frame_no = frame.run_number
        path = out_dir / f"heatmap_{frame_no:04d}.png"
        path.write_bytes(frame.to_png())
        binned = mods["histogram2d"].grid.sum()
        print(f"run {frame_no:4d}: {binned:7d} points binned -> {path}")
    if activations == 0:
        break

print(f"\nfinal grid total: {mods['histogram2d'].grid.sum()} (== {n})")
print(f"heatmap history kept: {len(mods['heatmap'].history)} frames")
