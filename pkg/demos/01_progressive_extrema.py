"""Watch a running minimum converge while data streams in.

A source module feeds 50k rows in small chunks; a Min module folds each new
chunk into its running values and publishes one result row per activation.
The output table therefore doubles as a convergence history.
"""

import numpy as np

from progrun import Min, Scheduler
from progrun.module import Module, StepResult
from progrun.states import ModuleState
from progrun.table import DataTable


class StreamSource(Module):
    """Emits one chunk of random rows per activation, `total` rows in all."""

    input_descriptors = ()
    output_names = ("df",)

    def __init__(self, total, rows_per_activation, *, scheduler, seed=0, **params):
        super().__init__(scheduler=scheduler, **params)
        self.rng = np.random.default_rng(seed)
        self.remaining = total
        self.rows_per_activation = rows_per_activation
        self._last_run = None
        self.table = DataTable({"value": "float64"})
        self.set_output("df", self.table)

    def run_step(self, run_number, step_size, howlong):
        if self.remaining == 0:
            return StepResult(ModuleState.ZOMBIE, 0)
        if self._last_run == run_number:
            return StepResult(ModuleState.READY, 0)  # one chunk per activation
        self._last_run = run_number
        n = min(self.remaining, self.rows_per_activation)
        self.table.append({"value": self.rng.normal(size=n)}, run=run_number)
        self.remaining -= n
        self.mark_published(run_number)
        state = ModuleState.READY if self.remaining else ModuleState.ZOMBIE
        return StepResult(state, n)


sched = Scheduler()
source = StreamSource(50_000, 5000, scheduler=sched, seed=42)
running_min = Min(scheduler=sched)
sched.connect(source, "df", running_min, "df")

print("cycle  rows_seen  running_min")
cycle = 0
while True:
    activations = sched.run_cycle()
    cycle += 1
    out = running_min.get_data("df")
    if out is not None and len(out):
        seen = len(source.table)
        print(f"{cycle:5d}  {seen:9d}  {out.last_row(['value'])['value']:+.6f}")
    if activations == 0:
        break

eager = source.table.column("value").min()
final = running_min.get_data("df").last_row(["value"])["value"]
print(f"\nfixed point {final:+.6f} == eager min {eager:+.6f}: {final == eager}")
print(f"convergence history has {len(running_min.get_data('df'))} rows")
