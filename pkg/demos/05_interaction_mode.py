"""Measure the interaction fast path.

While a deliberately slow background computation grinds away, touching an
input module flips the scheduler into interaction mode: only the modules
between the touched input and a visualization run, once each, under a shared
100 ms budget.  A heavy module yields at its next sub-step boundary when a
touch is pending, so the end-to-end latency is bounded by one sub-step of the
running module (about quantum/4) plus the 100 ms round, never by the whole
quantum.
"""

import time

import numpy as np

from progrun import Scheduler, Variable
from progrun.module import Module, SlotDescriptor, StepResult
from progrun.states import ModuleState
from progrun.table import DataTable


class BusyLoader(Module):
    """Stands in for a heavy loader: linear cost per step, forever ready."""

    input_descriptors = ()
    output_names = ("df",)

    COST_PER_STEP = 5e-5  # seconds

    def run_step(self, run_number, step_size, howlong):
        target = time.perf_counter() + step_size * self.COST_PER_STEP
        x = 0.0
        while time.perf_counter() < target:
            x += 1.0
        return StepResult(ModuleState.READY, step_size)


class Relay(Module):
    """Cheap step in the interaction path: republishes whenever poked."""

    input_descriptors = (SlotDescriptor("df", required=True),)
    output_names = ("df",)

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("df")
        slot.update(run_number)
        changed = slot.created_count() or slot.has_updated() or slot.has_deleted()
        slot.next_created(slot.created_count())
        slot.take_updated()
        slot.take_deleted()
        if not changed:
            return StepResult(ModuleState.BLOCKED, 0)
        if self.get_data("df") is None:
            t = DataTable({"poked": "int64"})
            t.append({"poked": [1]}, run=run_number)
            self.set_output("df", t)
        else:
            t = self.get_data("df")
            t.update_rows([0], {"poked": int(t.value(0, "poked")) + 1}, run=run_number)
        self.mark_published(run_number)
        return StepResult(ModuleState.BLOCKED, 1)


class View(Relay):
    def is_visualization(self):
        return True


sched = Scheduler(poll_interval=0.005)
busy = BusyLoader(scheduler=sched, quantum=0.4)  # background load, off the path
slider = Variable(scheduler=sched)
relays = [Relay(scheduler=sched) for _ in range(3)]
view = View(scheduler=sched)
chain = [slider, *relays, view]
for a, b in zip(chain, chain[1:]):
    sched.connect(a, "df", b, "df")

reach = sched.compute_reachability()[slider.name]
print(f"reachability of {slider.name}: {sorted(reach)}")

sched.start()
time.sleep(0.2)
latencies = []
try:
    for i in range(20):
        seen = view.get_data("df")
        before = int(seen.value(0, "poked")) if seen is not None else 0
        t0 = time.perf_counter()
        slider.from_input({"position": float(i)})
        while True:
            now = view.get_data("df")
            if now is not None and int(now.value(0, "poked")) > before:
                break
            time.sleep(0.001)
        latencies.append((time.perf_counter() - t0) * 1000)
        time.sleep(0.02)
finally:
    sched.stop()

round_ = sched.last_interaction_round
print(f"interaction set: {round_['active']}")
print(f"per-module quantum: {round_['per_module_quantum'] * 1000:.1f} ms "
      f"(x{len(round_['active'])} = {round_['total_budget'] * 1000:.0f} ms budget)")
print(f"background module sub-step bound: {busy.params['quantum'] / 4 * 1000:.0f} ms")
print(f"touch-to-repaint latency over {len(latencies)} trials: "
      f"median {np.median(latencies):.1f} ms, max {max(latencies):.1f} ms")
