"""Drives module activations: virtual time, round-robin order, interaction mode.

One scheduler owns one background thread on which every activation runs.
Structural changes and steering messages arriving from other threads are
serialized through the scheduler lock and take effect between activations.
When an input module is touched, the scheduler switches to interaction mode:
it runs only the modules lying on a path from the touched inputs to a
visualization, once each, splitting a 100 ms budget across them.
"""

import logging
import threading
import time
from collections import deque, namedtuple

from .errors import (
    CycleError,
    DuplicateInputError,
    NotInputModuleError,
    ProgrunError,
    UnknownSlotError,
)
from .module import Module, _snake_case
from .states import ModuleState

logger = logging.getLogger(__name__)

Connection = namedtuple("Connection", "producer out_slot consumer in_slot")

INTERACTION_BUDGET = 0.100  # seconds, split across the modules of one round


class TimeTable:
    """Append-only map from run number to absolute time."""

    def __init__(self):
        self._runs: list = []
        self._times: list = []

    def append(self, run_number: int, timestamp=None) -> None:
        ts = time.time() if timestamp is None else timestamp
        if self._times and ts < self._times[-1]:
            ts = self._times[-1]
        if self._runs and run_number <= self._runs[-1]:
            raise ValueError("run numbers must be strictly increasing")
        self._runs.append(run_number)
        self._times.append(ts)

    def __len__(self):
        return len(self._runs)

    def entries(self) -> list:
        return list(zip(self._runs, self._times))

    def time_of(self, run_number: int):
        try:
            return self._times[self._runs.index(run_number)]
        except ValueError:
            return None


class Scheduler:
    def __init__(self, interaction_budget: float = INTERACTION_BUDGET, poll_interval: float = 0.010):
        self._lock = threading.RLock()
        self._modules: dict[str, Module] = {}
        self._class_counters: dict[str, int] = {}
        self._connections: list[Connection] = []
        self._run_number = 0
        self.timetable = TimeTable()
        self._queue: deque = deque()
        self._order_index: dict[str, int] = {}
        self._stale = True
        self._reach_cache = None
        self._commands: deque = deque()
        self._cmd_lock = threading.Lock()  # posting must never wait on activations
        self._touched: set = set()
        self._listeners: list = []
        self._interaction = False
        self._interaction_budget = interaction_budget
        self._poll = poll_interval
        self._wake = threading.Event()
        self._stop_event = threading.Event()
        self._paused = False
        self._thread = None
        self.last_interaction_round = None

    # ------------------------------------------------------------------ graph

    @property
    def run_number(self) -> int:
        return self._run_number

    def register(self, module: Module, name=None) -> str:
        """Add a module under a unique id; called from Module.__init__."""
        with self._lock:
            if name is None:
                base = _snake_case(type(module).__name__)
                count = self._class_counters.get(base, 0) + 1
                self._class_counters[base] = count
                name = f"{base}_{count}"
            if name in self._modules:
                raise ProgrunError(f"duplicate module id {name!r}")
            self._modules[name] = module
            self._mark_stale()
            return name

    # spec-facing alias: modules self-register at construction
    add_module = register

    def remove_module(self, module) -> None:
        """Drop a module, severing its connections; dependents become invalid."""
        with self._lock:
            name = module if isinstance(module, str) else module.name
            if name not in self._modules:
                raise ProgrunError(f"no module {name!r}")
            removed = self._modules.pop(name)
            kept = []
            for conn in self._connections:
                if conn.consumer == name:
                    continue
                if conn.producer == name:
                    slot = self._modules[conn.consumer].get_input_slot(conn.in_slot)
                    slot.producer = None
                    slot.producer_slot = None
                    continue
                kept.append(conn)
            self._connections = kept
            self._touched.discard(name)
            self._mark_stale()
            return removed

    def get_module(self, name: str):
        with self._lock:
            return self._modules.get(name)

    def modules(self) -> list:
        with self._lock:
            return list(self._modules.values())

    def connect(self, producer: Module, out_slot: str, consumer: Module, in_slot: str) -> None:
        """Wire producer.out_slot -> consumer.in_slot; rejects cycles and
        double-producing an input."""
        with self._lock:
            for m in (producer, consumer):
                if m.name not in self._modules or self._modules[m.name] is not m:
                    raise ProgrunError(f"module {m.name!r} is not registered here")
            if not producer.has_output_slot(out_slot):
                raise UnknownSlotError(f"{producer.name} has no output slot {out_slot!r}")
            slot = consumer.get_input_slot(in_slot)
            if slot.connected:
                raise DuplicateInputError(
                    f"input {consumer.name}.{in_slot} already fed by {slot.producer.name}"
                )
            path = self._find_path(consumer.name, producer.name)
            if path is not None:
                raise CycleError(path)
            slot.producer = producer
            slot.producer_slot = out_slot
            self._connections.append(
                Connection(producer.name, out_slot, consumer.name, in_slot)
            )
            self._mark_stale()

    def connections(self) -> list:
        with self._lock:
            return list(self._connections)

    def _mark_stale(self):
        self._stale = True
        self._reach_cache = None

    def _adjacency(self) -> dict:
        adj = {name: set() for name in self._modules}
        for c in self._connections:
            adj[c.producer].add(c.consumer)
        return adj

    def _find_path(self, src: str, dst: str):
        """Module-name path src..dst along edges, or None."""
        if src == dst:
            return [src]
        adj = self._adjacency()
        prev = {src: None}
        frontier = deque([src])
        while frontier:
            node = frontier.popleft()
            for nxt in adj.get(node, ()):
                if nxt in prev:
                    continue
                prev[nxt] = node
                if nxt == dst:
                    path = [dst]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return path[::-1]
                frontier.append(nxt)
        return None

    # ------------------------------------------------------------------ order

    def rebuild_order(self) -> list:
        """Recompute the topological queue; returns modules in order."""
        with self._lock:
            names = list(self._modules)
            adj = self._adjacency()
            indeg = {n: 0 for n in names}
            for src, dsts in adj.items():
                for d in dsts:
                    indeg[d] += 1
            order = []
            emitted = set()
            while len(order) < len(names):
                progress = False
                for n in names:  # insertion order keeps ties stable
                    if n not in emitted and indeg[n] == 0:
                        emitted.add(n)
                        order.append(n)
                        for d in adj[n]:
                            indeg[d] -= 1
                        progress = True
                if not progress:  # unreachable: connect() forbids cycles
                    raise CycleError([n for n in names if n not in emitted])
            self._queue = deque(order)
            self._order_index = {n: i for i, n in enumerate(order)}
            self._stale = False
            return [self._modules[n] for n in order]

    # ------------------------------------------------------------------ virtual time

    def _new_run_number(self) -> int:
        self._run_number += 1
        self.timetable.append(self._run_number)
        return self._run_number

    def for_input(self, module: Module) -> int:
        """Fresh run number for an input mutation; marks the module touched."""
        with self._lock:
            run = self._new_run_number()
            self._touched.add(module.name)
            self._wake.set()
            return run

    # ------------------------------------------------------------------ commands & input

    def post(self, fn) -> None:
        """Run fn on the scheduler context: queued when running, inline otherwise."""
        if self.is_running():
            with self._cmd_lock:
                self._commands.append(fn)
            self._wake.set()
        else:
            with self._lock:
                fn()

    def submit_input(self, module: Module, msg: dict) -> None:
        self.post(lambda: module._apply_input(msg))

    def interaction_pending(self) -> bool:
        """True when touches or commands await processing; modules poll this
        between sub-steps to yield ahead of an interaction round."""
        return bool(self._touched) or bool(self._commands)

    def _drain_commands(self) -> int:
        n = 0
        while True:
            with self._cmd_lock:
                if not self._commands:
                    return n
                fn = self._commands.popleft()
            try:
                fn()
            except Exception:  # noqa: BLE001
                logger.exception("scheduler command failed")
            n += 1

    # ------------------------------------------------------------------ normal mode

    def step_once(self) -> bool:
        """Test the next queue module and run it if ready (one queue position)."""
        with self._lock:
            if self._stale:
                self.rebuild_order()
            return self._step_queue_position()

    def _step_queue_position(self) -> bool:
        if not self._queue:
            return False
        name = self._queue.popleft()
        module = self._modules.get(name)
        if module is None:
            return False
        state = module.state
        if state is ModuleState.TERMINATED:
            return False
        if state is ModuleState.ZOMBIE:
            module._set_state(ModuleState.TERMINATED)
            return False
        if module.validate():
            self._queue.append(name)
            return False
        if state is ModuleState.CREATED:
            module._set_state(ModuleState.READY)
        if not module.is_ready():
            self._queue.append(name)
            return False
        run = self._new_run_number()
        module.run(run)
        if module.last_publication_run == run:
            self._notify(name, run)
        self._queue.append(name)
        return True

    def run_cycle(self) -> int:
        """One full pass over the queue; returns the number of activations."""
        with self._lock:
            self._drain_commands()
            if self._touched:
                self._interaction_round()
            if self._stale:
                self.rebuild_order()
            activations = 0
            for _ in range(len(self._queue)):
                if self._step_queue_position():
                    activations += 1
            return activations

    def run_until_quiescent(self, max_seconds=None, max_cycles=None) -> int:
        """Run cycles synchronously until nothing is ready; returns cycle count.

        Only valid while the background thread is not running.
        """
        if self.is_running():
            raise ProgrunError("scheduler thread is running; stop it first")
        start = time.perf_counter()
        cycles = 0
        while True:
            acts = self.run_cycle()
            cycles += 1
            with self._lock:
                pending = self.interaction_pending()
                live_zombies = any(
                    m.state is ModuleState.ZOMBIE for m in self._modules.values()
                )
            if acts == 0 and not pending and not live_zombies:
                return cycles
            if max_cycles is not None and cycles >= max_cycles:
                return cycles
            if max_seconds is not None and time.perf_counter() - start > max_seconds:
                return cycles

    # ------------------------------------------------------------------ interaction mode

    def is_interaction_mode(self) -> bool:
        return self._interaction

    def enter_interaction(self, touched) -> None:
        """Queue an interaction round for the given input modules."""
        with self._lock:
            for m in touched:
                if not m.is_input():
                    raise NotInputModuleError(f"{m.name} is not an input module")
            self._touched.update(m.name for m in touched)
            self._wake.set()
            if not self.is_running():
                self._interaction_round()

    def compute_reachability(self) -> dict:
        """Per input module: ids of modules on a path from it to a visualization."""
        with self._lock:
            if self._stale:
                self.rebuild_order()
            if self._reach_cache is None:
                adj = self._adjacency()
                closure = {n: self._closure(n, adj) for n in self._modules}
                vis = {n for n, m in self._modules.items() if m.is_visualization()}
                # modules that neither are nor lead to a visualization: running
                # them on interaction would never update any view
                dead = {n for n in self._modules if n not in vis and not (closure[n] & vis)}
                self._reach_cache = {
                    n: frozenset(closure[n] - dead)
                    for n, m in self._modules.items()
                    if m.is_input()
                }
            return dict(self._reach_cache)

    @staticmethod
    def _closure(start: str, adj: dict) -> set:
        seen = set()
        frontier = deque([start])
        while frontier:
            for nxt in adj.get(frontier.popleft(), ()):
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        seen.discard(start)
        return seen

    def _interaction_round(self) -> None:
        if self._stale:
            self.rebuild_order()
        touched = [n for n in self._touched if n in self._modules]
        self._touched.clear()
        reach = self.compute_reachability()
        active_names = set()
        for name in touched:
            active_names |= reach.get(name, frozenset())
        active = sorted(active_names, key=self._order_index.__getitem__)
        if not active:
            self.last_interaction_round = {
                "touched": touched, "active": [], "per_module_quantum": None,
            }
            return
        quantum = self._interaction_budget / len(active)
        self.last_interaction_round = {
            "touched": touched,
            "active": list(active),
            "per_module_quantum": quantum,
            "total_budget": quantum * len(active),
        }
        self._interaction = True
        try:
            for name in active:
                module = self._modules.get(name)
                if module is None or module.state in (ModuleState.ZOMBIE, ModuleState.TERMINATED):
                    continue
                if module.validate():
                    continue
                if module.state is ModuleState.CREATED:
                    module._set_state(ModuleState.READY)
                if not module.is_ready():
                    continue
                run = self._new_run_number()
                module.run(run, quantum_override=quantum)
                if module.last_publication_run == run:
                    self._notify(name, run)
        finally:
            self._interaction = False

    # ------------------------------------------------------------------ thread

    def is_running(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def start(self) -> None:
        with self._lock:
            if self.is_running():
                return
            self._stop_event.clear()
            self._paused = False
            self._thread = threading.Thread(target=self._loop, name="progrun-scheduler", daemon=True)
            self._thread.start()

    def stop(self, timeout: float = 5.0) -> None:
        self._stop_event.set()
        self._wake.set()
        thread = self._thread
        if thread is not None and thread is not threading.current_thread():
            thread.join(timeout)
        self._thread = None

    def pause(self) -> None:
        self._paused = True

    def resume(self) -> None:
        self._paused = False
        self._wake.set()

    def _loop(self) -> None:
        idle_positions = 0
        while not self._stop_event.is_set():
            if self._paused:
                self._wake.wait(self._poll)
                self._wake.clear()
                continue
            with self._lock:
                progressed = bool(self._drain_commands())
                if self._touched:
                    self._interaction_round()
                    progressed = True
                if self._stale:
                    self.rebuild_order()
                if self._step_queue_position():
                    progressed = True
                queue_len = len(self._queue)
            if progressed:
                idle_positions = 0
            else:
                idle_positions += 1
                if idle_positions >= max(queue_len, 1):
                    # a full silent pass: sleep until woken or next poll
                    self._wake.wait(self._poll)
                    self._wake.clear()
                    idle_positions = 0

    # ------------------------------------------------------------------ listeners & export

    def add_listener(self, fn) -> None:
        """fn(module_id, run_number) called after each publication."""
        with self._lock:
            self._listeners.append(fn)

    def remove_listener(self, fn) -> None:
        with self._lock:
            if fn in self._listeners:
                self._listeners.remove(fn)

    def _notify(self, module_id: str, run_number: int) -> None:
        for fn in list(self._listeners):
            try:
                fn(module_id, run_number)
            except Exception:  # noqa: BLE001
                logger.exception("publication listener failed")

    def list_modules(self) -> list:
        with self._lock:
            return [m.to_json(short=True) for m in self._modules.values()]

    def to_graph_json(self) -> dict:
        with self._lock:
            nodes = [
                {
                    "id": name,
                    "type": _snake_case(type(m).__name__),
                    "state": m.state.value,
                    "is_input": m.is_input(),
                    "is_visualization": m.is_visualization(),
                }
                for name, m in self._modules.items()
            ]
            edges = [
                {
                    "from": c.producer,
                    "from_slot": c.out_slot,
                    "to": c.consumer,
                    "to_slot": c.in_slot,
                }
                for c in self._connections
            ]
            return {"nodes": nodes, "edges": edges}

    def to_json(self) -> dict:
        with self._lock:
            return {
                "running": self.is_running(),
                "paused": self._paused,
                "run_number": self._run_number,
                "interaction_mode": self._interaction,
                "modules": list(self._modules),
            }
