"""Base class for progressive modules.

A module computes one bounded slice of work per activation.  The scheduler
calls :meth:`Module.run`, which repeatedly invokes the abstract
:meth:`Module.run_step` with a step count sized by the module's time
predictor, until the module blocks or its time quantum is spent.  Each
activation leaves a partial result on the module's output slots; with no
further input changes, repeated activation reaches the same fixed point an
eager computation would produce.
"""

import logging
import re
import time
from dataclasses import dataclass
from typing import Optional

from .changes import SlotTracker
from .errors import (
    InvalidMessageError,
    NotInputModuleError,
    UnknownSlotError,
)
from .states import ModuleState, check_transition
from .table import UPDATE_COL, DataTable
from .timing import TimePredictor

logger = logging.getLogger(__name__)

PARAMS_SLOT = "_params"
TRACE_SLOT = "_trace"

MIN_SUBSTEPS = 4  # a run is split into at least this many run_step calls


@dataclass(frozen=True)
class SlotDescriptor:
    name: str
    required: bool = False
    direction: str = "input"


@dataclass(frozen=True)
class StepResult:
    next_state: ModuleState
    steps_run: int

    def __post_init__(self):
        if self.steps_run < 0:
            raise ValueError("steps_run must be >= 0")


@dataclass(frozen=True)
class RunRecord:
    """Trace row for one activation."""

    module_id: str
    run_number: int
    duration: float
    steps_run: int
    substeps: int
    memory_delta: Optional[int] = None
    error: Optional[str] = None


class InputSlot:
    """A module's view of one upstream connection."""

    def __init__(self, descriptor: SlotDescriptor):
        self.descriptor = descriptor
        self.producer = None
        self.producer_slot = None
        self.tracker = SlotTracker()

    @property
    def name(self):
        return self.descriptor.name

    @property
    def connected(self):
        return self.producer is not None

    def data(self):
        if self.producer is None:
            return None
        return self.producer.get_data(self.producer_slot)

    def has_unseen_changes(self) -> bool:
        t = self.tracker
        if t.created_count() or t.has_updated() or t.has_deleted():
            return True
        data = self.data()
        if data is None:
            return False
        if t._generation is not None and data.generation != t._generation:
            return True
        return data.last_change_run > t.last_run

    # Listing-style conveniences used inside run_step implementations
    def update(self, run_number):
        self.tracker.update(self.data(), run_number)

    def next_created(self, step_size):
        return self.tracker.next_created(step_size)

    def created_count(self):
        return self.tracker.created_count()

    def has_updated(self):
        return self.tracker.has_updated()

    def has_deleted(self):
        return self.tracker.has_deleted()

    def was_replaced(self):
        return self.tracker.was_replaced()

    def take_updated(self):
        return self.tracker.take_updated()

    def take_deleted(self):
        return self.tracker.take_deleted()

    def reset(self):
        self.tracker.reset()

    def next_state(self):
        return self.tracker.next_state()


def _snake_case(name: str) -> str:
    return re.sub(r"(?<=[a-z])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])", "_", name).lower()


class Module:
    """A progressive function with named slots, parameters and a lifecycle."""

    # concrete classes override these declarations
    input_descriptors: tuple = ()
    output_names: tuple = ("df",)
    param_defaults: dict = {"quantum": 1.0}

    def __init__(self, *, scheduler, name=None, **params):
        if scheduler is None:
            raise ValueError("a module belongs to a scheduler")
        self.scheduler = scheduler
        self.params = self._merged_defaults()
        unknown = set(params) - set(self.params)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)}")
        self.params.update(params)
        if self.params["quantum"] <= 0:
            raise ValueError("quantum must be > 0")

        self._state = ModuleState.CREATED
        self._inputs: dict[str, InputSlot] = {}
        for desc in self.input_descriptors:
            if desc.name in self._inputs:
                raise ValueError(f"duplicate input slot {desc.name!r}")
            self._inputs[desc.name] = InputSlot(desc)
        self._inputs[PARAMS_SLOT] = InputSlot(SlotDescriptor(PARAMS_SLOT, required=False))

        self._output_names = tuple(self.output_names) + (TRACE_SLOT,)
        if len(set(self._output_names)) != len(self._output_names):
            raise ValueError("duplicate output slot names")
        self._out: dict[str, object] = {name_: None for name_ in self._output_names}

        self.predictor = TimePredictor(seed=params.get("seed"))
        self._trace: list[RunRecord] = []
        self._trace_table = None
        self._last_publication_run = 0

        self.name = scheduler.register(self, name)

    def _merged_defaults(self) -> dict:
        merged = {}
        for klass in reversed(type(self).__mro__):
            merged.update(getattr(klass, "param_defaults", {}) or {})
        return merged

    # ------------------------------------------------------------------ slots

    def get_input_slot(self, name: str) -> InputSlot:
        try:
            return self._inputs[name]
        except KeyError:
            raise UnknownSlotError(f"{self.name} has no input slot {name!r}") from None

    def has_output_slot(self, name: str) -> bool:
        return name in self._output_names

    def input_slot_names(self) -> list:
        return list(self._inputs)

    def output_slot_names(self) -> list:
        return list(self._output_names)

    def get_data(self, name: str):
        if name == TRACE_SLOT:
            return self._trace_table
        try:
            return self._out[name]
        except KeyError:
            raise UnknownSlotError(f"{self.name} has no output slot {name!r}") from None

    def set_output(self, name: str, data) -> None:
        if name not in self._out:
            raise UnknownSlotError(f"{self.name} has no output slot {name!r}")
        self._out[name] = data

    # ------------------------------------------------------------------ state

    @property
    def state(self) -> ModuleState:
        return self._state

    def _set_state(self, target: ModuleState) -> None:
        check_transition(self._state, target)
        self._state = target

    def is_input(self) -> bool:
        return False

    def is_visualization(self) -> bool:
        return False

    def validate(self) -> list:
        """Error strings, one per unmet wiring requirement; empty when ok."""
        errors = []
        for slot in self._inputs.values():
            if slot.descriptor.required and not slot.connected:
                errors.append(f"required input {slot.name!r} unconnected")
        return errors

    def is_ready(self) -> bool:
        if self._state is ModuleState.READY:
            return True
        if self._state is ModuleState.BLOCKED:
            return any(s.connected and s.has_unseen_changes() for s in self._inputs.values())
        return False

    # ------------------------------------------------------------------ running

    def run_step(self, run_number: int, step_size: int, howlong: float) -> StepResult:
        raise NotImplementedError

    def run(self, run_number: int, quantum_override=None) -> RunRecord:
        """One activation: call run_step in sub-steps until blocked or out of time."""
        self._apply_param_overrides(run_number)
        quantum = quantum_override if quantum_override is not None else self.params["quantum"]
        if self._state is ModuleState.BLOCKED:  # woken by new input data
            self._set_state(ModuleState.READY)
        self._set_state(ModuleState.RUNNING)
        start = time.perf_counter()
        sub_budget = quantum / MIN_SUBSTEPS
        substeps = 0
        total_steps = 0
        next_state = ModuleState.BLOCKED
        error = None
        while True:
            step_size = self.predictor.predict(sub_budget)
            elapsed = time.perf_counter() - start
            howlong = max(quantum - elapsed, sub_budget / 2)
            t0 = time.perf_counter()
            try:
                result = self.run_step(run_number, step_size, howlong)
            except Exception as exc:  # noqa: BLE001 - one broken module must not halt the graph
                logger.exception("%s failed at run %d", self.name, run_number)
                error = f"{type(exc).__name__}: {exc}"
                next_state = ModuleState.ZOMBIE
                substeps += 1
                break
            dt = time.perf_counter() - t0
            substeps += 1
            if result.steps_run > 0:
                self.predictor.record(result.steps_run, dt)
            total_steps += result.steps_run
            next_state = result.next_state
            if next_state is not ModuleState.READY:
                break
            if result.steps_run == 0:
                # claims more work but did none; yield to the scheduler
                break
            if self.scheduler.interaction_pending():
                # yield at the sub-step boundary so steering reacts fast;
                # the remaining budget is forfeited, not carried over
                break
            elapsed = time.perf_counter() - start
            if substeps >= MIN_SUBSTEPS and elapsed + sub_budget > quantum:
                break
        duration = time.perf_counter() - start
        record = RunRecord(
            module_id=self.name,
            run_number=run_number,
            duration=duration,
            steps_run=total_steps,
            substeps=substeps,
            error=error,
        )
        self._trace.append(record)
        self._append_trace_row(record)
        self._set_state(next_state)
        return record

    def _apply_param_overrides(self, run_number: int) -> None:
        slot = self._inputs[PARAMS_SLOT]
        if not slot.connected:
            return
        data = slot.data()
        if data is None or len(data) == 0:
            return
        slot.update(run_number)
        if not (slot.created_count() or slot.has_updated() or slot.has_deleted()):
            return
        slot.next_created(slot.created_count())
        slot.take_updated()
        slot.take_deleted()
        last = len(data) - 1
        for col in data.column_names:
            if col in self.params and col != "quantum":
                self.params[col] = data.column(col)[last]
            elif col == "quantum":
                value = float(data.column(col)[last])
                if value > 0:
                    self.params["quantum"] = value

    # ------------------------------------------------------------------ input

    def from_input(self, msg: dict) -> None:
        """Deliver a steering/query message; only input modules accept them."""
        if not self.is_input():
            raise NotInputModuleError(f"{self.name} does not accept input messages")
        if not isinstance(msg, dict):
            raise InvalidMessageError("message must be a JSON object")
        self._validate_input(msg)
        self.scheduler.submit_input(self, dict(msg))

    def _validate_input(self, msg: dict) -> None:
        raise NotImplementedError

    def _apply_input(self, msg: dict) -> bool:
        """Apply a validated message on the scheduler context.

        Returns True when state changed (the module is then touched).
        """
        raise NotImplementedError

    # ------------------------------------------------------------------ trace

    @property
    def trace(self) -> list:
        return list(self._trace)

    @property
    def last_run_record(self):
        return self._trace[-1] if self._trace else None

    def _append_trace_row(self, record: RunRecord) -> None:
        if self._trace_table is None:
            self._trace_table = DataTable(
                {
                    "run": "int64",
                    "duration": "float64",
                    "steps": "int64",
                    "substeps": "int64",
                    "rate": "float64",
                    "history": "int64",
                }
            )
        self._trace_table.append(
            {
                "run": [record.run_number],
                "duration": [record.duration],
                "steps": [record.steps_run],
                "substeps": [record.substeps],
                "rate": [self.predictor.rate or float("nan")],
                "history": [self.predictor.history_len],
            },
            run=record.run_number,
        )

    def mark_published(self, run_number: int) -> None:
        self._last_publication_run = run_number

    @property
    def last_publication_run(self) -> int:
        return self._last_publication_run

    # ------------------------------------------------------------------ export

    def to_json(self, short: bool = False) -> dict:
        rec = self.last_run_record
        out = {
            "id": self.name,
            "type": _snake_case(type(self).__name__),
            "state": self._state.value,
            "is_input": self.is_input(),
            "is_visualization": self.is_visualization(),
            "parameters": {k: _json_safe(v) for k, v in self.params.items()},
            "inputs": {
                s.name: (f"{s.producer.name}.{s.producer_slot}" if s.connected else None)
                for s in self._inputs.values()
            },
            "outputs": list(self._output_names),
            "last_run": None if rec is None else _record_json(rec),
        }
        if self.is_visualization():
            out["visualization"] = True
        if not short:
            out["trace"] = [_record_json(r) for r in self._trace]
            data = {}
            for name in self._output_names:
                table = self.get_data(name)
                if isinstance(table, DataTable):
                    data[name] = table.to_json_slice(
                        offset=max(0, len(table) - 100), limit=100
                    )
            out["data"] = data
        return out

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} {self._state.value}>"


def _record_json(rec: RunRecord) -> dict:
    return {
        "module_id": rec.module_id,
        "run_number": rec.run_number,
        "duration": rec.duration,
        "steps_run": rec.steps_run,
        "substeps": rec.substeps,
        "memory_delta": rec.memory_delta,
        "error": rec.error,
    }


def _json_safe(v):
    if isinstance(v, (bool, int, float, str)) or v is None:
        return v
    if isinstance(v, (list, tuple)):
        return [_json_safe(x) for x in v]
    return str(v)
