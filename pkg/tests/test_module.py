import pytest

from progrun.errors import (
    CycleError,
    DuplicateInputError,
    NotInputModuleError,
    StateTransitionError,
    UnknownSlotError,
)
from progrun.module import Module, SlotDescriptor, StepResult
from progrun.scheduler import Scheduler
from progrun.states import ModuleState, check_transition
from progrun.table import DataTable

from helpers import LinearCostModule, Stamp, TableSource, make_source


class Passive(Module):
    """Declarable slots, trivial behavior."""

    input_descriptors = (SlotDescriptor("df", required=True),)
    output_names = ("df",)

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("df")
        slot.update(run_number)
        ids = slot.next_created(step_size)
        return StepResult(slot.next_state(), len(ids))


class NoInputs(Module):
    input_descriptors = ()

    def run_step(self, run_number, step_size, howlong):
        return StepResult(ModuleState.BLOCKED, 0)


class Exploding(Module):
    input_descriptors = ()

    def run_step(self, run_number, step_size, howlong):
        raise RuntimeError("boom")


@pytest.fixture
def sched():
    return Scheduler()


class TestStateMachine:
    def test_legal_transitions(self):
        check_transition(ModuleState.CREATED, ModuleState.READY)
        check_transition(ModuleState.READY, ModuleState.RUNNING)
        check_transition(ModuleState.RUNNING, ModuleState.BLOCKED)
        check_transition(ModuleState.BLOCKED, ModuleState.READY)
        check_transition(ModuleState.RUNNING, ModuleState.ZOMBIE)
        check_transition(ModuleState.ZOMBIE, ModuleState.TERMINATED)

    @pytest.mark.parametrize(
        "src,dst",
        [
            (ModuleState.CREATED, ModuleState.RUNNING),
            (ModuleState.BLOCKED, ModuleState.CREATED),
            (ModuleState.TERMINATED, ModuleState.READY),
            (ModuleState.ZOMBIE, ModuleState.RUNNING),
            (ModuleState.READY, ModuleState.ZOMBIE),
        ],
    )
    def test_illegal_transitions(self, src, dst):
        with pytest.raises(StateTransitionError):
            check_transition(src, dst)

    def test_fresh_module_is_created(self, sched):
        assert NoInputs(scheduler=sched).state is ModuleState.CREATED


class TestConnect:
    def test_two_cycle_rejected_with_path(self, sched):
        a = Passive(scheduler=sched, name="A")
        b = Passive(scheduler=sched, name="B")
        sched.connect(a, "df", b, "df")
        with pytest.raises(CycleError) as err:
            sched.connect(b, "df", a, "df")
        assert err.value.path == ["A", "B"]

    def test_fan_out_accepted(self, sched):
        src = NoInputs(scheduler=sched)
        b = Passive(scheduler=sched)
        c = Passive(scheduler=sched)
        sched.connect(src, "df", b, "df")
        sched.connect(src, "df", c, "df")
        assert len(sched.connections()) == 2

    def test_unknown_slot_rejected(self, sched):
        a = NoInputs(scheduler=sched)
        b = Passive(scheduler=sched)
        with pytest.raises(UnknownSlotError):
            sched.connect(a, "xyz", b, "df")
        with pytest.raises(UnknownSlotError):
            sched.connect(a, "df", b, "xyz")

    def test_double_producer_rejected(self, sched):
        a = NoInputs(scheduler=sched)
        b = NoInputs(scheduler=sched)
        c = Passive(scheduler=sched)
        sched.connect(a, "df", c, "df")
        with pytest.raises(DuplicateInputError):
            sched.connect(b, "df", c, "df")

    def test_self_loop_rejected(self, sched):
        a = Passive(scheduler=sched)
        with pytest.raises(CycleError):
            sched.connect(a, "df", a, "df")


class TestValidate:
    def test_missing_required_input(self, sched):
        m = Passive(scheduler=sched)
        errors = m.validate()
        assert errors == ["required input 'df' unconnected"]

    def test_fully_wired_ok(self, sched):
        src = NoInputs(scheduler=sched)
        m = Passive(scheduler=sched)
        sched.connect(src, "df", m, "df")
        assert m.validate() == []

    def test_zero_input_module_ok(self, sched):
        assert NoInputs(scheduler=sched).validate() == []


class TestIsReady:
    def test_ready_state(self, sched):
        m = NoInputs(scheduler=sched)
        m._set_state(ModuleState.READY)
        assert m.is_ready()

    def test_blocked_without_changes(self, sched):
        src = make_source(sched, {"a": [1.0]})
        m = Passive(scheduler=sched)
        sched.connect(src, "df", m, "df")
        m._set_state(ModuleState.BLOCKED)
        assert not m.is_ready()  # source has not run yet

    def test_blocked_wakes_on_upstream_append(self, sched):
        src = make_source(sched, {"a": [1.0, 2.0]})
        m = Passive(scheduler=sched)
        sched.connect(src, "df", m, "df")
        m._set_state(ModuleState.BLOCKED)
        src._set_state(ModuleState.READY)
        src.run(1)
        assert m.is_ready()


class TestRun:
    def test_immediate_block_is_single_substep(self, sched):
        src = make_source(sched, {"a": []})
        m = Passive(scheduler=sched)
        sched.connect(src, "df", m, "df")
        m._set_state(ModuleState.READY)
        rec = m.run(1)
        assert rec.substeps == 1
        assert m.state is ModuleState.BLOCKED

    def test_linear_module_runs_at_least_four_substeps(self, sched):
        m = LinearCostModule(scheduler=sched, quantum=0.1, cost_per_step=2e-5)
        m._set_state(ModuleState.READY)
        for run in range(1, 8):
            m.run(run)
            m._set_state(ModuleState.READY)
        recs = m.trace[-3:]
        assert all(r.substeps >= 4 for r in recs)

    def test_exception_turns_zombie(self, sched):
        m = Exploding(scheduler=sched)
        m._set_state(ModuleState.READY)
        rec = m.run(1)
        assert m.state is ModuleState.ZOMBIE
        assert "boom" in rec.error

    def test_zombie_sibling_does_not_stop_others(self, sched):
        Exploding(scheduler=sched)
        healthy = make_source(sched, {"a": [1.0, 2.0]}, chunk_size=1)
        sched.run_until_quiescent(max_seconds=5)
        assert healthy.state is ModuleState.TERMINATED
        assert len(healthy.get_data("df")) == 2

    def test_trace_grows_per_run(self, sched):
        src = make_source(sched, {"a": [1.0, 2.0, 3.0]}, chunk_size=1)
        for run in range(1, 4):
            src._set_state(ModuleState.READY)
            src.run(run)
        assert len(src.trace) == 3
        assert src.get_data("_trace") is not None
        assert len(src.get_data("_trace")) == 3


class TestFromInput:
    def test_non_input_module_rejects(self, sched):
        m = NoInputs(scheduler=sched)
        with pytest.raises(NotInputModuleError):
            m.from_input({"x": 1})


class TestParamsSlot:
    def test_params_table_overrides_quantum(self, sched):
        class ParamSource(Module):
            input_descriptors = ()

            def __init__(self, **kw):
                super().__init__(**kw)
                t = DataTable({"quantum": "float64"})
                t.append({"quantum": [0.25]}, run=1)
                self.set_output("df", t)

            def run_step(self, run_number, step_size, howlong):
                return StepResult(ModuleState.BLOCKED, 0)

        src = ParamSource(scheduler=sched)
        m = LinearCostModule(scheduler=sched, quantum=1.0, cost_per_step=1e-5)
        sched.connect(src, "df", m, "_params")
        m._set_state(ModuleState.READY)
        m.run(5)
        assert m.params["quantum"] == 0.25


class TestToJson:
    def test_fresh_module(self, sched):
        m = NoInputs(scheduler=sched)
        out = m.to_json()
        assert out["state"] == "created"
        assert out["trace"] == []
        assert out["last_run"] is None

    def test_trace_length_after_runs(self, sched):
        src = make_source(sched, {"a": [1.0, 2.0, 3.0]}, chunk_size=1)
        for run in range(1, 4):
            src._set_state(ModuleState.READY)
            src.run(run)
        assert len(src.to_json()["trace"]) == 3

    def test_visualization_flag(self, sched):
        class Vis(NoInputs):
            def is_visualization(self):
                return True

        out = Vis(scheduler=sched).to_json(short=True)
        assert out["visualization"] is True
        assert out["is_visualization"] is True

    def test_short_omits_data(self, sched):
        src = make_source(sched, {"a": [1.0]})
        assert "data" not in src.to_json(short=True)
        assert "data" in src.to_json(short=False)

    def test_ids_follow_class_counter(self, sched):
        a = Stamp(scheduler=sched)
        b = Stamp(scheduler=sched)
        assert a.name == "stamp_1"
        assert b.name == "stamp_2"
        src = TableSource([], {}, scheduler=sched)
        assert src.name == "table_source_1"
