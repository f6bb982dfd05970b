import random

import pytest

from progrun.changes import SlotTracker
from progrun.states import ModuleState
from progrun.table import DataTable


@pytest.fixture
def table():
    return DataTable({"a": "float64"})


def test_no_changes_leaves_tracker_clean(table):
    tr = SlotTracker()
    tr.update(table, 1)
    assert tr.created_count() == 0
    assert not tr.has_updated() and not tr.has_deleted()
    assert tr.next_state() is ModuleState.BLOCKED


def test_appends_grow_buffer(table):
    tr = SlotTracker()
    table.append({"a": [1.0, 2.0, 3.0]}, run=1)
    tr.update(table, 1)
    assert tr.created_count() == 3


def test_update_on_old_row_sets_flag(table):
    tr = SlotTracker()
    table.append({"a": [1.0]}, run=1)
    tr.update(table, 1)
    tr.next_created(10)
    table.update_rows([0], {"a": [2.0]}, run=2)
    tr.update(table, 2)
    assert tr.has_updated()
    assert tr.next_state() is ModuleState.READY


def test_delete_sets_flag(table):
    tr = SlotTracker()
    table.append({"a": [1.0, 2.0]}, run=1)
    tr.update(table, 1)
    tr.next_created(10)
    table.delete_rows([0], run=2)
    tr.update(table, 2)
    assert tr.has_deleted()
    assert tr.take_deleted() == {0}
    assert not tr.has_deleted()


def test_update_idempotent_within_activation(table):
    tr = SlotTracker()
    table.append({"a": [1.0, 2.0]}, run=1)
    tr.update(table, 1)
    tr.update(table, 1)
    assert tr.created_count() == 2


class TestNextCreated:
    def test_empty_buffer(self, table):
        tr = SlotTracker()
        tr.update(table, 1)
        assert tr.next_created(5).tolist() == []

    def test_drains_in_order(self, table):
        tr = SlotTracker()
        table.append({"a": [float(i) for i in range(10)]}, run=1)
        tr.update(table, 1)
        assert tr.next_created(4).tolist() == [0, 1, 2, 3]
        assert tr.created_count() == 6

    def test_repeated_drains_concatenate_to_creation_order(self, table):
        rng = random.Random(3)
        tr = SlotTracker()
        run = 0
        expected = []
        drained = []
        for _ in range(20):
            run += 1
            n = rng.randint(0, 5)
            ids = table.append({"a": [0.0] * n}, run=run)
            expected.extend(ids)
            tr.update(table, run)
            drained.extend(tr.next_created(rng.randint(0, 4)).tolist())
        drained.extend(tr.next_created(10_000).tolist())
        assert drained == expected


class TestExactlyOnce:
    @pytest.mark.parametrize("seed", range(5))
    def test_append_only_delivery(self, seed, table):
        rng = random.Random(seed)
        tr = SlotTracker()
        run = 0
        seen = []
        for _ in range(30):
            run += 1
            table.append({"a": [0.0] * rng.randint(0, 4)}, run=run)
            tr.update(table, run)
            seen.extend(tr.next_created(rng.randint(1, 6)).tolist())
        seen.extend(tr.next_created(10_000).tolist())
        assert seen == table.row_ids.tolist()
        assert len(seen) == len(set(seen))


class TestReset:
    def test_reset_redelivers_live_rows(self, table):
        tr = SlotTracker()
        table.append({"a": [1.0, 2.0, 3.0]}, run=1)
        tr.update(table, 1)
        tr.next_created(10)
        table.delete_rows([1], run=2)
        tr.update(table, 2)
        tr.reset()
        tr.update(table, 2)
        assert tr.next_created(10).tolist() == [0, 2]
        assert not tr.has_deleted()

    def test_reset_on_empty_table(self, table):
        tr = SlotTracker()
        tr.reset()
        tr.update(table, 1)
        assert tr.created_count() == 0

    def test_flags_clear_after_reset_window(self, table):
        tr = SlotTracker()
        table.append({"a": [1.0]}, run=1)
        tr.update(table, 1)
        tr.next_created(1)
        table.update_rows([0], {"a": [5.0]}, run=2)
        tr.update(table, 2)
        assert tr.has_updated()
        tr.reset()
        tr.update(table, 2)
        assert not tr.has_updated()
        assert tr.next_created(5).tolist() == [0]


class TestNextState:
    def test_blocked_when_drained(self, table):
        tr = SlotTracker()
        table.append({"a": [1.0]}, run=1)
        tr.update(table, 1)
        tr.next_created(5)
        assert tr.next_state() is ModuleState.BLOCKED

    def test_ready_with_pending(self, table):
        tr = SlotTracker()
        table.append({"a": [1.0] * 5}, run=1)
        tr.update(table, 1)
        assert tr.next_state() is ModuleState.READY

    def test_ready_on_dirty_flags_with_empty_buffer(self, table):
        tr = SlotTracker()
        table.append({"a": [1.0]}, run=1)
        tr.update(table, 1)
        tr.next_created(5)
        table.update_rows([0], {"a": [2.0]}, run=2)
        tr.update(table, 2)
        assert tr.created_count() == 0
        assert tr.next_state() is ModuleState.READY


def test_table_replacement_acts_as_full_reset(table):
    tr = SlotTracker()
    table.append({"a": [1.0, 2.0]}, run=1)
    tr.update(table, 1)
    tr.next_created(10)
    fresh = DataTable({"a": "float64"})
    fresh.append({"a": [9.0]}, run=3)
    tr.update(fresh, 3)
    assert tr.was_replaced()
    assert tr.has_deleted()
    assert tr.take_deleted() is None  # "everything you knew is gone"
    assert tr.next_created(10).tolist() == [0]
