"""Module lifecycle states and the legal transition relation."""

from enum import Enum

from .errors import StateTransitionError


class ModuleState(Enum):
    CREATED = "created"
    BLOCKED = "blocked"
    READY = "ready"
    RUNNING = "running"
    ZOMBIE = "zombie"
    TERMINATED = "terminated"


# target states reachable from each state
LEGAL_TRANSITIONS = {
    ModuleState.CREATED: {ModuleState.BLOCKED, ModuleState.READY},
    ModuleState.BLOCKED: {ModuleState.READY},
    ModuleState.READY: {ModuleState.BLOCKED, ModuleState.RUNNING},
    ModuleState.RUNNING: {ModuleState.READY, ModuleState.BLOCKED, ModuleState.ZOMBIE},
    ModuleState.ZOMBIE: {ModuleState.TERMINATED},
    ModuleState.TERMINATED: set(),
}


def check_transition(current: ModuleState, target: ModuleState) -> None:
    """Raise unless ``current -> target`` is a legal lifecycle transition."""
    if target is current:
        return
    if target not in LEGAL_TRANSITIONS[current]:
        raise StateTransitionError(f"illegal transition {current.value} -> {target.value}")
