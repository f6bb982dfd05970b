"""Exception types shared across the package."""


class ProgrunError(Exception):
    """Base class for all progrun errors."""


class SchemaError(ProgrunError):
    """Row values do not match the table schema."""


class UnknownRowError(ProgrunError):
    """An operation referenced a row id that does not exist."""


class RunOrderError(ProgrunError):
    """A mutation carried a run number older than the table's latest change."""


class UnknownSlotError(ProgrunError):
    """A connection referenced a slot the module does not declare."""


class DuplicateInputError(ProgrunError):
    """An input slot already has a producer."""


class CycleError(ProgrunError):
    """A connection would create a cycle in the module graph."""

    def __init__(self, path):
        self.path = list(path)
        super().__init__("cycle through " + " -> ".join(self.path))


class StateTransitionError(ProgrunError):
    """A module attempted an illegal lifecycle transition."""


class InvalidMessageError(ProgrunError):
    """A from_input message was malformed for the target module."""


class NotInputModuleError(ProgrunError):
    """from_input was called on a module that does not accept input."""


class FilterSyntaxError(ProgrunError):
    """A filter expression failed to parse.

    ``position`` is the character offset of the offending token.
    """

    def __init__(self, message, position):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class FilterEvalError(ProgrunError):
    """A filter expression referenced a column absent from the table."""


class PipelineConfigError(ProgrunError):
    """A pipeline configuration file is invalid."""
