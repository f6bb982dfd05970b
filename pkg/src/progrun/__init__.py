"""progrun: a progressive dataflow runtime.

Modules compute bounded slices of work per activation under a time quantum,
publishing partial results that converge to the eager answer while the
computation stays steerable from outside (filters, parameters, centroids).
"""

from .changes import SlotTracker
from .errors import (
    CycleError,
    DuplicateInputError,
    FilterEvalError,
    FilterSyntaxError,
    InvalidMessageError,
    NotInputModuleError,
    PipelineConfigError,
    ProgrunError,
    RunOrderError,
    SchemaError,
    StateTransitionError,
    UnknownRowError,
    UnknownSlotError,
)
from .extrema import Max, Min
from .filters import parse_filter, unparse
from .histogram import Histogram2D
from .inputs import RangeQuery, Variable
from .io import CSVLoader, expand_glob
from .kmeans import MBKMeans
from .module import Module, RunRecord, SlotDescriptor, StepResult
from .scheduler import Scheduler, TimeTable
from .selection import Select, SelectDelta
from .states import ModuleState
from .table import UPDATE_COL, ChangeSet, DataTable
from .timing import TimePredictor
from .vis import Heatmap, HeatmapFrame, ScatterSample, Scatterplot, render_frame

__version__ = "0.1.0"

__all__ = [
    "ChangeSet",
    "CSVLoader",
    "CycleError",
    "DataTable",
    "DuplicateInputError",
    "FilterEvalError",
    "FilterSyntaxError",
    "Heatmap",
    "HeatmapFrame",
    "Histogram2D",
    "InvalidMessageError",
    "Max",
    "MBKMeans",
    "Min",
    "Module",
    "ModuleState",
    "NotInputModuleError",
    "PipelineConfigError",
    "ProgrunError",
    "RangeQuery",
    "RunOrderError",
    "RunRecord",
    "ScatterSample",
    "Scatterplot",
    "Scheduler",
    "SchemaError",
    "Select",
    "SelectDelta",
    "SlotDescriptor",
    "SlotTracker",
    "StateTransitionError",
    "StepResult",
    "TimePredictor",
    "TimeTable",
    "UnknownRowError",
    "UnknownSlotError",
    "UPDATE_COL",
    "Variable",
    "expand_glob",
    "parse_filter",
    "render_frame",
    "unparse",
]
