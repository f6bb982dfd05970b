"""Visualization-side modules: heatmap frames, scatter sampling, scatterplot.

The heatmap turns a count grid into an RGBA frame (intensity transform,
normalization by the current max, colormap lookup) and keeps a short history
of frames so clients can show the progression.  The scatter sampler maintains
a uniform reservoir over all processed rows.  The scatterplot is a thin
visualization sink whose ``create_dependent_modules`` builds the full
range-query / select / histogram / heatmap support graph around a data source.
"""

import io as _io
from collections import deque
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .extrema import Max, Min
from .histogram import Histogram2D
from .inputs import RangeQuery, Variable
from .module import Module, SlotDescriptor, StepResult
from .selection import Select
from .states import ModuleState
from .table import UPDATE_COL, DataTable

_VIRIDIS_ANCHORS = [
    (68, 1, 84), (71, 13, 96), (72, 24, 106), (72, 35, 116), (71, 45, 123),
    (69, 55, 129), (66, 64, 134), (62, 73, 137), (59, 82, 139), (55, 91, 141),
    (51, 99, 141), (47, 107, 142), (44, 114, 142), (41, 122, 142),
    (38, 130, 142), (35, 137, 142), (33, 145, 140), (31, 152, 139),
    (31, 160, 136), (34, 167, 133), (40, 174, 128), (50, 182, 122),
    (63, 188, 115), (78, 195, 107), (94, 201, 98), (112, 207, 87),
    (132, 212, 75), (152, 216, 62), (173, 220, 48), (194, 223, 35),
    (216, 226, 25), (236, 229, 27), (253, 231, 37),
]


def _interp_lut(anchors) -> np.ndarray:
    xs = np.linspace(0.0, 255.0, len(anchors))
    grid = np.arange(256, dtype=np.float64)
    channels = [
        np.interp(grid, xs, [a[c] for a in anchors]) for c in range(3)
    ]
    return np.stack(channels, axis=1).round().astype(np.uint8)


COLORMAPS = {
    "viridis": _interp_lut(_VIRIDIS_ANCHORS),
    "gray": np.stack([np.arange(256, dtype=np.uint8)] * 3, axis=1),
}


def box_blur(values: np.ndarray, radius: int) -> np.ndarray:
    if radius <= 0:
        return values
    kernel = np.ones(2 * radius + 1) / (2 * radius + 1)
    out = np.apply_along_axis(np.convolve, 0, values, kernel, mode="same")
    return np.apply_along_axis(np.convolve, 1, out, kernel, mode="same")


@dataclass(frozen=True)
class HeatmapFrame:
    width: int
    height: int
    pixels: np.ndarray  # (height, width, 4) uint8, row 0 = top of the image
    colormap: str
    transform: str
    bounds: tuple
    run_number: int

    def to_png(self) -> bytes:
        buf = _io.BytesIO()
        Image.fromarray(self.pixels, mode="RGBA").save(buf, format="PNG")
        return buf.getvalue()


def render_frame(grid: np.ndarray, colormap: str, transform: str,
                 bounds=None, run_number: int = 0, blur: int = 0) -> HeatmapFrame:
    """Counts -> RGBA frame; zero grids give a uniform background."""
    counts = np.asarray(grid, dtype=np.float64)
    if transform == "log1p":
        counts = np.log1p(counts)
    elif transform != "linear":
        raise ValueError(f"unknown transform {transform!r}")
    top = counts.max() if counts.size else 0.0
    intensity = counts / top if top > 0 else np.zeros_like(counts)
    intensity = box_blur(intensity, blur)
    lut = COLORMAPS[colormap]
    idx = np.clip(np.round(intensity * 255).astype(np.int64), 0, 255)
    rgb = lut[idx]
    alpha = np.full(rgb.shape[:2] + (1,), 255, dtype=np.uint8)
    pixels = np.concatenate([rgb, alpha], axis=2)
    # flip so growing y points up on screen
    pixels = np.ascontiguousarray(pixels[::-1])
    h, w = counts.shape
    return HeatmapFrame(
        width=w, height=h, pixels=pixels, colormap=colormap,
        transform=transform, bounds=bounds, run_number=run_number,
    )


class Heatmap(Module):
    input_descriptors = (SlotDescriptor("array", required=True),)
    output_names = ("frame",)
    param_defaults = {
        "quantum": 1.0,
        "colormap": "viridis",
        "transform": "linear",  # or "log1p"
        "blur": 0,
        "history": 20,
    }

    def __init__(self, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        if self.params["colormap"] not in COLORMAPS:
            raise ValueError(f"unknown colormap {self.params['colormap']!r}")
        self._frames = deque(maxlen=int(self.params["history"]))
        self._announce = None

    def is_visualization(self) -> bool:
        return True

    @property
    def frame(self):
        return self._frames[-1] if self._frames else None

    @property
    def history(self) -> list:
        return list(self._frames)

    def get_data(self, name):
        if name == "frame_object":
            return self.frame
        return super().get_data(name)

    def _read_bounds(self):
        """Bounds metadata published by the grid producer, when it has any."""
        producer = self.get_input_slot("array").producer
        if producer is None or not producer.has_output_slot("bounds"):
            return None
        data = producer.get_data("bounds")
        keys = ("xmin", "xmax", "ymin", "ymax")
        if data is None or len(data) == 0 or any(k not in data.column_names for k in keys):
            return None
        row = data.last_row(keys)
        return tuple(float(row[k]) for k in keys)

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("array")
        slot.update(run_number)
        changed = bool(slot.created_count() or slot.has_updated() or slot.has_deleted())
        slot.next_created(slot.created_count())
        slot.take_updated()
        slot.take_deleted()
        data = slot.data()
        if data is None or len(data) == 0:
            return StepResult(ModuleState.BLOCKED, 0)
        if not changed and self._frames:
            return StepResult(ModuleState.BLOCKED, 0)

        grid = data.to_numpy(data.column_names).astype(np.int64)
        stamp = int(data.column(UPDATE_COL).max())
        frame = render_frame(
            grid,
            colormap=self.params["colormap"],
            transform=self.params["transform"],
            bounds=self._read_bounds(),
            run_number=stamp,
            blur=int(self.params["blur"]),
        )
        self._frames.append(frame)
        self._publish(frame, run_number)
        return StepResult(ModuleState.BLOCKED, int(grid.size))

    def _publish(self, frame, run_number):
        if self._announce is None:
            self._announce = DataTable(
                {"width": "int64", "height": "int64", "stamp": "int64"}
            )
            self._announce.append(
                {"width": [frame.width], "height": [frame.height], "stamp": [frame.run_number]},
                run=run_number,
            )
            self.set_output("frame", self._announce)
        else:
            self._announce.update_rows(
                [0],
                {"width": frame.width, "height": frame.height, "stamp": frame.run_number},
                run=run_number,
            )
        self.mark_published(run_number)


class ScatterSample(Module):
    """Uniform reservoir sample (Algorithm R) of the input rows."""

    input_descriptors = (SlotDescriptor("df", required=True),)
    output_names = ("df",)
    param_defaults = {"quantum": 1.0, "size": 500, "seed": 0}

    def __init__(self, x_column, y_column, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self.x_column = x_column
        self.y_column = y_column
        self._rng = np.random.default_rng(self.params["seed"])
        self._seen = 0
        self._src_ids = []
        self._xy = []
        self._table = None

    def _restart(self, slot, run_number):
        slot.reset()
        slot.update(run_number)
        self._seen = 0
        self._src_ids = []
        self._xy = []
        self._table = DataTable(
            {"src_id": "int64", "x": "float64", "y": "float64"}
        )
        self.set_output("df", self._table)
        self.mark_published(run_number)

    def run_step(self, run_number, step_size, howlong):
        slot = self.get_input_slot("df")
        slot.update(run_number)
        if slot.has_updated() or slot.has_deleted():
            # sampled rows may be stale; rebuild the reservoir from scratch
            self._restart(slot, run_number)
        data = slot.data()
        if data is None:
            return StepResult(ModuleState.BLOCKED, 0)
        if self._table is None:
            self._table = DataTable(
                {"src_id": "int64", "x": "float64", "y": "float64"}
            )
            self.set_output("df", self._table)
        if self.x_column not in data.column_names or self.y_column not in data.column_names:
            return StepResult(ModuleState.BLOCKED, 0)

        ids = slot.next_created(step_size)
        steps = len(ids)
        if steps == 0:
            return StepResult(slot.next_state(), 0)
        rows = data.get_rows(ids, (self.x_column, self.y_column))
        xs = rows[self.x_column].astype(np.float64)
        ys = rows[self.y_column].astype(np.float64)
        size = int(self.params["size"])
        appended, replaced = [], {}
        for src, x, y in zip(np.asarray(ids).tolist(), xs.tolist(), ys.tolist()):
            self._seen += 1
            if len(self._src_ids) < size:
                self._src_ids.append(src)
                self._xy.append((x, y))
                appended.append((src, x, y))
            else:
                j = int(self._rng.integers(0, self._seen))
                if j < size:
                    self._src_ids[j] = src
                    self._xy[j] = (x, y)
                    replaced[j] = (src, x, y)
        if appended:
            self._table.append(
                {
                    "src_id": [a[0] for a in appended],
                    "x": [a[1] for a in appended],
                    "y": [a[2] for a in appended],
                },
                run=run_number,
            )
        live_replaced = {j: v for j, v in replaced.items() if j < len(self._table)}
        if live_replaced:
            slots = sorted(live_replaced)
            self._table.update_rows(
                slots,
                {
                    "src_id": [live_replaced[j][0] for j in slots],
                    "x": [live_replaced[j][1] for j in slots],
                    "y": [live_replaced[j][2] for j in slots],
                },
                run=run_number,
            )
        if appended or live_replaced:
            self.mark_published(run_number)
        return StepResult(slot.next_state(), steps)

    @property
    def reservoir(self) -> list:
        return list(zip(self._src_ids, self._xy))


class Scatterplot(Module):
    """Visualization sink combining a heatmap frame and a point sample."""

    input_descriptors = (
        SlotDescriptor("frame", required=False),
        SlotDescriptor("sample", required=False),
    )
    output_names = ("df",)
    param_defaults = {
        "quantum": 1.0,
        "xbins": 512,
        "ybins": 512,
        "sample_size": 500,
    }

    def __init__(self, x_column, y_column, *, scheduler, name=None, **params):
        super().__init__(scheduler=scheduler, name=name, **params)
        self.x_column = x_column
        self.y_column = y_column
        self.dependents: dict = {}
        self._table = None

    def is_visualization(self) -> bool:
        return True

    def create_dependent_modules(self, source: Module, slot_name: str = "df") -> dict:
        """Build and wire the support graph around ``source``:

        min/max over the source, lo/hi variables templated on them, a range
        query feeding a select, then histogram -> heatmap and a point sampler
        over the selected rows, all consumed by this plot.
        """
        s = self.scheduler
        x, y = self.x_column, self.y_column
        mods = {
            "min": Min(scheduler=s),
            "max": Max(scheduler=s),
        }
        s.connect(source, slot_name, mods["min"], "df")
        s.connect(source, slot_name, mods["max"], "df")
        mods["variable_min"] = Variable(scheduler=s)
        mods["variable_max"] = Variable(scheduler=s)
        s.connect(mods["min"], "df", mods["variable_min"], "like")
        s.connect(mods["max"], "df", mods["variable_max"], "like")
        mods["range_query"] = RangeQuery(scheduler=s)
        s.connect(mods["variable_min"], "df", mods["range_query"], "min")
        s.connect(mods["variable_max"], "df", mods["range_query"], "max")
        mods["select"] = Select(scheduler=s)
        s.connect(source, slot_name, mods["select"], "df")
        s.connect(mods["range_query"], "df", mods["select"], "query")
        mods["histogram2d"] = Histogram2D(
            x, y, scheduler=s,
            xbins=self.params["xbins"], ybins=self.params["ybins"],
        )
        s.connect(mods["select"], "df", mods["histogram2d"], "df")
        s.connect(mods["min"], "df", mods["histogram2d"], "min")
        s.connect(mods["max"], "df", mods["histogram2d"], "max")
        mods["heatmap"] = Heatmap(scheduler=s)
        s.connect(mods["histogram2d"], "df", mods["heatmap"], "array")
        mods["scatter_sample"] = ScatterSample(
            x, y, scheduler=s, size=self.params["sample_size"]
        )
        s.connect(mods["select"], "df", mods["scatter_sample"], "df")
        s.connect(mods["heatmap"], "frame", self, "frame")
        s.connect(mods["scatter_sample"], "df", self, "sample")
        self.dependents = mods
        return mods

    def run_step(self, run_number, step_size, howlong):
        changed = False
        stamp = 0
        points = 0
        for name in ("frame", "sample"):
            slot = self.get_input_slot(name)
            if not slot.connected:
                continue
            slot.update(run_number)
            if slot.created_count() or slot.has_updated() or slot.has_deleted():
                changed = True
            slot.next_created(slot.created_count())
            slot.take_updated()
            slot.take_deleted()
            data = slot.data()
            if data is not None and len(data):
                stamp = max(stamp, int(data.column(UPDATE_COL).max()))
                if name == "sample":
                    points = len(data)
        if not changed:
            return StepResult(ModuleState.BLOCKED, 0)
        if self._table is None:
            self._table = DataTable({"stamp": "int64", "points": "int64"})
            self._table.append({"stamp": [stamp], "points": [points]}, run=run_number)
            self.set_output("df", self._table)
        else:
            self._table.update_rows([0], {"stamp": stamp, "points": points}, run=run_number)
        self.mark_published(run_number)
        return StepResult(ModuleState.BLOCKED, 1)
